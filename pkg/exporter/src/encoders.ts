/**
 * Embedding encoders behind one interface.
 *
 * `hash:<dim>` is a deterministic hash-projection encoder: every input is
 * expanded from SHA-256 digests of its bytes into a unit vector.  It knows
 * nothing about meaning, but it is reproducible across machines and needs
 * no checkpoint, which is exactly what the format and pipeline tests want.
 *
 * Everything else is treated as a CLIP-style checkpoint id for the
 * optional `@xenova/transformers` dependency.  Set `CLIP_MODEL_DIR` to a
 * directory of locally downloaded checkpoints to run fully offline.
 */

import { Buffer } from "node:buffer";
import { createHash } from "node:crypto";
import * as fs from "node:fs";

import { DEFAULT_TEMPERATURE, HembError, ValidationError } from "./hemb.js";

export interface SkippedImage {
  path: string;
  reason: string;
}

export interface TextEncoding {
  /** One vector per input line, in order. */
  vectors: Float64Array[];
  /** How many lines were longer than the tokenizer window and got cut. */
  truncated: number;
}

export interface ImageEncoding {
  /** One vector per successfully encoded image. */
  vectors: Float64Array[];
  /** The input paths the vectors correspond to, in order. */
  kept: string[];
  skipped: SkippedImage[];
}

export interface Encoder {
  readonly name: string;
  readonly dim: number;
  readonly temperature: number;
  encodeText(lines: readonly string[]): Promise<TextEncoding>;
  encodeImages(paths: readonly string[]): Promise<ImageEncoding>;
}

export function normalizeVector(vector: Float64Array): Float64Array {
  let sum = 0;
  for (const value of vector) sum += value * value;
  const norm = Math.sqrt(sum);
  if (!Number.isFinite(norm) || norm === 0) {
    throw new ValidationError(`cannot normalize a vector of norm ${norm}`);
  }
  const out = new Float64Array(vector.length);
  for (let i = 0; i < vector.length; i++) out[i] = vector[i]! / norm;
  return out;
}

function digestVector(tag: string, payload: Buffer, dim: number): Float64Array {
  const values = new Float64Array(dim);
  let filled = 0;
  for (let chunk = 0; filled < dim; chunk++) {
    const digest = createHash("sha256")
      .update(tag)
      .update("\0")
      .update(String(chunk))
      .update("\0")
      .update(payload)
      .digest();
    for (let offset = 0; offset < 8 && filled < dim; offset++) {
      const word = digest.readUInt32BE(offset * 4);
      values[filled++] = (word / 2 ** 32) * 2 - 1;
    }
  }
  return normalizeVector(values);
}

/** The checkpoint-free encoder; content-addressed, so identical bytes give identical rows. */
export function makeHashEncoder(dim = 64): Encoder {
  if (!Number.isInteger(dim) || dim < 1) {
    throw new ValidationError(`hash encoder dimension must be positive, got ${dim}`);
  }
  return {
    name: `hash-projection-${dim}`,
    dim,
    temperature: DEFAULT_TEMPERATURE,
    async encodeText(lines) {
      const vectors = lines.map((line) =>
        digestVector("text", Buffer.from(line, "utf8"), dim)
      );
      return { vectors, truncated: 0 };
    },
    async encodeImages(paths) {
      const vectors: Float64Array[] = [];
      const kept: string[] = [];
      const skipped: SkippedImage[] = [];
      for (const imagePath of paths) {
        let payload: Buffer;
        try {
          payload = fs.readFileSync(imagePath);
        } catch (error) {
          skipped.push({ path: imagePath, reason: String((error as Error).message) });
          continue;
        }
        vectors.push(digestVector("image", payload, dim));
        kept.push(imagePath);
      }
      return { vectors, kept, skipped };
    },
  };
}

function tensorRows(tensor: { dims: number[]; data: ArrayLike<number> }): Float64Array[] {
  const [count, dim] = tensor.dims;
  if (count === undefined || dim === undefined) {
    throw new HembError(`encoder returned a tensor of shape [${tensor.dims.join(", ")}]`);
  }
  const rows: Float64Array[] = [];
  for (let i = 0; i < count; i++) {
    const vector = new Float64Array(dim);
    for (let j = 0; j < dim; j++) vector[j] = Number(tensor.data[i * dim + j]);
    rows.push(vector);
  }
  return rows;
}

/**
 * Load a CLIP checkpoint through `@xenova/transformers`.
 *
 * The dependency is optional; without it this throws a `HembError` telling
 * the caller to install it or fall back to `hash:<dim>`.  The exported
 * temperature is `1 / exp(logit_scale)` when the checkpoint config carries
 * one, else the stock 0.01.
 */
export async function loadClipEncoder(modelId: string): Promise<Encoder> {
  const specifier = "@xenova/transformers";
  let transformers: any;
  try {
    transformers = await import(specifier);
  } catch {
    throw new HembError(
      `model ${modelId} needs the optional dependency @xenova/transformers; ` +
        "install it, or use --model hash:<dim> for a checkpoint-free export"
    );
  }
  const { env, AutoTokenizer, AutoProcessor, CLIPTextModelWithProjection, CLIPVisionModelWithProjection, RawImage } = transformers;
  const localDir = process.env.CLIP_MODEL_DIR;
  if (localDir) {
    env.localModelPath = localDir;
    env.allowRemoteModels = false;
  }

  const tokenizer = await AutoTokenizer.from_pretrained(modelId);
  const textModel = await CLIPTextModelWithProjection.from_pretrained(modelId);
  const processor = await AutoProcessor.from_pretrained(modelId);
  const visionModel = await CLIPVisionModelWithProjection.from_pretrained(modelId);

  const logitScale =
    textModel.config?.logit_scale ?? textModel.config?.logit_scale_init_value;
  const temperature =
    typeof logitScale === "number" ? 1 / Math.exp(logitScale) : DEFAULT_TEMPERATURE;
  const maxTokens: number | undefined = tokenizer.model_max_length;

  const probe = await textModel(tokenizer([""], { padding: true, truncation: true }));
  const dim = probe.text_embeds.dims[1] as number;

  return {
    name: `clip:${modelId}`,
    dim,
    temperature,
    async encodeText(lines) {
      if (lines.length === 0) return { vectors: [], truncated: 0 };
      let truncated = 0;
      if (typeof maxTokens === "number" && Number.isFinite(maxTokens)) {
        for (const line of lines) {
          const { input_ids } = tokenizer(line, { truncation: false });
          if (input_ids.dims[input_ids.dims.length - 1] > maxTokens) truncated++;
        }
      }
      const inputs = tokenizer([...lines], { padding: true, truncation: true });
      const output = await textModel(inputs);
      return { vectors: tensorRows(output.text_embeds), truncated };
    },
    async encodeImages(paths) {
      const vectors: Float64Array[] = [];
      const kept: string[] = [];
      const skipped: SkippedImage[] = [];
      const images: any[] = [];
      for (const imagePath of paths) {
        try {
          images.push(await RawImage.read(imagePath));
          kept.push(imagePath);
        } catch (error) {
          skipped.push({ path: imagePath, reason: String((error as Error).message) });
        }
      }
      if (images.length > 0) {
        const inputs = await processor(images);
        const output = await visionModel(inputs);
        vectors.push(...tensorRows(output.image_embeds));
      }
      return { vectors, kept, skipped };
    },
  };
}

/** Map a `--model` argument to an encoder; `hash` and `hash:<dim>` stay local. */
export async function resolveEncoder(modelId: string): Promise<Encoder> {
  const match = /^hash(?::(\d+))?$/.exec(modelId);
  if (match) {
    return makeHashEncoder(match[1] === undefined ? 64 : Number(match[1]));
  }
  return loadClipEncoder(modelId);
}
