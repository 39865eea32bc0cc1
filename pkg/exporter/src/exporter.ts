/**
 * The export pipeline: read captions or walk an image directory, encode in
 * batches, L2-normalize, and write a `.hemb` store plus sidecars.
 *
 * Normalization happens here rather than in the encoders, so the store's
 * `normalized` flag never depends on a checkpoint's conventions.  Next to
 * the store and its labels, a `<stem>.meta.json` records which encoder
 * produced the rows and, for images, which inputs were skipped.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import type { Encoder, SkippedImage } from "./encoders.js";
import { normalizeVector, resolveEncoder } from "./encoders.js";
import {
  HembStore,
  ValidationError,
  atomicWrite,
  labelsPath,
  makeStore,
  writeHemb,
} from "./hemb.js";

export const IMAGE_EXTENSIONS = new Set([".bmp", ".gif", ".jpeg", ".jpg", ".png", ".webp"]);
export const META_SUFFIX = ".meta.json";

export interface ExportJob {
  modelId: string;
  /** Caption file for text jobs, image directory for image jobs. */
  input: string;
  modality: "text" | "image";
  batch: number;
  out: string;
}

export interface ExportResult {
  out: string;
  rows: number;
  dim: number;
  truncated: number;
  skipped: SkippedImage[];
  store: HembStore;
}

/** Sibling of the labels sidecar: `x.hemb` maps to `x.meta.json`. */
export function metaPath(filePath: string): string {
  return labelsPath(filePath).slice(0, -".labels.txt".length) + META_SUFFIX;
}

export function validateJob(job: ExportJob): void {
  if (!job.out) {
    throw new ValidationError("an output path is required");
  }
  if (!Number.isInteger(job.batch) || job.batch < 1) {
    throw new ValidationError(`batch must be a positive integer, got ${job.batch}`);
  }
  const stat = fs.statSync(job.input);
  if (job.modality === "text" && !stat.isFile()) {
    throw new ValidationError(`text export needs a caption file, ${job.input} is not one`);
  }
  if (job.modality === "image" && !stat.isDirectory()) {
    throw new ValidationError(`image export needs a directory, ${job.input} is not one`);
  }
}

function splitLines(text: string): string[] {
  if (text === "") return [];
  const parts = text.split(/\r\n|\r|\n/);
  if (parts[parts.length - 1] === "") parts.pop();
  return parts;
}

function* chunks<T>(items: readonly T[], size: number): Generator<T[]> {
  for (let start = 0; start < items.length; start += size) {
    yield items.slice(start, start + size);
  }
}

function writeMeta(job: ExportJob, encoder: Encoder, result: ExportResult): void {
  const meta = {
    encoder: encoder.name,
    modality: job.modality,
    input: job.input,
    rows: result.rows,
    dim: result.dim,
    temperature: result.store.temperature,
    truncated: result.truncated,
    skipped: result.skipped,
  };
  atomicWrite(metaPath(job.out), JSON.stringify(meta, null, 2) + "\n");
}

/**
 * Encode one caption per input line into a text-modality store.
 *
 * The labels sidecar repeats the input lines verbatim, so a store can
 * always be traced back to the captions that produced it.
 */
export async function exportText(job: ExportJob, encoder?: Encoder): Promise<ExportResult> {
  validateJob(job);
  const resolved = encoder ?? (await resolveEncoder(job.modelId));
  const lines = splitLines(fs.readFileSync(job.input, "utf8"));

  const vectors: Float64Array[] = [];
  let truncated = 0;
  for (const chunk of chunks(lines, job.batch)) {
    const encoded = await resolved.encodeText(chunk);
    if (encoded.vectors.length !== chunk.length) {
      throw new ValidationError(
        `encoder returned ${encoded.vectors.length} vectors for ${chunk.length} lines`
      );
    }
    vectors.push(...encoded.vectors.map(normalizeVector));
    truncated += encoded.truncated;
  }

  const store = makeStore(vectors, {
    dim: resolved.dim,
    normalized: true,
    temperature: resolved.temperature,
    modality: "text",
    labels: lines,
  });
  writeHemb(store, job.out);
  const result: ExportResult = {
    out: job.out,
    rows: store.count,
    dim: store.dim,
    truncated,
    skipped: [],
    store,
  };
  writeMeta(job, resolved, result);
  return result;
}

/** Every image file under `dir`, as sorted relative paths. */
export function listImages(dir: string): string[] {
  const rels: string[] = [];
  for (const entry of fs.readdirSync(dir, { recursive: true, withFileTypes: true })) {
    if (!entry.isFile()) continue;
    if (!IMAGE_EXTENSIONS.has(path.extname(entry.name).toLowerCase())) continue;
    rels.push(path.relative(dir, path.join(entry.parentPath, entry.name)));
  }
  rels.sort();
  return rels;
}

/**
 * Encode every image under the input directory, in sorted filename order.
 *
 * Unreadable images are skipped, listed in the result and the meta
 * sidecar; the labels sidecar holds the relative path of each kept image.
 */
export async function exportImages(job: ExportJob, encoder?: Encoder): Promise<ExportResult> {
  validateJob(job);
  const resolved = encoder ?? (await resolveEncoder(job.modelId));
  const rels = listImages(job.input);
  const relByAbs = new Map(rels.map((rel) => [path.join(job.input, rel), rel]));

  const vectors: Float64Array[] = [];
  const labels: string[] = [];
  const skipped: SkippedImage[] = [];
  for (const chunk of chunks([...relByAbs.keys()], job.batch)) {
    const encoded = await resolved.encodeImages(chunk);
    if (encoded.vectors.length !== encoded.kept.length) {
      throw new ValidationError(
        `encoder returned ${encoded.vectors.length} vectors for ${encoded.kept.length} kept images`
      );
    }
    vectors.push(...encoded.vectors.map(normalizeVector));
    labels.push(...encoded.kept.map((abs) => relByAbs.get(abs) ?? abs));
    skipped.push(
      ...encoded.skipped.map(({ path: abs, reason }) => ({
        path: relByAbs.get(abs) ?? abs,
        reason,
      }))
    );
  }

  const store = makeStore(vectors, {
    dim: resolved.dim,
    normalized: true,
    temperature: resolved.temperature,
    modality: "image",
    labels,
  });
  writeHemb(store, job.out);
  const result: ExportResult = {
    out: job.out,
    rows: store.count,
    dim: store.dim,
    truncated: 0,
    skipped,
    store,
  };
  writeMeta(job, resolved, result);
  return result;
}
