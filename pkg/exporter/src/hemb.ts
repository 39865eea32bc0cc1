/**
 * Reader and writer for the `.hemb` embedding container.
 *
 * The layout is little-endian and mirrors the consumer side byte for byte:
 *
 *     8 bytes   magic "HFTTEMB1"
 *     u32       format version (1)
 *     u32       embedding dimension d
 *     u64       row count n
 *     u8        normalized flag (0 or 1)
 *     u8        modality (0 text, 1 image, 2 synthetic)
 *     f32       temperature
 *     n*d f32   row-major embedding payload
 *
 * Values are held as float64 in memory but snapped to their float32
 * representation on construction, so a written store reads back bit for
 * bit.  An optional sidecar `<name>.labels.txt` carries one UTF-8 label
 * per row.
 */

import { Buffer } from "node:buffer";
import { randomBytes } from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";

export const MAGIC = "HFTTEMB1";
export const FORMAT_VERSION = 1;
export const HEADER_SIZE = 30;
export const MODALITIES = ["text", "image", "synthetic"] as const;
export const UNIT_TOL = 1e-4;
export const DEFAULT_TEMPERATURE = 0.01;
export const LABELS_SUFFIX = ".labels.txt";

export type Modality = (typeof MODALITIES)[number];

/** Base class for everything this package throws on purpose. */
export class HembError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** Inputs that violate a documented invariant. */
export class ValidationError extends HembError {}

/** Bytes that are well-formed files of the wrong shape or version. */
export class FormatError extends ValidationError {}

/** Bytes that contradict their own header. */
export class CorruptionError extends FormatError {}

export interface HembStore {
  /** Row-major matrix, length `count * dim`, float32-snapped values. */
  readonly matrix: Float64Array;
  readonly dim: number;
  readonly count: number;
  readonly normalized: boolean;
  readonly temperature: number;
  readonly modality: Modality;
  readonly labels: readonly string[] | null;
}

export interface StoreOptions {
  dim?: number;
  normalized?: boolean;
  temperature?: number;
  modality?: Modality;
  labels?: readonly string[] | null;
}

/** One row of the matrix as a live subarray view. */
export function row(store: HembStore, index: number): Float64Array {
  if (index < 0 || index >= store.count) {
    throw new ValidationError(`row ${index} out of range for ${store.count} rows`);
  }
  return store.matrix.subarray(index * store.dim, (index + 1) * store.dim);
}

function rowNorm(store: HembStore, index: number): number {
  let sum = 0;
  for (const value of row(store, index)) sum += value * value;
  return Math.sqrt(sum);
}

/**
 * Build a validated store from per-row vectors.
 *
 * `dim` may be omitted when at least one row is present.  Entries and the
 * temperature are snapped to float32 precision here, which is what makes
 * write-then-read lossless.
 */
export function makeStore(rows: readonly ArrayLike<number>[], options: StoreOptions = {}): HembStore {
  const normalized = options.normalized ?? true;
  const temperature = options.temperature ?? DEFAULT_TEMPERATURE;
  const modality = options.modality ?? "text";
  const labels = options.labels ?? null;

  const first = rows[0];
  const dim = options.dim ?? (first === undefined ? 0 : first.length);
  if (!Number.isInteger(dim) || dim < 1) {
    throw new ValidationError("embedding dimension must be positive");
  }
  const matrix = new Float64Array(rows.length * dim);
  for (let i = 0; i < rows.length; i++) {
    const source = rows[i]!;
    if (source.length !== dim) {
      throw new ValidationError(
        `row ${i} has length ${source.length}, expected ${dim}`
      );
    }
    for (let j = 0; j < dim; j++) {
      const value = source[j]!;
      if (!Number.isFinite(value)) {
        throw new ValidationError(`row ${i} contains a NaN or Inf entry`);
      }
      matrix[i * dim + j] = Math.fround(value);
    }
  }

  if (!(Number.isFinite(temperature) && temperature > 0)) {
    throw new ValidationError(`temperature must be positive, got ${temperature}`);
  }
  if (!MODALITIES.includes(modality)) {
    throw new ValidationError(
      `modality must be one of ${MODALITIES.join(", ")}, got ${String(modality)}`
    );
  }
  let ownedLabels: string[] | null = null;
  if (labels !== null) {
    ownedLabels = labels.map(String);
    if (ownedLabels.length !== rows.length) {
      throw new ValidationError(
        `got ${ownedLabels.length} labels for ${rows.length} embeddings`
      );
    }
    for (let i = 0; i < ownedLabels.length; i++) {
      if (/[\r\n]/.test(ownedLabels[i]!)) {
        throw new ValidationError(`label ${i} contains a line break`);
      }
    }
  }

  const store: HembStore = {
    matrix,
    dim,
    count: rows.length,
    normalized: Boolean(normalized),
    temperature: Math.fround(temperature),
    modality,
    labels: ownedLabels,
  };
  if (store.normalized) {
    for (let i = 0; i < store.count; i++) {
      const norm = rowNorm(store, i);
      if (Math.abs(norm - 1) > UNIT_TOL) {
        throw new ValidationError(
          `row ${i} has norm ${norm.toPrecision(6)}, expected 1 within ${UNIT_TOL}`
        );
      }
    }
  }
  return store;
}

/** Sidecar path: `x.hemb` maps to `x.labels.txt`, anything else appends. */
export function labelsPath(filePath: string): string {
  const ext = path.extname(filePath);
  const stem = ext === ".hemb" ? filePath.slice(0, -ext.length) : filePath;
  return stem + LABELS_SUFFIX;
}

export function atomicWrite(filePath: string, blob: Buffer | string): void {
  const parent = path.dirname(path.resolve(filePath));
  const tmp = path.join(parent, `.hemb-${process.pid}-${randomBytes(6).toString("hex")}`);
  try {
    fs.writeFileSync(tmp, blob);
    fs.renameSync(tmp, filePath);
  } catch (error) {
    fs.rmSync(tmp, { force: true });
    throw error;
  }
}

/** Write the container atomically, plus the labels sidecar when present. */
export function writeHemb(store: HembStore, filePath: string): void {
  const blob = Buffer.alloc(HEADER_SIZE + store.count * store.dim * 4);
  blob.write(MAGIC, 0, "ascii");
  blob.writeUInt32LE(FORMAT_VERSION, 8);
  blob.writeUInt32LE(store.dim, 12);
  blob.writeBigUInt64LE(BigInt(store.count), 16);
  blob.writeUInt8(store.normalized ? 1 : 0, 24);
  blob.writeUInt8(MODALITIES.indexOf(store.modality), 25);
  blob.writeFloatLE(store.temperature, 26);
  for (let i = 0; i < store.matrix.length; i++) {
    blob.writeFloatLE(store.matrix[i]!, HEADER_SIZE + i * 4);
  }
  atomicWrite(filePath, blob);

  const sidecar = labelsPath(filePath);
  if (store.labels === null) {
    // A stale sidecar from an earlier save would change what a reader sees.
    fs.rmSync(sidecar, { force: true });
  } else {
    atomicWrite(sidecar, store.labels.map((label) => label + "\n").join(""));
  }
}

function splitLines(text: string): string[] {
  if (text === "") return [];
  const parts = text.split(/\r\n|\r|\n/);
  if (parts[parts.length - 1] === "") parts.pop();
  return parts;
}

/** Read a container back, re-validating every header and payload invariant. */
export function readHemb(filePath: string): HembStore {
  const blob = fs.readFileSync(filePath);
  if (blob.length < HEADER_SIZE) {
    throw new CorruptionError(
      `${filePath}: file shorter than the ${HEADER_SIZE}-byte header`
    );
  }
  const magic = blob.toString("ascii", 0, 8);
  if (magic !== MAGIC) {
    throw new FormatError(`${filePath}: bad magic ${JSON.stringify(magic)}, expected ${MAGIC}`);
  }
  const version = blob.readUInt32LE(8);
  if (version !== FORMAT_VERSION) {
    throw new FormatError(`${filePath}: unsupported format version ${version}`);
  }
  const dim = blob.readUInt32LE(12);
  if (dim === 0) {
    throw new ValidationError(`${filePath}: embedding dimension must be positive`);
  }
  const bigCount = blob.readBigUInt64LE(16);
  if (bigCount > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new CorruptionError(`${filePath}: row count ${bigCount} is not addressable`);
  }
  const count = Number(bigCount);
  const normalizedByte = blob.readUInt8(24);
  if (normalizedByte !== 0 && normalizedByte !== 1) {
    throw new FormatError(
      `${filePath}: normalized flag must be 0 or 1, got ${normalizedByte}`
    );
  }
  const modalityCode = blob.readUInt8(25);
  if (modalityCode >= MODALITIES.length) {
    throw new FormatError(`${filePath}: unknown modality code ${modalityCode}`);
  }
  const temperature = blob.readFloatLE(26);
  const expected = count * dim * 4;
  if (blob.length - HEADER_SIZE !== expected) {
    throw new CorruptionError(
      `${filePath}: payload holds ${blob.length - HEADER_SIZE} bytes, header implies ${expected}`
    );
  }
  const rows: Float64Array[] = [];
  for (let i = 0; i < count; i++) {
    const vector = new Float64Array(dim);
    for (let j = 0; j < dim; j++) {
      const value = blob.readFloatLE(HEADER_SIZE + (i * dim + j) * 4);
      if (!Number.isFinite(value)) {
        throw new ValidationError(`${filePath}: payload contains NaN or Inf entries`);
      }
      vector[j] = value;
    }
    rows.push(vector);
  }

  let labels: string[] | null = null;
  const sidecar = labelsPath(filePath);
  if (fs.existsSync(sidecar)) {
    labels = splitLines(fs.readFileSync(sidecar, "utf8"));
  }
  try {
    return makeStore(rows, {
      dim,
      normalized: normalizedByte === 1,
      temperature,
      modality: MODALITIES[modalityCode]!,
      labels,
    });
  } catch (error) {
    if (error instanceof ValidationError) {
      throw new ValidationError(`${filePath}: ${error.message}`);
    }
    throw error;
  }
}
