import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { loadClipEncoder } from "../src/encoders.js";
import { exportImages, exportText } from "../src/exporter.js";
import { row } from "../src/hemb.js";

/**
 * Sanity check that a real checkpoint places a caption nearer to a matching
 * photo than to an unrelated one.  It needs local assets, so it only runs
 * when both environment variables are set:
 *
 *   CLIP_MODEL_DIR     directory holding the checkpoint (see the readme)
 *   CLIP_TEST_IMAGES   directory with dog.jpg and texture.jpg
 *
 * The default model id can be overridden with CLIP_MODEL_ID.
 */
const modelDir = process.env.CLIP_MODEL_DIR;
const imageDir = process.env.CLIP_TEST_IMAGES;
const modelId = process.env.CLIP_MODEL_ID ?? "Xenova/clip-vit-base-patch32";

function dot(a: Float64Array, b: Float64Array): number {
  let sum = 0;
  for (let i = 0; i < a.length; i++) sum += a[i]! * b[i]!;
  return sum;
}

describe.skipIf(!modelDir || !imageDir)("cross-modal sanity", () => {
  let tmp: string;
  beforeAll(() => {
    tmp = fs.mkdtempSync(path.join(os.tmpdir(), "clip-"));
  });
  afterAll(() => {
    fs.rmSync(tmp, { recursive: true, force: true });
  });

  it("ranks a dog photo above a texture photo for a dog caption", async () => {
    const encoder = await loadClipEncoder(modelId);
    const textOut = path.join(tmp, "caption.hemb");
    const imageOut = path.join(tmp, "photos.hemb");
    fs.writeFileSync(path.join(tmp, "caption.txt"), "a photo of a dog\n");

    const text = await exportText(
      {
        modelId,
        input: path.join(tmp, "caption.txt"),
        modality: "text",
        batch: 8,
        out: textOut,
      },
      encoder
    );
    const images = await exportImages(
      { modelId, input: imageDir!, modality: "image", batch: 8, out: imageOut },
      encoder
    );

    expect(text.rows).toBe(1);
    expect(images.skipped).toEqual([]);
    const labels = images.store.labels!;
    const dogIndex = labels.findIndex((label) => label.includes("dog"));
    const textureIndex = labels.findIndex((label) => label.includes("texture"));
    expect(dogIndex).toBeGreaterThanOrEqual(0);
    expect(textureIndex).toBeGreaterThanOrEqual(0);

    const caption = row(text.store, 0);
    const dogScore = dot(caption, row(images.store, dogIndex));
    const textureScore = dot(caption, row(images.store, textureIndex));
    expect(dogScore).toBeGreaterThan(textureScore);
  }, 120_000);
});
