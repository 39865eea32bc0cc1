import { Buffer } from "node:buffer";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import {
  CorruptionError,
  FormatError,
  HembError,
  HembStore,
  ValidationError,
  labelsPath,
  makeStore,
  readHemb,
  row,
  writeHemb,
} from "../src/hemb.js";

let tmp: string;
beforeEach(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "hemb-"));
});
afterEach(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

const at = (name: string) => path.join(tmp, name);

/** A small deterministic non-unit matrix for round-trip tests. */
function sampleRows(count: number, dim: number): number[][] {
  const rows: number[][] = [];
  for (let i = 0; i < count; i++) {
    const vector: number[] = [];
    for (let j = 0; j < dim; j++) {
      vector.push(Math.sin(1 + i * dim + j) * 2);
    }
    rows.push(vector);
  }
  return rows;
}

describe("makeStore", () => {
  it("snaps entries and temperature to float32 precision", () => {
    const store = makeStore([[0.1, 0.2]], { normalized: false, temperature: 0.1 });
    expect(store.matrix[0]).toBe(Math.fround(0.1));
    expect(store.matrix[1]).toBe(Math.fround(0.2));
    expect(store.temperature).toBe(Math.fround(0.1));
    expect(store.matrix[0]).not.toBe(0.1);
  });

  it("accepts an empty matrix with an explicit dimension", () => {
    const store = makeStore([], { dim: 5, labels: [] });
    expect(store.count).toBe(0);
    expect(store.dim).toBe(5);
  });

  it("checks unit rows only when the normalized flag is set", () => {
    expect(() => makeStore([[3, 4]])).toThrow(ValidationError);
    const store = makeStore([[3, 4]], { normalized: false });
    expect(store.normalized).toBe(false);
    expect(makeStore([[0.6, 0.8]]).normalized).toBe(true);
  });

  it("rejects malformed inputs", () => {
    expect(() => makeStore([])).toThrow(/dimension/);
    expect(() => makeStore([[1, 0], [1]], { normalized: false })).toThrow(/length/);
    expect(() => makeStore([[Number.NaN]], { normalized: false })).toThrow(/NaN/);
    expect(() => makeStore([[1]], { normalized: false, temperature: 0 })).toThrow(
      /temperature/
    );
    expect(() =>
      makeStore([[1]], { normalized: false, modality: "audio" as never })
    ).toThrow(/modality/);
    expect(() => makeStore([[1, 0]], { labels: ["a", "b"] })).toThrow(/labels/);
    expect(() => makeStore([[1, 0]], { labels: ["two\nlines"] })).toThrow(/line break/);
  });

  it("exposes rows as views", () => {
    const store = makeStore([[0.6, 0.8], [1, 0]]);
    expect([...row(store, 1)]).toEqual([1, 0]);
    expect(() => row(store, 2)).toThrow(ValidationError);
  });
});

describe("error taxonomy", () => {
  it("nests corruption under format under validation", () => {
    const error = new CorruptionError("x");
    expect(error).toBeInstanceOf(FormatError);
    expect(error).toBeInstanceOf(ValidationError);
    expect(error).toBeInstanceOf(HembError);
    expect(error.name).toBe("CorruptionError");
  });
});

describe("writeHemb", () => {
  it("produces the documented bytes exactly", () => {
    const store = makeStore([[0.6, 0.8], [1, 0]], {
      temperature: 0.25,
      modality: "image",
    });
    writeHemb(store, at("golden.hemb"));
    const expected = Buffer.from(
      "48465454454d4231" + // magic "HFTTEMB1"
        "01000000" + // version 1
        "02000000" + // dim 2
        "0200000000000000" + // count 2
        "01" + // normalized
        "01" + // modality image
        "0000803e" + // f32 0.25
        "9a99193f" + // f32 0.6
        "cdcc4c3f" + // f32 0.8
        "0000803f" + // f32 1.0
        "00000000", // f32 0.0
      "hex"
    );
    expect(fs.readFileSync(at("golden.hemb")).equals(expected)).toBe(true);
  });

  it("writes one label per line in the sidecar", () => {
    const store = makeStore([[1, 0], [0, 1]], { labels: ["dog", "cat"] });
    writeHemb(store, at("pets.hemb"));
    expect(fs.readFileSync(at("pets.labels.txt"), "utf8")).toBe("dog\ncat\n");
  });

  it("removes a stale sidecar when saving without labels", () => {
    writeHemb(makeStore([[1, 0]], { labels: ["old"] }), at("x.hemb"));
    writeHemb(makeStore([[0, 1]]), at("x.hemb"));
    expect(fs.existsSync(at("x.labels.txt"))).toBe(false);
    expect(readHemb(at("x.hemb")).labels).toBeNull();
  });

  it("maps sidecar names from the store path", () => {
    expect(labelsPath("a/b.hemb")).toBe(path.join("a", "b.labels.txt"));
    expect(labelsPath("b.bin")).toBe("b.bin.labels.txt");
    expect(labelsPath("plain")).toBe("plain.labels.txt");
  });
});

describe("readHemb", () => {
  function roundTrip(store: HembStore, name: string): HembStore {
    writeHemb(store, at(name));
    return readHemb(at(name));
  }

  it("recovers every field bit for bit", () => {
    const store = makeStore(sampleRows(7, 5), {
      normalized: false,
      temperature: 0.05,
      modality: "synthetic",
      labels: ["a", "b", "c", "d", "e", "f", "g"],
    });
    const loaded = roundTrip(store, "trip.hemb");
    expect([...loaded.matrix]).toEqual([...store.matrix]);
    expect(loaded.dim).toBe(5);
    expect(loaded.count).toBe(7);
    expect(loaded.normalized).toBe(false);
    expect(loaded.temperature).toBe(store.temperature);
    expect(loaded.modality).toBe("synthetic");
    expect(loaded.labels).toEqual(store.labels);
  });

  it("round-trips an empty store with empty labels", () => {
    const loaded = roundTrip(makeStore([], { dim: 9, labels: [] }), "empty.hemb");
    expect(loaded.count).toBe(0);
    expect(loaded.dim).toBe(9);
    expect(loaded.labels).toEqual([]);
  });

  it("resaves byte-identically", () => {
    writeHemb(
      makeStore(sampleRows(4, 3), { normalized: false, labels: ["1", "2", "3", "4"] }),
      at("one.hemb")
    );
    writeHemb(readHemb(at("one.hemb")), at("two.hemb"));
    expect(
      fs.readFileSync(at("two.hemb")).equals(fs.readFileSync(at("one.hemb")))
    ).toBe(true);
    expect(fs.readFileSync(at("two.labels.txt"), "utf8")).toBe(
      fs.readFileSync(at("one.labels.txt"), "utf8")
    );
  });

  function corrupt(name: string, mutate: (blob: Buffer) => Buffer): string {
    writeHemb(makeStore([[0.6, 0.8], [1, 0]]), at("base.hemb"));
    fs.writeFileSync(at(name), mutate(fs.readFileSync(at("base.hemb"))));
    return at(name);
  }

  it("rejects a bad magic", () => {
    const bad = corrupt("magic.hemb", (blob) =>
      Buffer.concat([Buffer.from("NOTMAGIC"), blob.subarray(8)])
    );
    expect(() => readHemb(bad)).toThrow(FormatError);
    expect(() => readHemb(bad)).toThrow(/magic/);
  });

  it("rejects an unknown version", () => {
    const bad = corrupt("version.hemb", (blob) => {
      blob.writeUInt32LE(2, 8);
      return blob;
    });
    expect(() => readHemb(bad)).toThrow(/version 2/);
  });

  it("rejects a file shorter than the header", () => {
    const bad = corrupt("short.hemb", (blob) => blob.subarray(0, 12));
    expect(() => readHemb(bad)).toThrow(CorruptionError);
  });

  it("rejects truncated and padded payloads", () => {
    const truncated = corrupt("trunc.hemb", (blob) => blob.subarray(0, blob.length - 4));
    expect(() => readHemb(truncated)).toThrow(CorruptionError);
    const padded = corrupt("padded.hemb", (blob) =>
      Buffer.concat([blob, Buffer.from([1, 2, 3])])
    );
    expect(() => readHemb(padded)).toThrow(CorruptionError);
  });

  it("rejects unknown modality codes and flags", () => {
    const modality = corrupt("modality.hemb", (blob) => {
      blob.writeUInt8(7, 25);
      return blob;
    });
    expect(() => readHemb(modality)).toThrow(/modality code 7/);
    const flag = corrupt("flag.hemb", (blob) => {
      blob.writeUInt8(3, 24);
      return blob;
    });
    expect(() => readHemb(flag)).toThrow(/normalized flag/);
  });

  it("rejects a zero dimension", () => {
    const bad = corrupt("dim.hemb", (blob) => {
      blob.writeUInt32LE(0, 12);
      blob.writeBigUInt64LE(0n, 16);
      return blob.subarray(0, 30);
    });
    expect(() => readHemb(bad)).toThrow(/dimension/);
  });

  it("rejects non-finite payload entries", () => {
    const bad = corrupt("nan.hemb", (blob) => {
      blob.writeFloatLE(Number.NaN, 30);
      return blob;
    });
    expect(() => readHemb(bad)).toThrow(/NaN/);
  });

  it("rejects a sidecar with the wrong line count", () => {
    writeHemb(makeStore([[1, 0], [0, 1]], { labels: ["a", "b"] }), at("lc.hemb"));
    fs.writeFileSync(at("lc.labels.txt"), "a\nb\nc\n");
    expect(() => readHemb(at("lc.hemb"))).toThrow(/labels/);
  });

  it("rejects a non-unit matrix whose normalized flag was forced on", () => {
    writeHemb(makeStore([[3, 4]], { normalized: false }), at("forced.hemb"));
    const blob = fs.readFileSync(at("forced.hemb"));
    blob.writeUInt8(1, 24);
    fs.writeFileSync(at("forced.hemb"), blob);
    expect(() => readHemb(at("forced.hemb"))).toThrow(/norm/);
  });

  it("reports missing files with the usual system error", () => {
    expect(() => readHemb(at("absent.hemb"))).toThrow(/ENOENT/);
  });
});
