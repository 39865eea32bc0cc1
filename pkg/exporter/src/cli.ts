#!/usr/bin/env node
/**
 * Command line front end.
 *
 *     clip-export export-text   --model <id> --input lines.txt --out x.hemb
 *     clip-export export-images --model <id> --dir imgs/ --out y.hemb
 *
 * `--model hash:<dim>` selects the checkpoint-free hash encoder; anything
 * else is loaded through the optional `@xenova/transformers` dependency.
 * Exit codes: 0 success, 1 I/O failure, 2 anything the exporter rejects.
 */

import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";

import { exportImages, exportText } from "./exporter.js";
import { HembError } from "./hemb.js";

export const VERSION = "0.1.0";

const USAGE = `usage: clip-export <command> [options]

commands:
  export-text    --model <id> --input <file> --out <path> [--batch <n>]
  export-images  --model <id> --dir <path>   --out <path> [--batch <n>]

options:
  --model   encoder id: hash:<dim> for the checkpoint-free encoder,
            anything else loads a CLIP checkpoint (set CLIP_MODEL_DIR
            to resolve checkpoints from a local directory)
  --batch   inference batch size (default 32)
  --version print the version and exit
`;

interface ParsedFlags {
  model?: string;
  input?: string;
  dir?: string;
  out?: string;
  batch?: string;
}

function require_(flags: ParsedFlags, key: keyof ParsedFlags): string {
  const value = flags[key];
  if (value === undefined) {
    throw new HembError(`--${key} is required`);
  }
  return value;
}

function parseBatch(flags: ParsedFlags): number {
  if (flags.batch === undefined) return 32;
  const batch = Number(flags.batch);
  if (!Number.isInteger(batch)) {
    throw new HembError(`--batch must be an integer, got ${flags.batch}`);
  }
  return batch;
}

export async function main(argv: readonly string[]): Promise<number> {
  if (argv.includes("--version")) {
    process.stdout.write(`clip-export ${VERSION}\n`);
    return 0;
  }
  const [command, ...rest] = argv;
  if (command === undefined || command === "--help" || command === "-h") {
    process.stderr.write(USAGE);
    return command === undefined ? 2 : 0;
  }

  try {
    let flags: ParsedFlags;
    try {
      flags = parseArgs({
        args: [...rest],
        options: {
          model: { type: "string" },
          input: { type: "string" },
          dir: { type: "string" },
          out: { type: "string" },
          batch: { type: "string" },
        },
        strict: true,
        allowPositionals: false,
      }).values;
    } catch (error) {
      throw new HembError((error as Error).message);
    }

    if (command === "export-text") {
      const result = await exportText({
        modelId: require_(flags, "model"),
        input: require_(flags, "input"),
        modality: "text",
        batch: parseBatch(flags),
        out: require_(flags, "out"),
      });
      if (result.truncated > 0) {
        process.stderr.write(`warning: ${result.truncated} lines were truncated\n`);
      }
      process.stdout.write(`${result.out}: ${result.rows} rows, dim ${result.dim}\n`);
      return 0;
    }
    if (command === "export-images") {
      const result = await exportImages({
        modelId: require_(flags, "model"),
        input: require_(flags, "dir"),
        modality: "image",
        batch: parseBatch(flags),
        out: require_(flags, "out"),
      });
      for (const skip of result.skipped) {
        process.stderr.write(`warning: skipped ${skip.path}: ${skip.reason}\n`);
      }
      process.stdout.write(`${result.out}: ${result.rows} rows, dim ${result.dim}\n`);
      return 0;
    }
    throw new HembError(`unknown command ${command}`);
  } catch (error) {
    if (error instanceof HembError) {
      process.stderr.write(`error: ${error.message}\n`);
      return 2;
    }
    if (typeof (error as NodeJS.ErrnoException).code === "string") {
      process.stderr.write(`error: ${(error as Error).message}\n`);
      return 1;
    }
    throw error;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
