#!/usr/bin/env node
/**
 * Command line for the checkpoint converter.
 *
 * Usage: vggw-export export --src PATH --out PATH [--report PATH]
 *
 * Exit codes: 0 success, 1 usage error, 2 conversion failure.
 */

import * as fs from "node:fs";
import { pathToFileURL } from "node:url";

import { exportWeights, formatReport } from "./export.js";

const USAGE =
  "usage: vggw-export export --src PATH --out PATH [--report PATH]";

function parseArgs(argv: string[]): {
  src: string;
  out: string;
  report?: string;
} {
  if (argv[0] !== "export") {
    throw new UsageError(
      argv.length === 0 ? "missing command" : `unknown command: ${argv[0]}`,
    );
  }
  const values: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    if (flag !== "--src" && flag !== "--out" && flag !== "--report") {
      throw new UsageError(`unknown flag: ${flag}`);
    }
    const value = argv[i + 1];
    if (value === undefined) {
      throw new UsageError(`${flag} needs a value`);
    }
    values[flag.slice(2)] = value;
  }
  for (const required of ["src", "out"]) {
    if (!(required in values)) {
      throw new UsageError(`--${required} is required`);
    }
  }
  return { src: values.src, out: values.out, report: values.report };
}

class UsageError extends Error {}

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`${err.message}\n${USAGE}`);
      return 1;
    }
    throw err;
  }
  try {
    const report = exportWeights(args.src, args.out);
    console.log(formatReport(report));
    if (args.report) {
      fs.writeFileSync(args.report, JSON.stringify(report, null, 2) + "\n");
    }
    return 0;
  } catch (err) {
    console.error(`export failed: ${(err as Error).message}`);
    return 2;
  }
}

if (process.argv[1] &&
    import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
