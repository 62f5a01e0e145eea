#!/usr/bin/env node
/**
 * Batch figure renderer for simulator run directories.
 *
 * Usage:
 *   node dist/cli.js all        --dir <run dir> --out <figure dir>
 *   node dist/cli.js entropy    --dir <run dir> --out <figure dir>
 *   node dist/cli.js snapshots  --dir <run dir> --out <figure dir>
 *   node dist/cli.js moments    --dir <run dir> --out <figure dir>
 *   node dist/cli.js eps-study  --dir <run dir> --out <figure dir>
 *
 * Reads only files listed in the directory's run_manifest.json (verifying
 * checksums) and writes SVG figures plus JSON sidecars with axis ranges and
 * series checksums. Exit codes: 0 ok, 2 bad arguments or unreadable run.
 */

import { parseArgs } from "node:util";

import { FigureKind, renderAll, renderKind } from "./render";

const KINDS = new Set(["all", "entropy", "snapshots", "moments", "eps-study"]);

export function main(argv: string[]): number {
  const command = argv[0];
  if (!command || !KINDS.has(command)) {
    console.error(`usage: cli.js <all|entropy|snapshots|moments|eps-study> --dir D --out O`);
    return 2;
  }
  let values: { dir?: string; out?: string };
  try {
    ({ values } = parseArgs({
      args: argv.slice(1),
      options: { dir: { type: "string" }, out: { type: "string" } },
    }));
  } catch (err) {
    console.error(String(err));
    return 2;
  }
  if (!values.dir || !values.out) {
    console.error("both --dir and --out are required");
    return 2;
  }
  try {
    const written =
      command === "all"
        ? renderAll(values.dir, values.out)
        : renderKind(values.dir, command as FigureKind, values.out);
    for (const p of written) {
      console.log(p);
    }
    return 0;
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
