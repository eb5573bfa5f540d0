#!/usr/bin/env node
/**
 * figures --summary <summary.csv> --out <dir> [--methods a,b,...] [--level 0.95]
 *
 * Renders one four-panel SVG (bias, coverage, empirical SE, model-based SE
 * against the true first coefficient) per design size p found in the summary.
 * Output files: <dir>/panels_p<P>.svg
 */

import { mkdirSync, readFileSync, writeFileSync } from "fs";
import { join } from "path";

import { parseSummary, SchemaError, SummaryRow } from "./csv";
import { renderPanels } from "./render";

interface CliArgs {
  summary: string;
  out: string;
  methods: string[] | null;
  level: number;
}

function parseArgs(argv: string[]): CliArgs {
  const args: CliArgs = { summary: "", out: "", methods: null, level: 0.95 };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`missing value for ${a}`);
      return argv[++i];
    };
    if (a === "--summary") args.summary = next();
    else if (a === "--out") args.out = next();
    else if (a === "--methods") args.methods = next().split(",").filter((s) => s.length > 0);
    else if (a === "--level") args.level = Number(next());
    else throw new Error(`unknown argument ${a}`);
  }
  if (!args.summary || !args.out) {
    throw new Error("usage: figures --summary <summary.csv> --out <dir> [--methods a,b] [--level 0.95]");
  }
  if (!(args.level > 0 && args.level < 1)) {
    throw new Error("--level must lie strictly between 0 and 1");
  }
  return args;
}

export function run(args: CliArgs): string[] {
  const rows = parseSummary(readFileSync(args.summary, "utf-8"));
  const byP = new Map<number, SummaryRow[]>();
  for (const row of rows) {
    const bucket = byP.get(row.p) ?? [];
    bucket.push(row);
    byP.set(row.p, bucket);
  }
  mkdirSync(args.out, { recursive: true });
  const written: string[] = [];
  for (const [p, group] of [...byP.entries()].sort((a, b) => a[0] - b[0])) {
    const methods = args.methods ?? [...new Set(group.map((r) => r.method))];
    const svg = renderPanels(group, { methods, nominalLevel: args.level });
    const path = join(args.out, `panels_p${p}.svg`);
    writeFileSync(path, svg);
    written.push(path);
  }
  return written;
}

function main(): number {
  try {
    const written = run(parseArgs(process.argv.slice(2)));
    for (const path of written) {
      process.stdout.write(path + "\n");
    }
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`schema error: ${(err as Error).message}\n`);
      return 2;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main());
}
