/**
 * Reader for the simulation summary CSV.
 *
 * Expected header (fixed, produced by the simulation CLI):
 *   method,beta1_true,n,p,bias,coverage,empirical_se,model_se,divergence_rate,replications_used
 *
 * Cells may be empty when a (method, beta1) group had no usable replications;
 * such rows are kept with null metrics so callers can skip them.
 */

export interface SummaryRow {
  method: string;
  beta1True: number;
  n: number;
  p: number;
  bias: number | null;
  coverage: number | null;
  empiricalSe: number | null;
  modelSe: number | null;
  divergenceRate: number;
  replicationsUsed: number;
}

export const REQUIRED_COLUMNS = [
  "method",
  "beta1_true",
  "n",
  "p",
  "bias",
  "coverage",
  "empirical_se",
  "model_se",
  "divergence_rate",
  "replications_used",
] as const;

export class SchemaError extends Error {}

function parseOptional(cell: string, where: string): number | null {
  if (cell === "") return null;
  const v = Number(cell);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`non-numeric value ${JSON.stringify(cell)} in ${where}`);
  }
  return v;
}

function parseRequired(cell: string, where: string): number {
  const v = parseOptional(cell, where);
  if (v === null) {
    throw new SchemaError(`missing value in ${where}`);
  }
  return v;
}

/** Parse summary.csv text; throws SchemaError naming any missing column. */
export function parseSummary(text: string): SummaryRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("summary is empty");
  }
  const header = lines[0].split(",");
  const index = new Map<string, number>();
  header.forEach((name, i) => index.set(name, i));
  for (const col of REQUIRED_COLUMNS) {
    if (!index.has(col)) {
      throw new SchemaError(`summary is missing required column '${col}'`);
    }
  }
  const col = (row: string[], name: string) => row[index.get(name)!] ?? "";

  const rows: SummaryRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length < header.length) {
      throw new SchemaError(`row ${i + 1} has ${parts.length} fields; expected ${header.length}`);
    }
    const where = `row ${i + 1}`;
    rows.push({
      method: col(parts, "method"),
      beta1True: parseRequired(col(parts, "beta1_true"), where),
      n: parseRequired(col(parts, "n"), where),
      p: parseRequired(col(parts, "p"), where),
      bias: parseOptional(col(parts, "bias"), where),
      coverage: parseOptional(col(parts, "coverage"), where),
      empiricalSe: parseOptional(col(parts, "empirical_se"), where),
      modelSe: parseOptional(col(parts, "model_se"), where),
      divergenceRate: parseRequired(col(parts, "divergence_rate"), where),
      replicationsUsed: parseRequired(col(parts, "replications_used"), where),
    });
  }
  return rows;
}
