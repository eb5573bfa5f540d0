/**
 * SVG rendering of the four-panel comparison figure: bias, coverage
 * probability, empirical standard error, and model-based standard error,
 * each against the true first coefficient, one line per estimator.
 *
 * Rendering is read-only over the parsed summary rows; nothing is recomputed.
 */

import { SchemaError, SummaryRow } from "./csv";

export interface PanelSpec {
  methods: string[];
  nominalLevel: number; // horizontal reference drawn in the coverage panel
  width?: number;
  height?: number;
}

const METHOD_COLORS: Record<string, string> = {
  ref_ds: "#d62728",
  orig_ds: "#1f77b4",
  mle: "#2ca02c",
  oracle: "#7f7f7f",
};
const FALLBACK_COLORS = ["#9467bd", "#8c564b", "#e377c2", "#bcbd22"];

const PANELS: Array<{ key: "bias" | "coverage" | "empiricalSe" | "modelSe"; title: string }> = [
  { key: "bias", title: "Bias" },
  { key: "coverage", title: "Coverage probability" },
  { key: "empiricalSe", title: "Empirical SE" },
  { key: "modelSe", title: "Model-based SE" },
];

interface Series {
  method: string;
  color: string;
  points: Array<{ x: number; y: number }>;
}

function colorFor(method: string, i: number): string {
  return METHOD_COLORS[method] ?? FALLBACK_COLORS[i % FALLBACK_COLORS.length];
}

function fmtTick(v: number): string {
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1000 || a < 0.01)) return v.toExponential(1);
  return String(Math.round(v * 1000) / 1000);
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (span / count) / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const start = Math.ceil(lo / s) * s;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += s) ticks.push(Math.round(v / s) * s);
  return ticks;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Render one multi-panel SVG for a single design size p. */
export function renderPanels(rows: SummaryRow[], spec: PanelSpec): string {
  if (rows.length === 0) {
    throw new SchemaError("no summary rows to plot");
  }
  const present = new Set(rows.map((r) => r.method));
  for (const m of spec.methods) {
    if (!present.has(m)) {
      throw new SchemaError(`requested method '${m}' not present in the summary`);
    }
  }

  const width = spec.width ?? 1180;
  const height = spec.height ?? 330;
  const margin = { left: 58, right: 14, top: 34, bottom: 42 };
  const panelW = Math.floor(width / PANELS.length);
  const plotW = panelW - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height + 30}" ` +
      `viewBox="0 0 ${width} ${height + 30}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height + 30}" fill="white"/>`);

  PANELS.forEach((panel, pi) => {
    const x0 = pi * panelW + margin.left;
    const y0 = margin.top;

    const series: Series[] = spec.methods.map((method, mi) => {
      const pts = rows
        .filter((r) => r.method === method && r[panel.key] !== null)
        .map((r) => ({ x: r.beta1True, y: r[panel.key] as number }))
        .sort((a, b) => a.x - b.x);
      return { method, color: colorFor(method, mi), points: pts };
    });

    const xs = series.flatMap((s) => s.points.map((p) => p.x));
    const ys = series.flatMap((s) => s.points.map((p) => p.y));
    if (panel.key === "coverage") {
      ys.push(spec.nominalLevel, 1.0);
    }
    let xLo = Math.min(...xs);
    let xHi = Math.max(...xs);
    let yLo = Math.min(...ys);
    let yHi = Math.max(...ys);
    if (xLo === xHi) {
      xLo -= 0.5;
      xHi += 0.5;
    }
    if (yLo === yHi) {
      yLo -= 0.5;
      yHi += 0.5;
    }
    const yPad = 0.06 * (yHi - yLo);
    yLo -= yPad;
    yHi += yPad;

    const sx = (x: number) => x0 + ((x - xLo) / (xHi - xLo)) * plotW;
    const sy = (y: number) => y0 + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

    parts.push(`<rect x="${x0}" y="${y0}" width="${plotW}" height="${plotH}" fill="none" stroke="#333"/>`);
    parts.push(
      `<text x="${x0 + plotW / 2}" y="${y0 - 12}" text-anchor="middle" font-size="15">${esc(panel.title)}</text>`,
    );

    for (const t of niceTicks(yLo, yHi)) {
      const y = sy(t);
      parts.push(`<line x1="${x0 - 4}" y1="${y}" x2="${x0}" y2="${y}" stroke="#333"/>`);
      parts.push(
        `<text x="${x0 - 7}" y="${y + 4}" text-anchor="end" font-size="11">${fmtTick(t)}</text>`,
      );
    }
    for (const t of niceTicks(xLo, xHi, 4)) {
      const x = sx(t);
      parts.push(`<line x1="${x}" y1="${y0 + plotH}" x2="${x}" y2="${y0 + plotH + 4}" stroke="#333"/>`);
      parts.push(
        `<text x="${x}" y="${y0 + plotH + 17}" text-anchor="middle" font-size="11">${fmtTick(t)}</text>`,
      );
    }
    parts.push(
      `<text x="${x0 + plotW / 2}" y="${y0 + plotH + 34}" text-anchor="middle" font-size="13">true coefficient</text>`,
    );

    if (panel.key === "coverage") {
      const y = sy(spec.nominalLevel);
      parts.push(
        `<line class="nominal-level" x1="${x0}" y1="${y}" x2="${x0 + plotW}" y2="${y}" ` +
          `stroke="#555" stroke-dasharray="6 4"/>`,
      );
    }
    if (panel.key === "bias" && yLo < 0 && yHi > 0) {
      const y = sy(0);
      parts.push(
        `<line x1="${x0}" y1="${y}" x2="${x0 + plotW}" y2="${y}" stroke="#bbb" stroke-dasharray="2 3"/>`,
      );
    }

    for (const s of series) {
      if (s.points.length === 0) continue;
      const d = s.points.map((p, i) => `${i === 0 ? "M" : "L"}${sx(p.x).toFixed(2)} ${sy(p.y).toFixed(2)}`).join(" ");
      if (s.points.length > 1) {
        parts.push(`<path d="${d}" fill="none" stroke="${s.color}" stroke-width="1.8"/>`);
      }
      for (const p of s.points) {
        parts.push(`<circle cx="${sx(p.x).toFixed(2)}" cy="${sy(p.y).toFixed(2)}" r="3" fill="${s.color}"/>`);
      }
    }
  });

  // legend strip along the bottom
  let lx = margin.left;
  const ly = height + 12;
  spec.methods.forEach((method, mi) => {
    const color = colorFor(method, mi);
    parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 26}" y2="${ly}" stroke="${color}" stroke-width="2.2"/>`);
    parts.push(`<circle cx="${lx + 13}" cy="${ly}" r="3" fill="${color}"/>`);
    parts.push(
      `<text class="legend-label" x="${lx + 32}" y="${ly + 4}" font-size="13">${esc(method)}</text>`,
    );
    lx += 32 + 9 * method.length + 28;
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
