/**
 * Declarative chart-spec -> inline SVG string.
 *
 * Pure string generation (no DOM), so the same code renders in the browser
 * via innerHTML and under plain node in tests. Supports the four marks, an
 * optional color series with a legend, and axis labels taken from the
 * encoding (the y label shows `AGG(field)` for aggregated charts).
 */

import type { ChartSpec, SpecDataRow } from "./types.js";

const W = 420;
const H = 260;
const MARGIN = { top: 16, right: 12, bottom: 48, left: 56 };
const PALETTE = ["#3366cc", "#dc3912", "#ff9900", "#109618", "#990099",
  "#0099c6", "#dd4477", "#66aa00", "#b82e2e", "#316395"];

function esc(s: unknown): string {
  return String(s).replace(/&/g, "&amp;").replace(/</g, "&lt;")
    .replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function yAxisLabel(spec: ChartSpec): string {
  const y = spec.encoding.y;
  return y.aggregate === "NONE" ? y.field : `${y.aggregate}(${y.field})`;
}

export function xAxisLabel(spec: ChartSpec): string {
  return spec.encoding.x.field;
}

interface Extent { lo: number; hi: number; }

function yExtent(rows: SpecDataRow[]): Extent {
  let lo = Math.min(0, ...rows.map((r) => r.y));
  let hi = Math.max(0, ...rows.map((r) => r.y));
  if (lo === hi) hi = lo + 1;
  return { lo, hi };
}

function plotArea() {
  return {
    x0: MARGIN.left,
    y0: MARGIN.top,
    w: W - MARGIN.left - MARGIN.right,
    h: H - MARGIN.top - MARGIN.bottom,
  };
}

function yScale(ext: Extent) {
  const { y0, h } = plotArea();
  return (v: number) => y0 + h - ((v - ext.lo) / (ext.hi - ext.lo)) * h;
}

function numericX(rows: SpecDataRow[]): number[] | null {
  const vals = rows.map((r) => (typeof r.x === "number" ? r.x : Number.NaN));
  return vals.every((v) => Number.isFinite(v)) ? vals : null;
}

function axisBlock(spec: ChartSpec): string {
  const { x0, y0, w, h } = plotArea();
  return [
    `<line class="axis" x1="${x0}" y1="${y0 + h}" x2="${x0 + w}" y2="${y0 + h}"/>`,
    `<line class="axis" x1="${x0}" y1="${y0}" x2="${x0}" y2="${y0 + h}"/>`,
    `<text class="x-label" x="${x0 + w / 2}" y="${H - 8}" text-anchor="middle">` +
      `${esc(xAxisLabel(spec))}</text>`,
    `<text class="y-label" transform="rotate(-90)" x="${-(y0 + h / 2)}" y="14" ` +
      `text-anchor="middle">${esc(yAxisLabel(spec))}</text>`,
  ].join("");
}

function legendBlock(series: string[]): string {
  const items = series.map((name, i) => {
    const y = MARGIN.top + 14 * i;
    const color = PALETTE[i % PALETTE.length];
    return `<g class="legend-item"><rect x="${W - 96}" y="${y}" width="10" height="10" ` +
      `fill="${color}"/><text x="${W - 82}" y="${y + 9}">${esc(name)}</text></g>`;
  });
  return items.join("");
}

function seriesOf(spec: ChartSpec): Map<string, SpecDataRow[]> {
  const out = new Map<string, SpecDataRow[]>();
  if (spec.encoding.color) {
    for (const row of spec.data) {
      const key = row.c ?? "";
      const bucket = out.get(key) ?? [];
      bucket.push(row);
      out.set(key, bucket);
    }
  } else {
    out.set("", spec.data);
  }
  return out;
}

function renderBars(spec: ChartSpec): string {
  const { x0, y0, w, h } = plotArea();
  const series = seriesOf(spec);
  const categories = [...new Set(spec.data.map((r) => String(r.x)))];
  const ext = yExtent(spec.data);
  const sy = yScale(ext);
  const band = w / Math.max(1, categories.length);
  const nSeries = series.size;
  const barW = (band * 0.8) / nSeries;
  const parts: string[] = [];
  let si = 0;
  for (const [name, rows] of series) {
    const color = PALETTE[si % PALETTE.length];
    for (const row of rows) {
      const ci = categories.indexOf(String(row.x));
      const bx = x0 + ci * band + band * 0.1 + si * barW;
      const top = Math.min(sy(row.y), sy(0));
      const bh = Math.abs(sy(row.y) - sy(0));
      parts.push(`<rect class="bar" x="${bx.toFixed(1)}" y="${top.toFixed(1)}" ` +
        `width="${barW.toFixed(1)}" height="${bh.toFixed(1)}" fill="${color}">` +
        `<title>${esc(row.x)}: ${row.y}</title></rect>`);
    }
    si += 1;
  }
  const ticks = categories.map((c, i) =>
    `<text class="tick" x="${(x0 + i * band + band / 2).toFixed(1)}" ` +
    `y="${y0 + h + 14}" text-anchor="middle">${esc(trimLabel(c))}</text>`);
  return parts.join("") + ticks.join("");
}

function trimLabel(s: string): string {
  return s.length > 9 ? `${s.slice(0, 8)}…` : s;
}

function pointsXY(rows: SpecDataRow[], allRows: SpecDataRow[]): Array<[number, number]> {
  const { x0, w } = plotArea();
  const ext = yExtent(allRows);
  const sy = yScale(ext);
  const nums = numericX(allRows);
  if (nums !== null) {
    let lo = Math.min(...nums);
    let hi = Math.max(...nums);
    if (lo === hi) hi = lo + 1;
    return rows.map((r) => {
      const xv = typeof r.x === "number" ? r.x : lo;
      return [x0 + ((xv - lo) / (hi - lo)) * w, sy(r.y)];
    });
  }
  const categories = [...new Set(allRows.map((r) => String(r.x)))];
  const band = w / Math.max(1, categories.length);
  return rows.map((r) => [
    x0 + categories.indexOf(String(r.x)) * band + band / 2,
    sy(r.y),
  ]);
}

function renderLine(spec: ChartSpec): string {
  const parts: string[] = [];
  let si = 0;
  for (const [, rows] of seriesOf(spec)) {
    const pts = pointsXY(rows, spec.data)
      .map(([px, py]) => `${px.toFixed(1)},${py.toFixed(1)}`).join(" ");
    parts.push(`<polyline class="line" points="${pts}" fill="none" ` +
      `stroke="${PALETTE[si % PALETTE.length]}" stroke-width="2"/>`);
    si += 1;
  }
  return parts.join("");
}

function renderScatter(spec: ChartSpec): string {
  const parts: string[] = [];
  let si = 0;
  for (const [, rows] of seriesOf(spec)) {
    const color = PALETTE[si % PALETTE.length];
    for (const [px, py] of pointsXY(rows, spec.data)) {
      parts.push(`<circle class="dot" cx="${px.toFixed(1)}" cy="${py.toFixed(1)}" ` +
        `r="3" fill="${color}" fill-opacity="0.75"/>`);
    }
    si += 1;
  }
  return parts.join("");
}

function renderPie(spec: ChartSpec): string {
  const cx = W / 2;
  const cy = (H - 20) / 2;
  const r = Math.min(W, H) / 2 - 48;
  const total = spec.data.reduce((acc, row) => acc + row.y, 0);
  if (total <= 0) {
    return `<text x="${cx}" y="${cy}" text-anchor="middle">empty pie</text>`;
  }
  let angle = -Math.PI / 2;
  const parts: string[] = [];
  spec.data.forEach((row, i) => {
    const frac = row.y / total;
    const a2 = angle + frac * 2 * Math.PI;
    const large = frac > 0.5 ? 1 : 0;
    const p1 = [cx + r * Math.cos(angle), cy + r * Math.sin(angle)];
    const p2 = [cx + r * Math.cos(a2), cy + r * Math.sin(a2)];
    parts.push(`<path class="slice" d="M${cx},${cy} L${p1[0].toFixed(1)},${p1[1].toFixed(1)} ` +
      `A${r},${r} 0 ${large} 1 ${p2[0].toFixed(1)},${p2[1].toFixed(1)} Z" ` +
      `fill="${PALETTE[i % PALETTE.length]}"><title>${esc(row.x)}: ` +
      `${(frac * 100).toFixed(1)}%</title></path>`);
    angle = a2;
  });
  const legend = spec.data.map((row, i) => {
    const y = MARGIN.top + 14 * i;
    return `<g class="legend-item"><rect x="${W - 96}" y="${y}" width="10" height="10" ` +
      `fill="${PALETTE[i % PALETTE.length]}"/><text x="${W - 82}" y="${y + 9}">` +
      `${esc(trimLabel(String(row.x)))}</text></g>`;
  }).join("");
  return parts.join("") + legend +
    `<text class="y-label" x="${cx}" y="${H - 8}" text-anchor="middle">` +
    `${esc(yAxisLabel(spec))} by ${esc(xAxisLabel(spec))}</text>`;
}

/** Render a chart-spec document to a standalone SVG string. */
export function renderChart(spec: ChartSpec): string {
  let body: string;
  if (spec.mark === "pie") {
    body = renderPie(spec);
  } else {
    const marks = spec.mark === "bar" ? renderBars(spec)
      : spec.mark === "line" ? renderLine(spec)
      : renderScatter(spec);
    const legend = spec.encoding.color
      ? legendBlock([...seriesOf(spec).keys()])
      : "";
    body = axisBlock(spec) + marks + legend;
  }
  return `<svg class="chart chart-${spec.mark}" viewBox="0 0 ${W} ${H}" ` +
    `xmlns="http://www.w3.org/2000/svg" role="img">${body}</svg>`;
}

/** Rows for the "view underlying data" table. */
export function dataTableRows(spec: ChartSpec): Array<[string, string, string]> {
  return spec.data.map((row) => [
    String(row.x),
    String(row.y),
    row.c !== undefined ? String(row.c) : "",
  ]);
}
