/** Hand-rolled deterministic SVG: line plots, heat strips, and text tables.
 *  No timestamps, no randomness; identical inputs give identical bytes. */

export const WIDTH = 720;
export const HEIGHT = 420;
const MARGIN = { left: 70, right: 20, top: 36, bottom: 46 };

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

export interface Series {
  label: string;
  x: number[];
  y: number[];
}

export interface Range {
  min: number;
  max: number;
}

export function rangeOf(values: number[]): Range {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (!Number.isFinite(min)) {
    throw new Error("empty series has no range");
  }
  return { min, max };
}

function fmt(v: number): string {
  return Number(v.toPrecision(6)).toString();
}

function scale(r: Range, lo: number, hi: number): (v: number) => number {
  const span = r.max - r.min || 1;
  return (v) => lo + ((v - r.min) / span) * (hi - lo);
}

export function linePlot(
  title: string,
  xLabel: string,
  yLabel: string,
  series: Series[],
  opts: { logX?: boolean; logY?: boolean } = {},
): string {
  if (series.length === 0 || series.every((s) => s.x.length === 0)) {
    throw new Error(`no data for figure ${title}`);
  }
  const tx = (v: number) => (opts.logX ? Math.log10(v) : v);
  const ty = (v: number) => (opts.logY ? Math.log10(v) : v);
  const xr = rangeOf(series.flatMap((s) => s.x.map(tx)));
  const yr = rangeOf(series.flatMap((s) => s.y.map(ty)));
  const sx = scale(xr, MARGIN.left, WIDTH - MARGIN.right);
  const sy = scale(yr, HEIGHT - MARGIN.bottom, MARGIN.top);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`,
    `<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-family="monospace" font-size="15">${title}</text>`,
  );
  // axes
  parts.push(
    `<line x1="${MARGIN.left}" y1="${HEIGHT - MARGIN.bottom}" x2="${WIDTH - MARGIN.right}" y2="${HEIGHT - MARGIN.bottom}" stroke="#000"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${HEIGHT - MARGIN.bottom}" stroke="#000"/>`,
    `<text x="${WIDTH / 2}" y="${HEIGHT - 10}" text-anchor="middle" font-family="monospace" font-size="12">${xLabel}</text>`,
    `<text x="16" y="${HEIGHT / 2}" text-anchor="middle" font-family="monospace" font-size="12" transform="rotate(-90 16 ${HEIGHT / 2})">${yLabel}</text>`,
  );
  // tick labels at the range ends
  parts.push(
    `<text x="${MARGIN.left}" y="${HEIGHT - MARGIN.bottom + 16}" font-family="monospace" font-size="10">${fmt(xr.min)}</text>`,
    `<text x="${WIDTH - MARGIN.right}" y="${HEIGHT - MARGIN.bottom + 16}" text-anchor="end" font-family="monospace" font-size="10">${fmt(xr.max)}</text>`,
    `<text x="${MARGIN.left - 4}" y="${HEIGHT - MARGIN.bottom}" text-anchor="end" font-family="monospace" font-size="10">${fmt(yr.min)}</text>`,
    `<text x="${MARGIN.left - 4}" y="${MARGIN.top + 4}" text-anchor="end" font-family="monospace" font-size="10">${fmt(yr.max)}</text>`,
  );
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const points = s.x
      .map((xv, k) => `${fmt(sx(tx(xv)))},${fmt(sy(ty(s.y[k])))}`)
      .join(" ");
    parts.push(`<polyline fill="none" stroke="${color}" stroke-width="1.5" points="${points}"/>`);
    parts.push(
      `<text x="${WIDTH - MARGIN.right - 6}" y="${MARGIN.top + 14 + 14 * i}" text-anchor="end" font-family="monospace" font-size="11" fill="${color}">${s.label}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

/** Grayscale value strip for a 1D profile or row-major 2D field. */
export function heatPanel(
  x0: number,
  y0: number,
  w: number,
  h: number,
  shape: number[],
  values: Float64Array,
  r: Range,
): string {
  const ny = shape.length === 2 ? shape[0] : 1;
  const nx = shape.length === 2 ? shape[1] : shape[0];
  const span = r.max - r.min || 1;
  const cells: string[] = [];
  const cw = w / nx;
  const ch = h / ny;
  for (let y = 0; y < ny; y += 1) {
    for (let x = 0; x < nx; x += 1) {
      const v = (values[y * nx + x] - r.min) / span;
      const level = Math.round(255 * Math.min(1, Math.max(0, v)));
      cells.push(
        `<rect x="${fmt(x0 + x * cw)}" y="${fmt(y0 + (ny - 1 - y) * ch)}" width="${fmt(cw + 0.5)}" height="${fmt(ch + 0.5)}" fill="rgb(${level},${level},${255 - level})"/>`,
      );
    }
  }
  return cells.join("\n");
}

export function textTable(title: string, header: string[], rows: string[][]): string {
  const rowH = 22;
  const colW = Math.max(120, Math.floor((WIDTH - 40) / header.length));
  const height = 70 + rowH * (rows.length + 1);
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${height}" viewBox="0 0 ${WIDTH} ${height}">`,
    `<rect width="${WIDTH}" height="${height}" fill="#ffffff"/>`,
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-family="monospace" font-size="15">${title}</text>`,
  );
  const cell = (text: string, cx: number, cy: number, bold: boolean) =>
    `<text x="${cx}" y="${cy}" font-family="monospace" font-size="11"${bold ? ' font-weight="bold"' : ""}>${text}</text>`;
  header.forEach((name, j) => parts.push(cell(name, 24 + j * colW, 52, true)));
  rows.forEach((row, i) => {
    row.forEach((value, j) => parts.push(cell(value, 24 + j * colW, 52 + rowH * (i + 1), false)));
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
