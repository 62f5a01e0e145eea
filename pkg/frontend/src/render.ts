import * as fs from "fs";
import * as path from "path";

import { column, parseCsv } from "./csv";
import { ReportBundle, seriesChecksum, sha256Hex } from "./manifest";
import { listDensitySnapshots, readSnapshot } from "./snapshots";
import { heatPanel, linePlot, rangeOf, textTable, Series, WIDTH } from "./svg";

export interface Figure {
  name: string;
  caption: string;
  svg: string;
  sidecar: Record<string, unknown>;
}

function sortKeysDeep(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(sortKeysDeep);
  }
  if (value !== null && typeof value === "object") {
    const src = value as Record<string, unknown>;
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(src).sort()) {
      out[key] = sortKeysDeep(src[key]);
    }
    return out;
  }
  return value;
}

function writeFigure(outDir: string, fig: Figure): string[] {
  fs.mkdirSync(outDir, { recursive: true });
  const svgPath = path.join(outDir, `${fig.name}.svg`);
  const sidecarPath = path.join(outDir, `${fig.name}.json`);
  fs.writeFileSync(svgPath, fig.svg);
  fs.writeFileSync(sidecarPath, JSON.stringify(sortKeysDeep(fig.sidecar), null, 1) + "\n");
  return [svgPath, sidecarPath];
}

function axisRange(values: number[]): [number, number] {
  const r = rangeOf(values);
  return [r.min, r.max];
}

function nonincreasing(values: number[]): boolean {
  for (let i = 1; i < values.length; i += 1) {
    if (values[i] > values[i - 1] + 1e-10 * (1 + Math.abs(values[i - 1]))) {
      return false;
    }
  }
  return true;
}

/** Entropy and dissipation curves from timeseries.csv. */
export function renderEntropy(bundle: ReportBundle): Figure {
  const table = parseCsv(bundle.readText("timeseries.csv"));
  const t = column(table, "t");
  const H = column(table, "H");
  const D = column(table, "dissipation");
  if (t.values.length === 0) {
    throw new Error("timeseries has no rows");
  }
  const series: Series[] = [
    { label: "entropy H", x: t.values, y: H.values },
    { label: "dissipation", x: t.values, y: D.values },
  ];
  return {
    name: "entropy",
    caption: "Regularized entropy and facewise dissipation along the path",
    svg: linePlot("entropy and dissipation", "t", "value", series),
    sidecar: {
      figure: "entropy",
      t_range: axisRange(t.values),
      entropy_range: axisRange(H.values),
      dissipation_range: axisRange(D.values),
      entropy_nonincreasing: nonincreasing(H.values),
      entropy_first: H.values[0],
      entropy_last: H.values[H.values.length - 1],
      series_checksums: {
        t: seriesChecksum(t.raw),
        H: seriesChecksum(H.raw),
        dissipation: seriesChecksum(D.raw),
      },
      rows: t.values.length,
    },
  };
}

/** Panel grid of density snapshots (one row per snapshot, one panel per species). */
export function renderSnapshots(bundle: ReportBundle): Figure {
  const names = listDensitySnapshots(bundle);
  if (names.length === 0) {
    throw new Error("run directory has no density snapshots");
  }
  const snaps = names.map((name) => readSnapshot(bundle, name));
  const species = snaps[0].species;
  const all = snaps.flatMap((s) => s.values.map((v) => Array.from(v))).flat();
  const r = rangeOf(all);

  const panelW = Math.floor((WIDTH - 40) / species) - 10;
  const panelH = 46;
  const height = 60 + snaps.length * (panelH + 18);
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${height}" viewBox="0 0 ${WIDTH} ${height}">`,
    `<rect width="${WIDTH}" height="${height}" fill="#ffffff"/>`,
    `<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-family="monospace" font-size="15">density snapshots (value range ${r.min.toPrecision(4)}..${r.max.toPrecision(4)})</text>`,
  );
  snaps.forEach((snap, row) => {
    const y0 = 42 + row * (panelH + 18);
    parts.push(
      `<text x="20" y="${y0 + panelH + 13}" font-family="monospace" font-size="10">t=${snap.t.toPrecision(4)}</text>`,
    );
    for (let i = 0; i < species; i += 1) {
      const x0 = 30 + i * (panelW + 10);
      parts.push(heatPanel(x0, y0, panelW, panelH, snap.shape, snap.values[i], r));
      parts.push(
        `<rect x="${x0}" y="${y0}" width="${panelW}" height="${panelH}" fill="none" stroke="#333" stroke-width="0.6"/>`,
      );
    }
  });
  parts.push("</svg>");

  const payloadChecksums: Record<string, string> = {};
  for (const snap of snaps) {
    const header = JSON.parse(bundle.readText(snap.headerName)) as { payload: string };
    payloadChecksums[snap.headerName] = sha256Hex(bundle.readBytes(header.payload));
  }
  return {
    name: "snapshots",
    caption: "Species density profiles at the saved times",
    svg: parts.join("\n") + "\n",
    sidecar: {
      figure: "snapshots",
      count: snaps.length,
      species,
      times: snaps.map((s) => s.t),
      value_range: [r.min, r.max],
      payload_checksums: payloadChecksums,
    },
  };
}

/** Ensemble aggregate table from ensemble.csv. */
export function renderMoments(bundle: ReportBundle): Figure {
  const table = parseCsv(bundle.readText("ensemble.csv"));
  if (table.rows.length === 0) {
    throw new Error("ensemble table has no rows");
  }
  const display = table.rows.map((row) =>
    row.map((tok, j) => (j === 0 || tok === "" ? tok : Number(tok).toPrecision(6))),
  );
  const checksums: Record<string, string> = {};
  table.header.forEach((name, j) => {
    checksums[name] = seriesChecksum(table.rows.map((row) => row[j]));
  });
  return {
    name: "moments",
    caption: "Ensemble aggregates over Monte Carlo paths",
    svg: textTable("ensemble moments", table.header, display),
    sidecar: {
      figure: "moments",
      functionals: table.rows.map((row) => row[0]),
      columns: table.header,
      series_checksums: checksums,
      rows: table.rows.length,
    },
  };
}

/** Log-log decay of successive de-regularization differences. */
export function renderEpsStudy(bundle: ReportBundle): Figure {
  const table = parseCsv(bundle.readText("eps_study.csv"));
  const eps = column(table, "epsilon");
  const diff = column(table, "diff_to_next");
  const residue = column(table, "residue_sup");
  const keep = diff.values
    .map((v, i) => [eps.values[i], v] as [number, number])
    .filter(([, v]) => Number.isFinite(v) && v > 0);
  if (keep.length === 0) {
    throw new Error("eps study has no finite successive differences");
  }
  const series: Series[] = [
    { label: "|u_eps - u_next| L2(Q_T)", x: keep.map(([e]) => e), y: keep.map(([, v]) => v) },
    { label: "residue sup", x: eps.values, y: residue.values },
  ];
  return {
    name: "eps_study",
    caption: "Frozen-noise de-regularization: successive differences and residue",
    svg: linePlot("de-regularization decay", "log10 epsilon", "log10 value", series, {
      logX: true,
      logY: true,
    }),
    sidecar: {
      figure: "eps_study",
      epsilon: eps.values,
      differences: diff.raw,
      differences_decreasing: keep.every(
        ([, v], i) => i === 0 || v < keep[i - 1][1],
      ),
      series_checksums: {
        epsilon: seriesChecksum(eps.raw),
        diff_to_next: seriesChecksum(diff.raw),
        residue_sup: seriesChecksum(residue.raw),
      },
    },
  };
}

export type FigureKind = "entropy" | "snapshots" | "moments" | "eps-study";

const RENDERERS: Record<FigureKind, (bundle: ReportBundle) => Figure> = {
  entropy: renderEntropy,
  snapshots: renderSnapshots,
  moments: renderMoments,
  "eps-study": renderEpsStudy,
};

export function renderKind(dir: string, kind: FigureKind, outDir: string): string[] {
  const bundle = new ReportBundle(dir);
  const fig = RENDERERS[kind](bundle);
  const written = writeFigure(outDir, fig);
  for (const p of written) {
    if (fs.statSync(p).size === 0) {
      throw new Error(`empty output file ${p}`);
    }
  }
  return written;
}

/** Render every figure the run directory supports; fails if none apply. */
export function renderAll(dir: string, outDir: string): string[] {
  const bundle = new ReportBundle(dir);
  const written: string[] = [];
  const supported: FigureKind[] = [];
  if (bundle.has("timeseries.csv")) supported.push("entropy");
  if (listDensitySnapshots(bundle).length > 0) supported.push("snapshots");
  if (bundle.has("ensemble.csv")) supported.push("moments");
  if (bundle.has("eps_study.csv")) supported.push("eps-study");
  if (supported.length === 0) {
    throw new Error(`no renderable outputs in ${dir}`);
  }
  for (const kind of supported) {
    written.push(...renderKind(dir, kind, outDir));
  }
  return written;
}
