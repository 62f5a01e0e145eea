import { ReportBundle } from "./manifest";

export interface Snapshot {
  t: number;
  species: number;
  dim: number;
  shape: number[];        // (nx) or (ny, nx)
  lengths: number[];
  /** values[i][c] for 1D; values[i][y * nx + x] for 2D (x fastest). */
  values: Float64Array[];
  headerName: string;
}

interface SnapshotHeader {
  t: number;
  species: number;
  dim: number;
  shape: number[];
  lengths: number[];
  layout: string;
  dtype: string;
  payload: string;
}

export function readSnapshot(bundle: ReportBundle, headerName: string): Snapshot {
  const header = JSON.parse(bundle.readText(headerName)) as SnapshotHeader;
  if (header.dtype !== "<f8") {
    throw new Error(`unsupported snapshot dtype ${header.dtype}`);
  }
  const payload = bundle.readBytes(header.payload);
  const cells = header.shape.reduce((a, b) => a * b, 1);
  const all = new Float64Array(payload.buffer, payload.byteOffset, header.species * cells);
  const values: Float64Array[] = [];
  for (let i = 0; i < header.species; i += 1) {
    values.push(all.slice(i * cells, (i + 1) * cells));
  }
  return {
    t: header.t,
    species: header.species,
    dim: header.dim,
    shape: header.shape,
    lengths: header.lengths,
    values,
    headerName,
  };
}

export function listDensitySnapshots(bundle: ReportBundle): string[] {
  return bundle.listOutputs("snap_u_").filter((name) => name.endsWith(".json"));
}
