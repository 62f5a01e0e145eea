/** Minimal CSV handling for the simulator's output contract: a header line
 *  followed by comma-separated numeric rows (no quoting, no escapes). */

export interface CsvTable {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): CsvTable {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV document");
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(","));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new Error(`ragged CSV row: expected ${header.length} fields, got ${row.length}`);
    }
  }
  return { header, rows };
}

export interface Column {
  name: string;
  raw: string[];
  values: number[];
}

export function column(table: CsvTable, name: string): Column {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new Error(`CSV has no column ${name}; columns: ${table.header.join(",")}`);
  }
  const raw = table.rows.map((row) => row[idx]);
  const values = raw.map((tok) => (tok === "" ? NaN : Number(tok)));
  for (let i = 0; i < values.length; i += 1) {
    if (raw[i] !== "" && !Number.isFinite(values[i])) {
      throw new Error(`non-numeric value ${raw[i]} in column ${name}`);
    }
  }
  return { name, raw, values };
}
