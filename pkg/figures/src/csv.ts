import { readFileSync } from "node:fs";
import Papa from "papaparse";

/** A parsed numeric CSV: named columns over a shared row count. */
export interface Table {
  header: string[];
  /** Column-major: columns[i] lines up with header[i]. */
  columns: number[][];
}

export class BundleError extends Error {}

/**
 * Read a strictly numeric CSV written by the simulation package.
 *
 * Every cell must parse as a finite-or-infinite float; blank trailing
 * lines are tolerated, anything else is a corrupt artifact and throws.
 */
export function readTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new BundleError(`cannot read table ${path}: ${(err as Error).message}`);
  }
  const parsed = Papa.parse<string[]>(text.trim(), {
    delimiter: ",",
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]!;
    throw new BundleError(`${path}: ${first.message} (row ${first.row})`);
  }
  const rows = parsed.data;
  if (rows.length === 0) {
    throw new BundleError(`${path}: empty file`);
  }
  const header = rows[0]!;
  const columns: number[][] = header.map(() => []);
  for (let r = 1; r < rows.length; r++) {
    const row = rows[r]!;
    if (row.length !== header.length) {
      throw new BundleError(
        `${path}: row ${r} has ${row.length} cells, header has ${header.length}`
      );
    }
    for (let c = 0; c < header.length; c++) {
      const value = Number(row[c]);
      if (Number.isNaN(value)) {
        throw new BundleError(`${path}: row ${r} column ${header[c]} is not a number`);
      }
      columns[c]!.push(value);
    }
  }
  return { header, columns };
}

export function column(table: Table, name: string): number[] {
  const index = table.header.indexOf(name);
  if (index < 0) {
    throw new BundleError(`no column ${name}; have ${table.header.join(", ")}`);
  }
  return table.columns[index]!;
}

export function rowCount(table: Table): number {
  return table.columns.length > 0 ? table.columns[0]!.length : 0;
}
