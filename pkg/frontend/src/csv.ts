import { readFileSync } from 'fs';

export interface Table {
  columns: string[];
  rows: number[][];
}

export function parseCsv(text: string): Table {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 2) throw new Error('CSV has no data rows');
  const columns = lines[0].split(',').map((c) => c.trim());
  const rows = lines.slice(1).map((line) => {
    const cells = line.split(',');
    if (cells.length !== columns.length) {
      throw new Error(`row has ${cells.length} cells, header has ${columns.length}`);
    }
    return cells.map(Number);
  });
  return { columns, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, 'utf8'));
}

export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) throw new Error(`missing column '${name}' (have: ${table.columns.join(', ')})`);
  return table.rows.map((r) => r[idx]);
}

/** Headered matrix: first row = column coordinates, first column = row coordinates. */
export interface Matrix {
  rowCoords: number[];
  colCoords: number[];
  values: number[][];
}

export function readMatrixCsv(path: string): Matrix {
  const lines = readFileSync(path, 'utf8').trim().split(/\r?\n/);
  if (lines.length < 2) throw new Error('matrix CSV has no rows');
  const header = lines[0].split(',');
  const colCoords = header.slice(1).map(Number);
  const rowCoords: number[] = [];
  const values: number[][] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(',').map(Number);
    rowCoords.push(cells[0]);
    values.push(cells.slice(1));
    if (cells.length - 1 !== colCoords.length) {
      throw new Error('ragged matrix CSV');
    }
  }
  return { rowCoords, colCoords, values };
}
