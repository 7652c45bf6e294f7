/**
 * Reader for the sweep results CSV.
 *
 * Expected columns (extras are tolerated and ignored):
 *   scheme,pre_edc,launch_dbm,seed,n_bits,n_errors,ber,q_db,evm
 */

import { readFileSync } from "node:fs";

export interface SweepRow {
  scheme: string;
  preEdc: number;
  launchDbm: number;
  seed: number;
  qDb: number;
}

const REQUIRED = ["scheme", "pre_edc", "launch_dbm", "seed", "q_db"] as const;

function splitCsvLine(line: string): string[] {
  // the producer never quotes fields, so a plain split is the format
  return line.split(",").map((s) => s.trim());
}

export function parseSweepCsv(text: string, source = "<csv>"): SweepRow[] {
  const lines = text.split(/\r?\n/);
  let header: string[] | undefined;
  const rows: SweepRow[] = [];
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "" || line.startsWith("#")) continue;
    if (header === undefined) {
      header = splitCsvLine(line);
      const missing = REQUIRED.filter((c) => !header!.includes(c));
      if (missing.length > 0) {
        throw new Error(`${source}: missing columns: ${missing.join(", ")}`);
      }
      continue;
    }
    const fields = splitCsvLine(line);
    if (fields.length !== header.length) {
      throw new Error(
        `${source}:${i + 1}: expected ${header.length} fields, got ${fields.length}`,
      );
    }
    const get = (col: string) => fields[header!.indexOf(col)];
    const specials: Record<string, number> = { nan: NaN, inf: Infinity, "-inf": -Infinity };
    const num = (col: string) => {
      const raw = get(col);
      if (raw in specials) return specials[raw];
      const v = Number(raw);
      if (!Number.isFinite(v)) {
        throw new Error(`${source}:${i + 1}: bad number for ${col}: ${raw}`);
      }
      return v;
    };
    rows.push({
      scheme: get("scheme"),
      preEdc: num("pre_edc"),
      launchDbm: num("launch_dbm"),
      seed: Math.trunc(num("seed")),
      qDb: num("q_db"),
    });
  }
  if (header === undefined) throw new Error(`${source}: no header line`);
  return rows;
}

export function readSweepCsv(path: string): SweepRow[] {
  return parseSweepCsv(readFileSync(path, "utf8"), path);
}
