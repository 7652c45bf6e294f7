/**
 * Reader for "constellation-dump v1" files: a fixed first line, any number
 * of "# key=value" metadata lines, then one "re,im" point per line.
 */

import { readFileSync } from "node:fs";

export interface ConstellationDump {
  points: Array<{ re: number; im: number }>;
  meta: Record<string, string>;
}

const MAGIC = "# constellation-dump v1";

export function parseDump(text: string, source = "<dump>"): ConstellationDump {
  const lines = text.split(/\r?\n/);
  if (lines[0]?.trim() !== MAGIC) {
    throw new Error(`${source}:1: not a constellation dump (expected "${MAGIC}")`);
  }
  const meta: Record<string, string> = {};
  const points: Array<{ re: number; im: number }> = [];
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    if (line.startsWith("#")) {
      const body = line.replace(/^#\s*/, "");
      const eq = body.indexOf("=");
      if (eq > 0) meta[body.slice(0, eq)] = body.slice(eq + 1);
      continue;
    }
    const comma = line.indexOf(",");
    const re = Number(line.slice(0, comma));
    const im = Number(line.slice(comma + 1));
    if (comma <= 0 || !Number.isFinite(re) || !Number.isFinite(im)) {
      throw new Error(`${source}:${i + 1}: malformed point line: ${lines[i]}`);
    }
    points.push({ re, im });
  }
  return { points, meta };
}

export function readDump(path: string): ConstellationDump {
  return parseDump(readFileSync(path, "utf8"), path);
}
