#!/usr/bin/env node
/**
 * simplot: figures from transmission sweep results.
 *
 *   simplot q --csv results.csv --out fig.svg
 *   simplot const --dumps a.txt b.txt c.txt d.txt --out fig.svg
 *
 * Exit codes: 0 success, 1 bad input data, 2 bad usage.
 */

import { realpathSync, writeFileSync } from "node:fs";
import { basename } from "node:path";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { renderConstellations } from "./constellation.js";
import { panelLabel } from "./constellation.js";
import { readSweepCsv } from "./csv.js";
import { readDump } from "./dump.js";
import { renderQCurves } from "./qcurve.js";

const USAGE = `usage:
  simplot q     --csv <results.csv> --out <figure.svg>
  simplot const --dumps <dump> [<dump> ...] --out <figure.svg>`;

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        csv: { type: "string" },
        dumps: { type: "string", multiple: true },
        out: { type: "string" },
      },
    });
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    console.error(USAGE);
    return 2;
  }
  const { values, positionals } = parsed;
  const command = positionals[0];
  if (command !== "q" && command !== "const") {
    console.error(USAGE);
    return 2;
  }
  // "--dumps a b c" passes b and c through as positionals
  const dumpPaths = [...(values.dumps ?? []), ...positionals.slice(1)];
  if (command === "q" && positionals.length !== 1) {
    console.error(USAGE);
    return 2;
  }
  if (!values.out) {
    console.error("error: --out is required");
    return 2;
  }

  try {
    let svg: string;
    if (command === "q") {
      if (!values.csv) {
        console.error("error: q needs --csv");
        return 2;
      }
      svg = renderQCurves(readSweepCsv(values.csv));
    } else {
      if (dumpPaths.length === 0) {
        console.error("error: const needs --dumps");
        return 2;
      }
      const dumps = dumpPaths.map((path) => {
        const d = readDump(path);
        return { ...d, label: panelLabel(d, basename(path)) };
      });
      svg = renderConstellations(dumps);
    }
    writeFileSync(values.out, svg);
    console.log(values.out);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const entry = process.argv[1] ? pathToFileURL(realpathSync(process.argv[1])).href : "";
if (import.meta.url === entry) {
  process.exit(main(process.argv.slice(2)));
}
