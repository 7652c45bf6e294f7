/**
 * Constellation scatter panels on a shared square grid, one panel per dump.
 */

import type { ConstellationDump } from "./dump.js";
import { axes, esc, fmt, linearScale, svgDocument } from "./svg.js";

const PANEL = 230;
const GAP = 26;
const MARGIN = { top: 30, right: 14, bottom: 56, left: 58 };

export interface LabeledDump extends ConstellationDump {
  label: string;
}

export function panelLabel(dump: ConstellationDump, fallback: string): string {
  const parts = [dump.meta["scheme"], dump.meta["stage"]].filter(Boolean) as string[];
  const power = dump.meta["launch_dbm"];
  if (power !== undefined) parts.push(`${power} dBm`);
  return parts.length > 0 ? parts.join(", ") : fallback;
}

/** Symmetric axis limit covering every point, rounded to a tidy value. */
function axisLimit(dumps: LabeledDump[]): number {
  let m = 0;
  for (const d of dumps) {
    for (const p of d.points) {
      m = Math.max(m, Math.abs(p.re), Math.abs(p.im));
    }
  }
  if (m === 0) return 1;
  const mag = Math.pow(10, Math.floor(Math.log10(m)));
  for (const step of [1, 1.5, 2, 2.5, 5, 10]) {
    if (mag * step >= m * 1.02) return mag * step;
  }
  return mag * 10;
}

export function renderConstellations(dumps: LabeledDump[]): string {
  if (dumps.length === 0) throw new Error("no dumps given");
  const cols = dumps.length === 1 ? 1 : 2;
  const rowsN = Math.ceil(dumps.length / cols);
  const width = MARGIN.left + cols * PANEL + (cols - 1) * GAP + MARGIN.right;
  const height = MARGIN.top + rowsN * PANEL + (rowsN - 1) * (GAP + 24) + MARGIN.bottom - 24;
  const limit = axisLimit(dumps);

  let body = "";
  dumps.forEach((dump, i) => {
    const col = i % cols;
    const row = Math.floor(i / cols);
    const left = MARGIN.left + col * (PANEL + GAP);
    const top = MARGIN.top + row * (PANEL + GAP + 24);
    const x = linearScale([-limit, limit], [left, left + PANEL]);
    const y = linearScale([-limit, limit], [top + PANEL, top]);
    body += axes({
      x,
      y,
      left,
      top,
      width: PANEL,
      height: PANEL,
      xLabel: "in-phase",
      yLabel: "quadrature",
      fontSize: 10,
      tickCount: 4,
    });
    body += `<text x="${fmt(left + PANEL / 2)}" y="${fmt(top - 7)}" font-size="12" text-anchor="middle" font-weight="bold">${esc(dump.label)}</text>\n`;
    if (dump.points.length === 0) {
      body += `<text x="${fmt(left + PANEL / 2)}" y="${fmt(top + PANEL / 2)}" font-size="11" text-anchor="middle" fill="#888888">no symbols</text>\n`;
      return;
    }
    let pts = "";
    for (const p of dump.points) {
      pts += `<circle cx="${fmt(x(p.re))}" cy="${fmt(y(p.im))}" r="1.1"/>\n`;
    }
    body += `<g fill="#0072b2" fill-opacity="0.45">\n${pts}</g>\n`;
  });

  return svgDocument(width, height, body);
}
