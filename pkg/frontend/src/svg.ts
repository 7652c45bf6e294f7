/**
 * Deterministic SVG assembly: fixed styling, fixed number formatting, no
 * timestamps or generated ids, so identical inputs give identical bytes.
 */

export const FONT = "Helvetica, Arial, sans-serif";

// Okabe-Ito palette, stable series order
export const PALETTE = ["#0072b2", "#d55e00", "#009e73", "#cc79a7", "#e69f00", "#56b4e9"];

export function fmt(x: number): string {
  if (!Number.isFinite(x)) throw new Error(`non-finite coordinate: ${x}`);
  const s = x.toFixed(2);
  return s.replace(/\.?0+$/, "") === "-0" ? "0" : s.replace(/\.?0+$/, "");
}

export function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.domain = domain;
  return f;
}

/** Tick positions at a 1/2/5 step covering [lo, hi], about `count` of them. */
export function ticks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const raw = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    if (mag * m >= raw) {
      step = mag * m;
      break;
    }
  }
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

/** Pad a data extent so points sit inside the frame; handles single values. */
export function padded(lo: number, hi: number, frac = 0.06): [number, number] {
  if (lo === hi) {
    const d = lo === 0 ? 1 : Math.abs(lo) * 0.5;
    return [lo - d, hi + d];
  }
  const pad = (hi - lo) * frac;
  return [lo - pad, hi + pad];
}

export function svgDocument(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="${FONT}">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    body +
    "</svg>\n"
  );
}

export interface AxisSpec {
  x: Scale;
  y: Scale;
  left: number;
  top: number;
  width: number;
  height: number;
  xLabel: string;
  yLabel: string;
  fontSize?: number;
  tickCount?: number;
}

/** Frame, ticks, grid lines and axis labels for one plot panel. */
export function axes(spec: AxisSpec): string {
  const { x, y, left, top, width, height } = spec;
  const fs = spec.fontSize ?? 11;
  const n = spec.tickCount ?? 5;
  const right = left + width;
  const bottom = top + height;
  let s = "";
  for (const t of ticks(x.domain[0], x.domain[1], n)) {
    const px = fmt(x(t));
    s += `<line x1="${px}" y1="${fmt(top)}" x2="${px}" y2="${fmt(bottom)}" stroke="#dddddd" stroke-width="0.5"/>\n`;
    s += `<line x1="${px}" y1="${fmt(bottom)}" x2="${px}" y2="${fmt(bottom + 4)}" stroke="black" stroke-width="1"/>\n`;
    s += `<text x="${px}" y="${fmt(bottom + 6 + fs)}" font-size="${fs}" text-anchor="middle">${fmt(t)}</text>\n`;
  }
  for (const t of ticks(y.domain[0], y.domain[1], n)) {
    const py = fmt(y(t));
    s += `<line x1="${fmt(left)}" y1="${py}" x2="${fmt(right)}" y2="${py}" stroke="#dddddd" stroke-width="0.5"/>\n`;
    s += `<line x1="${fmt(left - 4)}" y1="${py}" x2="${fmt(left)}" y2="${py}" stroke="black" stroke-width="1"/>\n`;
    s += `<text x="${fmt(left - 7)}" y="${fmt(y(t) + fs * 0.35)}" font-size="${fs}" text-anchor="end">${fmt(t)}</text>\n`;
  }
  s += `<rect x="${fmt(left)}" y="${fmt(top)}" width="${fmt(width)}" height="${fmt(height)}" fill="none" stroke="black" stroke-width="1"/>\n`;
  s += `<text x="${fmt(left + width / 2)}" y="${fmt(bottom + 30 + fs)}" font-size="${fs + 1}" text-anchor="middle">${esc(spec.xLabel)}</text>\n`;
  s += `<text x="${fmt(left - 38)}" y="${fmt(top + height / 2)}" font-size="${fs + 1}" text-anchor="middle" transform="rotate(-90 ${fmt(left - 38)} ${fmt(top + height / 2)})">${esc(spec.yLabel)}</text>\n`;
  return s;
}

/** Marker shapes cycled per series; all are drawn centered on (px, py). */
export function marker(kind: number, px: number, py: number, color: string, r = 3.2): string {
  const x = px;
  const y = py;
  switch (kind % 4) {
    case 0:
      return `<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${color}"/>\n`;
    case 1:
      return (
        `<rect x="${fmt(x - r)}" y="${fmt(y - r)}" width="${fmt(2 * r)}" height="${fmt(2 * r)}" ` +
        `fill="${color}"/>\n`
      );
    case 2:
      return (
        `<path d="M ${fmt(x)} ${fmt(y - r * 1.2)} L ${fmt(x + r * 1.1)} ${fmt(y + r * 0.9)} ` +
        `L ${fmt(x - r * 1.1)} ${fmt(y + r * 0.9)} Z" fill="${color}"/>\n`
      );
    default:
      return (
        `<path d="M ${fmt(x)} ${fmt(y - r * 1.3)} L ${fmt(x + r * 1.3)} ${fmt(y)} ` +
        `L ${fmt(x)} ${fmt(y + r * 1.3)} L ${fmt(x - r * 1.3)} ${fmt(y)} Z" fill="${color}"/>\n`
      );
  }
}
