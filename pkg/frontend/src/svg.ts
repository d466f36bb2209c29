export interface Frame {
  width: number;
  height: number;
  margin: { left: number; right: number; top: number; bottom: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 640,
  height: 480,
  margin: { left: 70, right: 20, top: 30, bottom: 50 },
};

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
  log: boolean;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  fn.range = range;
  fn.log = false;
  return fn;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const d0 = Math.log10(domain[0]);
  const d1 = Math.log10(domain[1]);
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((Math.log10(v) - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  fn.range = range;
  fn.log = true;
  return fn;
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) throw new Error('no finite values');
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

export function esc(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

export function polylinePath(xs: number[], ys: number[]): string {
  const parts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    parts.push(`${i === 0 ? 'M' : 'L'}${xs[i].toFixed(2)},${ys[i].toFixed(2)}`);
  }
  return parts.join(' ');
}

function ticks(domain: [number, number], n = 5): number[] {
  const [lo, hi] = domain;
  const step = (hi - lo) / (n - 1);
  return Array.from({ length: n }, (_, i) => lo + i * step);
}

function logTicks(domain: [number, number]): number[] {
  const lo = Math.ceil(Math.log10(domain[0]));
  const hi = Math.floor(Math.log10(domain[1]));
  const out: number[] = [];
  for (let e = lo; e <= hi; e++) out.push(10 ** e);
  if (out.length === 0) out.push(domain[0], domain[1]);
  return out;
}

function fmtTick(v: number): string {
  if (v === 0) return '0';
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-2) return v.toExponential(0);
  return String(Math.round(v * 1000) / 1000);
}

export function axes(x: Scale, y: Scale, frame: Frame, xLabel: string, yLabel: string): string {
  const { margin, width, height } = frame;
  const parts: string[] = [];
  const x0 = margin.left;
  const x1 = width - margin.right;
  const y0 = height - margin.bottom;
  const y1 = margin.top;
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`);
  const xt = x.log ? logTicks(x.domain) : ticks(x.domain);
  for (const t of xt) {
    const px = x(t);
    parts.push(`<line x1="${px.toFixed(1)}" y1="${y0}" x2="${px.toFixed(1)}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(`<text x="${px.toFixed(1)}" y="${y0 + 18}" font-size="11" text-anchor="middle">${fmtTick(t)}</text>`);
  }
  const yt = y.log ? logTicks(y.domain) : ticks(y.domain);
  for (const t of yt) {
    const py = y(t);
    parts.push(`<line x1="${x0 - 5}" y1="${py.toFixed(1)}" x2="${x0}" y2="${py.toFixed(1)}" stroke="black"/>`);
    parts.push(`<text x="${x0 - 8}" y="${(py + 4).toFixed(1)}" font-size="11" text-anchor="end">${fmtTick(t)}</text>`);
  }
  parts.push(`<text x="${(x0 + x1) / 2}" y="${height - 10}" font-size="13" text-anchor="middle">${esc(xLabel)}</text>`);
  parts.push(`<text x="16" y="${(y0 + y1) / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 ${(y0 + y1) / 2})">${esc(yLabel)}</text>`);
  return parts.join('\n');
}

export function document(body: string, frame: Frame, title?: string): string {
  const head = title
    ? `<text x="${frame.width / 2}" y="18" font-size="14" text-anchor="middle">${esc(title)}</text>`
    : '';
  return `<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}">
<rect width="100%" height="100%" fill="white"/>
${head}
${body}
</svg>
`;
}
