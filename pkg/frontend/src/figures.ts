import { column, readCsv, readMatrixCsv } from './csv.js';
import { contourSegments, maxValue, pdfLevels } from './contours.js';
import {
  DEFAULT_FRAME, Frame, axes, document, extent, linearScale, logScale,
  polylinePath,
} from './svg.js';

export interface FigureOptions {
  inputs: string[];
  output: string;
  onsetTime?: number;
  labels?: string[];
  title?: string;
}

const SERIES_COLORS = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#8c564b'];

function plotArea(frame: Frame): { x: [number, number]; y: [number, number] } {
  return {
    x: [frame.margin.left, frame.width - frame.margin.right],
    y: [frame.height - frame.margin.bottom, frame.margin.top],
  };
}

/** Drag-reduction curves over time; the control onset carries a red marker. */
export function renderDrCurve(opts: FigureOptions): string {
  if (opts.inputs.length === 0) throw new Error('dr-curve needs at least one CSV');
  const frame = DEFAULT_FRAME;
  const area = plotArea(frame);
  const series = opts.inputs.map((p) => {
    const t = readCsv(p);
    return { time: column(t, 'time'), dr: column(t, 'dr') };
  });
  const allT = series.flatMap((s) => s.time);
  const allD = series.flatMap((s) => s.dr);
  const x = linearScale(extent(allT), area.x);
  const y = linearScale(extent(allD.concat([0])), area.y);
  const parts: string[] = [axes(x, y, frame, 'time (delta / u_b)', 'drag reduction')];
  parts.push(`<line x1="${area.x[0]}" y1="${y(0).toFixed(1)}" x2="${area.x[1]}" y2="${y(0).toFixed(1)}" stroke="#999" stroke-dasharray="4 3"/>`);
  series.forEach((s, i) => {
    const px = s.time.map(x);
    const py = s.dr.map(y);
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    parts.push(`<path d="${polylinePath(px, py)}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    if (opts.labels && opts.labels[i]) {
      parts.push(`<text x="${area.x[1] - 5}" y="${frame.margin.top + 16 * (i + 1)}" font-size="12" text-anchor="end" fill="${color}">${opts.labels[i]}</text>`);
    }
  });
  const onsetT = opts.onsetTime ?? series[0].time[0];
  const k = nearestIndex(series[0].time, onsetT);
  parts.push(`<circle class="onset-marker" cx="${x(series[0].time[k]).toFixed(1)}" cy="${y(series[0].dr[k]).toFixed(1)}" r="6" fill="none" stroke="red" stroke-width="2"/>`);
  return document(parts.join('\n'), frame, opts.title ?? 'Drag reduction');
}

function nearestIndex(arr: number[], v: number): number {
  let best = 0;
  for (let i = 1; i < arr.length; i++) {
    if (Math.abs(arr[i] - v) < Math.abs(arr[best] - v)) best = i;
  }
  return best;
}

/** Mean and rms velocity profiles vs wall distance (four stacked panels). */
export function renderProfiles(opts: FigureOptions): string {
  const frame: Frame = { width: 640, height: 860, margin: DEFAULT_FRAME.margin };
  const panels = [
    { col: 'u_mean', label: 'mean streamwise velocity' },
    { col: 'u_rms', label: 'streamwise rms' },
    { col: 'v_rms', label: 'wall-normal rms' },
    { col: 'w_rms', label: 'spanwise rms' },
  ];
  const tables = opts.inputs.map(readCsv);
  const parts: string[] = [];
  const panelH = 200;
  panels.forEach((panel, pi) => {
    const top = 30 + pi * (panelH + 10);
    const sub: Frame = {
      width: frame.width,
      height: panelH,
      margin: { ...frame.margin, top: 8, bottom: 36 },
    };
    const area = {
      x: [sub.margin.left, sub.width - sub.margin.right] as [number, number],
      y: [panelH - sub.margin.bottom, sub.margin.top] as [number, number],
    };
    const ys = tables.flatMap((t) => column(t, panel.col));
    const yplus = tables.flatMap((t) => column(t, 'y_plus'));
    const positive = yplus.filter((v) => v > 0);
    const x = logScale([Math.max(Math.min(...positive), 0.05), Math.max(...yplus)], area.x);
    const y = linearScale(extent(ys.concat([0])), area.y);
    const inner: string[] = [axes(x, y, sub, pi === 3 ? 'y+' : '', panel.label)];
    tables.forEach((t, i) => {
      const px: number[] = [];
      const py: number[] = [];
      const yp = column(t, 'y_plus');
      const val = column(t, panel.col);
      // walls duplicate y+=0; keep the half-channel ascending branch
      const half = Math.ceil(yp.length / 2);
      for (let j = 0; j < half; j++) {
        if (yp[j] <= 0) continue;
        px.push(x(yp[j]));
        py.push(y(val[j]));
      }
      const color = SERIES_COLORS[i % SERIES_COLORS.length];
      inner.push(`<path d="${polylinePath(px, py)}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    });
    parts.push(`<g transform="translate(0 ${top})">${inner.join('\n')}</g>`);
  });
  return document(parts.join('\n'), frame, opts.title ?? 'Velocity statistics');
}

/** Joint PDF of (u', v') with contour lines at 20/40/60/80% of the peak. */
export function renderJpdfContours(opts: FigureOptions): string {
  const frame = DEFAULT_FRAME;
  const area = plotArea(frame);
  const parts: string[] = [];
  const colors = ['#bdd7e7', '#6baed6', '#3182bd', '#08519c'];
  opts.inputs.forEach((path, fi) => {
    const m = readMatrixCsv(path);
    const peak = maxValue(m.values);
    const levels = pdfLevels(peak);
    const x = linearScale(extent(m.rowCoords), area.x);
    const y = linearScale(extent(m.colCoords), area.y);
    if (fi === 0) {
      parts.unshift(axes(x, y, frame, "u' / u_tau0", "v' / u_tau0"));
    }
    levels.forEach((level, li) => {
      const segs = contourSegments(m.values, m.rowCoords, m.colCoords, level);
      const d = segs
        .map((s) => `M${x(s.x1).toFixed(2)},${y(s.y1).toFixed(2)} L${x(s.x2).toFixed(2)},${y(s.y2).toFixed(2)}`)
        .join(' ');
      const stroke = fi === 0 ? colors[li] : '#d62728';
      const dash = fi === 0 ? '' : ' stroke-dasharray="5 3"';
      parts.push(`<g class="pdf-contour" data-input="${fi}" data-level="${level}">` +
        `<path d="${d}" fill="none" stroke="${stroke}" stroke-width="1.3"${dash}/></g>`);
    });
  });
  return document(parts.join('\n'), frame, opts.title ?? "Joint PDF of (u', v')");
}

/** Premultiplied-spectra map over wall distance and wavelength. */
export function renderSpectraMap(opts: FigureOptions): string {
  const frame = DEFAULT_FRAME;
  const area = plotArea(frame);
  const m = readMatrixCsv(opts.inputs[0]);
  const rows = m.rowCoords; // y+
  const cols = m.colCoords; // lambda+
  const peak = maxValue(m.values);
  if (peak <= 0) throw new Error('spectra map is empty');
  const rowsPos = rows.filter((v) => v > 0);
  const x = logScale([Math.min(...cols), Math.max(...cols)], area.x);
  const y = logScale([Math.max(Math.min(...rowsPos), 0.05), Math.max(...rows)], area.y);
  const parts: string[] = [axes(x, y, frame, 'wavelength+', 'y+')];
  const half = Math.ceil(rows.length / 2);
  for (let i = 0; i < half - 1; i++) {
    if (rows[i] <= 0 || rows[i + 1] <= 0) continue;
    for (let j = 0; j < cols.length - 1; j++) {
      const v = m.values[i][j] / peak;
      if (v <= 1e-6) continue;
      const x0 = x(cols[j]);
      const x1 = x(cols[j + 1]);
      const y0 = y(rows[i]);
      const y1 = y(rows[i + 1]);
      const shade = Math.round(255 * (1 - Math.min(1, Math.sqrt(v))));
      parts.push(`<rect x="${Math.min(x0, x1).toFixed(1)}" y="${Math.min(y0, y1).toFixed(1)}" ` +
        `width="${Math.abs(x1 - x0).toFixed(1)}" height="${Math.abs(y1 - y0).toFixed(1)}" ` +
        `fill="rgb(255,${shade},${shade})" stroke="none"/>`);
    }
  }
  // contour rings of the premultiplied energy at 40/60/80% of peak
  for (const f of [0.4, 0.6, 0.8]) {
    const segs = contourSegments(m.values.slice(0, half), rows.slice(0, half), cols, f * peak);
    const d = segs
      .map((s) => `M${x(s.y1).toFixed(1)},${y(s.x1).toFixed(1)} L${x(s.y2).toFixed(1)},${y(s.x2).toFixed(1)}`)
      .join(' ');
    parts.push(`<path d="${d}" fill="none" stroke="#333" stroke-width="1"/>`);
  }
  return document(parts.join('\n'), frame, opts.title ?? 'Premultiplied spectra');
}

/** Prediction-vs-truth scatter with the identity line and a linear fit. */
export function renderScatter(opts: FigureOptions): string {
  const frame = DEFAULT_FRAME;
  const area = plotArea(frame);
  const t = readCsv(opts.inputs[0]);
  const truth = column(t, 'truth');
  const pred = column(t, 'prediction');
  const lim = extent(truth.concat(pred));
  const x = linearScale(lim, area.x);
  const y = linearScale(lim, area.y);
  const parts: string[] = [axes(x, y, frame, 'truth', 'prediction')];
  const step = Math.max(1, Math.floor(truth.length / 4000));
  for (let i = 0; i < truth.length; i += step) {
    parts.push(`<circle cx="${x(truth[i]).toFixed(1)}" cy="${y(pred[i]).toFixed(1)}" r="1.4" fill="#1f77b4" fill-opacity="0.35"/>`);
  }
  // identity reference
  parts.push(`<line class="identity-line" x1="${x(lim[0]).toFixed(1)}" y1="${y(lim[0]).toFixed(1)}" ` +
    `x2="${x(lim[1]).toFixed(1)}" y2="${y(lim[1]).toFixed(1)}" stroke="green" stroke-width="1.5"/>`);
  // least-squares fit
  const { slope, intercept } = leastSquares(truth, pred);
  const f0 = slope * lim[0] + intercept;
  const f1 = slope * lim[1] + intercept;
  parts.push(`<line class="fit-line" x1="${x(lim[0]).toFixed(1)}" y1="${y(f0).toFixed(1)}" ` +
    `x2="${x(lim[1]).toFixed(1)}" y2="${y(f1).toFixed(1)}" stroke="red" stroke-width="1.5" stroke-dasharray="6 3"/>`);
  parts.push(`<text x="${area.x[0] + 10}" y="${area.y[1] + 16}" font-size="12">fit slope ${slope.toFixed(3)}</text>`);
  return document(parts.join('\n'), frame, opts.title ?? 'Prediction vs truth');
}

export function leastSquares(xs: number[], ys: number[]): { slope: number; intercept: number } {
  const n = xs.length;
  if (n === 0) throw new Error('empty scatter data');
  let sx = 0;
  let sy = 0;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const denom = n * sxx - sx * sx || 1;
  const slope = (n * sxy - sx * sy) / denom;
  return { slope, intercept: (sy - slope * sx) / n };
}

export const RENDERERS: Record<string, (o: FigureOptions) => string> = {
  'dr-curve': renderDrCurve,
  profiles: renderProfiles,
  'jpdf-contours': renderJpdfContours,
  'spectra-map': renderSpectraMap,
  scatter: renderScatter,
};
