import { describe, expect, it } from 'vitest';
import { mkdtempSync, readFileSync, existsSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';

import { parseCsv, readMatrixCsv } from '../src/csv.js';
import { contourSegments, maxValue, pdfLevels } from '../src/contours.js';
import {
  leastSquares, renderDrCurve, renderJpdfContours, renderProfiles,
  renderScatter, renderSpectraMap,
} from '../src/figures.js';
import { main } from '../src/cli.js';

const FIX = join(__dirname, 'fixtures');

describe('csv parsing', () => {
  it('parses columns and rejects ragged rows', () => {
    const t = parseCsv('a,b\n1,2\n3,4\n');
    expect(t.columns).toEqual(['a', 'b']);
    expect(t.rows).toEqual([[1, 2], [3, 4]]);
    expect(() => parseCsv('a,b\n1\n')).toThrow();
  });

  it('reads headered matrices', () => {
    const m = readMatrixCsv(join(FIX, 'jpdf.csv'));
    expect(m.rowCoords.length).toBe(m.values.length);
    expect(m.colCoords.length).toBe(m.values[0].length);
  });
});

describe('contours', () => {
  it('levels are exactly 20/40/60/80% of the max', () => {
    const levels = pdfLevels(5.0);
    expect(levels).toEqual([0.2 * 5.0, 0.4 * 5.0, 0.6 * 5.0, 0.8 * 5.0]);
  });

  it('a radial bump yields nested rings', () => {
    const n = 21;
    const xs = Array.from({ length: n }, (_, i) => (i - 10) / 5);
    const grid = xs.map((y) => xs.map((x) => Math.exp(-(x * x + y * y))));
    const inner = contourSegments(grid, xs, xs, 0.8);
    const outer = contourSegments(grid, xs, xs, 0.2);
    expect(inner.length).toBeGreaterThan(4);
    expect(outer.length).toBeGreaterThan(inner.length);
    const rad = (s: { x1: number; y1: number }) => Math.hypot(s.x1, s.y1);
    const rIn = inner.reduce((a, s) => a + rad(s), 0) / inner.length;
    const rOut = outer.reduce((a, s) => a + rad(s), 0) / outer.length;
    expect(rOut).toBeGreaterThan(rIn);
    // crossing points sit where the field equals the level
    for (const s of inner.slice(0, 10)) {
      expect(Math.exp(-(s.x1 * s.x1 + s.y1 * s.y1))).toBeCloseTo(0.8, 1);
    }
  });
});

describe('figure renderers (golden fixtures)', () => {
  it('dr-curve renders and marks the control onset', () => {
    const svg = renderDrCurve({
      inputs: [join(FIX, 'dr_curve.csv')],
      output: '',
      onsetTime: 0.3,
    });
    expect(svg).toContain('<svg');
    expect(svg).toContain('onset-marker');
    expect(svg).toContain('stroke="red"');
  });

  it('profiles render all four panels', () => {
    const svg = renderProfiles({ inputs: [join(FIX, 'profiles.csv')], output: '' });
    expect(svg).toContain('mean streamwise velocity');
    expect(svg).toContain('spanwise rms');
  });

  it('jpdf contours carry exactly the four fixed levels', () => {
    const svg = renderJpdfContours({ inputs: [join(FIX, 'jpdf.csv')], output: '' });
    const m = readMatrixCsv(join(FIX, 'jpdf.csv'));
    const peak = maxValue(m.values);
    const found = [...svg.matchAll(/data-level="([^"]+)"/g)].map((g) => Number(g[1]));
    expect(found).toEqual([0.2 * peak, 0.4 * peak, 0.6 * peak, 0.8 * peak]);
  });

  it('spectra map renders cells', () => {
    const svg = renderSpectraMap({ inputs: [join(FIX, 'spectra_x.csv')], output: '' });
    expect(svg).toContain('<rect');
    expect(svg).toContain('wavelength+');
  });

  it('scatter draws the identity and fit lines', () => {
    const svg = renderScatter({ inputs: [join(FIX, 'scatter.csv')], output: '' });
    expect(svg).toContain('identity-line');
    expect(svg).toContain('fit-line');
    expect(svg).toContain('stroke="green"');
  });

  it('least squares recovers a known slope', () => {
    const xs = [0, 1, 2, 3, 4];
    const ys = xs.map((x) => 2.5 * x - 1.0);
    const { slope, intercept } = leastSquares(xs, ys);
    expect(slope).toBeCloseTo(2.5, 10);
    expect(intercept).toBeCloseTo(-1.0, 10);
  });
});

describe('cli', () => {
  it('writes an SVG for every figure kind', () => {
    const dir = mkdtempSync(join(tmpdir(), 'figs-'));
    const cases: Array<[string, string[]]> = [
      ['dr-curve', [join(FIX, 'dr_curve.csv')]],
      ['profiles', [join(FIX, 'profiles.csv')]],
      ['jpdf-contours', [join(FIX, 'jpdf.csv')]],
      ['spectra-map', [join(FIX, 'spectra_x.csv')]],
      ['scatter', [join(FIX, 'scatter.csv')]],
    ];
    for (const [kind, inputs] of cases) {
      const out = join(dir, `${kind}.svg`);
      const argv = ['--kind', kind, '--output', out];
      for (const inp of inputs) argv.push('--input', inp);
      if (kind === 'dr-curve') argv.push('--onset', '0.2');
      expect(main(argv)).toBe(0);
      expect(existsSync(out)).toBe(true);
      expect(readFileSync(out, 'utf8')).toContain('</svg>');
    }
  });
});
