/** Marching-squares contour extraction on a regular grid. */

export interface Segment {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

/** The four exact contour levels used for joint-PDF plots: 20/40/60/80% of
 * the maximum density. */
export function pdfLevels(maxDensity: number): number[] {
  return [0.2, 0.4, 0.6, 0.8].map((f) => f * maxDensity);
}

function interp(a: number, b: number, va: number, vb: number, level: number): number {
  const t = (level - va) / (vb - va);
  return a + t * (b - a);
}

/**
 * Contour segments of values[i][j] (row coordinate ys[i], column xs[j]) at
 * one level. Cells are visited row-major; every crossing yields one or two
 * straight segments, which is enough for plotting.
 */
export function contourSegments(
  values: number[][],
  ys: number[],
  xs: number[],
  level: number,
): Segment[] {
  const out: Segment[] = [];
  for (let i = 0; i < ys.length - 1; i++) {
    for (let j = 0; j < xs.length - 1; j++) {
      const v00 = values[i][j];
      const v01 = values[i][j + 1];
      const v10 = values[i + 1][j];
      const v11 = values[i + 1][j + 1];
      let idx = 0;
      if (v00 > level) idx |= 1;
      if (v01 > level) idx |= 2;
      if (v11 > level) idx |= 4;
      if (v10 > level) idx |= 8;
      if (idx === 0 || idx === 15) continue;
      // edge crossing points (x, y)
      const top = () => [interp(xs[j], xs[j + 1], v00, v01, level), ys[i]] as const;
      const bottom = () => [interp(xs[j], xs[j + 1], v10, v11, level), ys[i + 1]] as const;
      const left = () => [xs[j], interp(ys[i], ys[i + 1], v00, v10, level)] as const;
      const right = () => [xs[j + 1], interp(ys[i], ys[i + 1], v01, v11, level)] as const;
      const seg = (a: readonly [number, number], b: readonly [number, number]) =>
        out.push({ x1: a[0], y1: a[1], x2: b[0], y2: b[1] });
      switch (idx) {
        case 1: case 14: seg(left(), top()); break;
        case 2: case 13: seg(top(), right()); break;
        case 3: case 12: seg(left(), right()); break;
        case 4: case 11: seg(right(), bottom()); break;
        case 6: case 9: seg(top(), bottom()); break;
        case 7: case 8: seg(left(), bottom()); break;
        case 5:
          seg(left(), top());
          seg(right(), bottom());
          break;
        case 10:
          seg(top(), right());
          seg(left(), bottom());
          break;
      }
    }
  }
  return out;
}

export function maxValue(values: number[][]): number {
  let m = -Infinity;
  for (const row of values) for (const v of row) if (v > m) m = v;
  return m;
}
