/** Chart geometry as pure string builders: the same series always produces
 * byte-identical SVG paths, which keeps refreshed views reproducible. */

export interface Bounds {
  min: number;
  max: number;
}

export function seriesBounds(values: (number | null)[]): Bounds {
  let min = Number.POSITIVE_INFINITY;
  let max = Number.NEGATIVE_INFINITY;
  for (const v of values) {
    if (v === null || !Number.isFinite(v)) continue;
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (min === Number.POSITIVE_INFINITY) return { min: 0, max: 1 };
  if (min === max) return { min: min - 0.5, max: max + 0.5 }; // flat series
  return { min, max };
}

function scale(v: number, b: Bounds, span: number): number {
  return ((v - b.min) / (b.max - b.min)) * span;
}

const fmt = (v: number) => v.toFixed(2);

/** Polyline path over (xs, ys); null ys break the line into segments. */
export function linePath(
  xs: number[],
  ys: (number | null)[],
  width: number,
  height: number,
  xBounds?: Bounds,
  yBounds?: Bounds,
): string {
  if (xs.length === 0) return "";
  const xb = xBounds ?? seriesBounds(xs);
  const yb = yBounds ?? seriesBounds(ys);
  const parts: string[] = [];
  let pen = false;
  for (let i = 0; i < xs.length; i++) {
    const y = ys[i];
    const x = xs[i];
    if (y === null || y === undefined || x === undefined || !Number.isFinite(y)) {
      pen = false;
      continue;
    }
    const px = fmt(scale(x, xb, width));
    const py = fmt(height - scale(y, yb, height));
    parts.push(`${pen ? "L" : "M"}${px},${py}`);
    pen = true;
  }
  return parts.join(" ");
}

/** Horizontal reference line (e.g. the fixed-point tolerance). */
export function hLinePath(y: number, width: number, height: number, yBounds: Bounds): string {
  const py = fmt(height - scale(y, yBounds, height));
  return `M0,${py} L${fmt(width)},${py}`;
}

/** Keep at most maxPoints by striding; always keeps the last point. */
export function downsample<T>(values: T[], maxPoints: number): T[] {
  if (values.length <= maxPoints || maxPoints < 2) return values.slice();
  const stride = Math.ceil(values.length / (maxPoints - 1));
  const out: T[] = [];
  for (let i = 0; i < values.length; i += stride) out.push(values[i] as T);
  const last = values[values.length - 1] as T;
  if (out[out.length - 1] !== last) out.push(last);
  return out;
}

/** Log-scale variant for residual curves that decay geometrically. */
export function logBounds(values: number[], floor = 1e-12): Bounds {
  const logged = values.filter((v) => v > 0).map((v) => Math.log10(Math.max(v, floor)));
  return seriesBounds(logged.length > 0 ? logged : [0]);
}

export function logPath(
  xs: number[],
  ys: number[],
  width: number,
  height: number,
  floor = 1e-12,
): string {
  const logged = ys.map((v) => (v > 0 ? Math.log10(Math.max(v, floor)) : null));
  return linePath(xs, logged, width, height, undefined, logBounds(ys, floor));
}
