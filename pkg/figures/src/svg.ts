/**
 * Small deterministic SVG chart builder.
 *
 * No DOM, no randomness, no timestamps: the same data renders to the
 * same bytes on every platform, which is what the figure tests pin.
 * Coordinates are emitted with fixed decimals so float formatting can
 * never wobble across runs.
 */

export interface SeriesSpec {
  label: string;
  x: number[];
  y: number[];
  color: string;
  /** SVG dash pattern, empty for solid. */
  dash?: string;
  width?: number;
  /** Draw markers instead of a connecting line. */
  markers?: boolean;
}

export interface FigureSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: SeriesSpec[];
  xLog?: boolean;
  yLog?: boolean;
  width?: number;
  height?: number;
}

const MARGIN = { top: 42, right: 18, bottom: 46, left: 64 };

export function fmt(value: number, decimals = 2): string {
  const s = value.toFixed(decimals);
  // Normalize negative zero so "-0.00" never appears.
  return parseFloat(s) === 0 ? s.replace("-", "") : s;
}

/** Linear map from a data interval onto a pixel interval. */
export function linearScale(
  domain: [number, number],
  range: [number, number]
): (v: number) => number {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

/** Round-number ticks covering [lo, hi] at steps of 1, 2, or 5 x 10^n. */
export function niceTicks(lo: number, hi: number, target = 5): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const rawStep = (hi - lo) / target;
  const power = Math.floor(Math.log10(rawStep));
  const base = Math.pow(10, power);
  let step = 10 * base;
  for (const mult of [1, 2, 5]) {
    if (mult * base >= rawStep) {
      step = mult * base;
      break;
    }
  }
  const ticks: number[] = [];
  let t = Math.ceil(lo / step) * step;
  // Snap away accumulated float error so labels stay round.
  const snap = Math.pow(10, Math.max(0, -power + 1));
  while (t <= hi + step * 1e-9) {
    ticks.push(Math.round(t * snap) / snap);
    t += step;
  }
  return ticks;
}

/** Powers of ten inside [lo, hi], for logarithmic axes. */
export function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-9); Math.pow(10, e) <= hi * (1 + 1e-9); e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks;
}

export function tickLabel(value: number): string {
  if (value === 0) {
    return "0";
  }
  const magnitude = Math.abs(value);
  if (magnitude >= 1e4 || magnitude < 1e-3) {
    const e = Math.floor(Math.log10(magnitude) + 1e-9);
    const mantissa = value / Math.pow(10, e);
    const m = Math.abs(mantissa - 1) < 1e-6 ? "" : `${fmt(mantissa, 1)}x`;
    return `${m}1e${e}`;
  }
  // Up to three significant decimals, trailing zeros trimmed.
  return parseFloat(value.toPrecision(6)).toString();
}

function finiteExtent(values: number[], log: boolean): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v) || (log && v <= 0)) {
      continue;
    }
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) {
    throw new Error("no finite data to plot");
  }
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Render a complete standalone SVG document for the figure. */
export function renderFigure(spec: FigureSpec): string {
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const xs = spec.series.flatMap((s) => s.x);
  const ys = spec.series.flatMap((s) => s.y);
  const [x0, x1] = finiteExtent(xs, spec.xLog ?? false);
  const [y0, y1] = finiteExtent(ys, spec.yLog ?? false);

  const tx = (v: number) => (spec.xLog ? Math.log10(v) : v);
  const ty = (v: number) => (spec.yLog ? Math.log10(v) : v);
  const sx = linearScale([tx(x0), tx(x1)], [MARGIN.left, MARGIN.left + plotW]);
  const sy = linearScale([ty(y0), ty(y1)], [MARGIN.top + plotH, MARGIN.top]);

  const xTicks = spec.xLog ? decadeTicks(x0, x1) : niceTicks(x0, x1, 6);
  const yTicks = spec.yLog ? decadeTicks(y0, y1) : niceTicks(y0, y1, 5);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${fmt(width / 2)}" y="24" text-anchor="middle" font-size="15">${esc(spec.title)}</text>`
  );

  // Grid and axis labels.
  for (const t of xTicks) {
    const px = fmt(sx(tx(t)));
    parts.push(
      `<line x1="${px}" y1="${MARGIN.top}" x2="${px}" y2="${MARGIN.top + plotH}" stroke="#dddddd" stroke-width="1"/>`
    );
    parts.push(
      `<text x="${px}" y="${MARGIN.top + plotH + 18}" text-anchor="middle" font-size="11">${tickLabel(t)}</text>`
    );
  }
  for (const t of yTicks) {
    const py = fmt(sy(ty(t)));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py}" x2="${MARGIN.left + plotW}" y2="${py}" stroke="#dddddd" stroke-width="1"/>`
    );
    parts.push(
      `<text x="${MARGIN.left - 6}" y="${py}" text-anchor="end" dominant-baseline="middle" font-size="11">${tickLabel(t)}</text>`
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333333"/>`
  );
  parts.push(
    `<text x="${fmt(MARGIN.left + plotW / 2)}" y="${height - 10}" text-anchor="middle" font-size="12">${esc(spec.xLabel)}</text>`
  );
  parts.push(
    `<text x="16" y="${fmt(MARGIN.top + plotH / 2)}" text-anchor="middle" font-size="12" ` +
      `transform="rotate(-90 16 ${fmt(MARGIN.top + plotH / 2)})">${esc(spec.yLabel)}</text>`
  );

  // Data.
  for (const series of spec.series) {
    const points: string[] = [];
    for (let i = 0; i < series.x.length; i++) {
      const xv = series.x[i]!;
      const yv = series.y[i]!;
      if (!Number.isFinite(xv) || !Number.isFinite(yv)) continue;
      if ((spec.xLog && xv <= 0) || (spec.yLog && yv <= 0)) continue;
      points.push(`${fmt(sx(tx(xv)))},${fmt(sy(ty(yv)))}`);
    }
    if (series.markers) {
      for (const pt of points) {
        const [cx, cy] = pt.split(",");
        parts.push(`<circle cx="${cx}" cy="${cy}" r="2.5" fill="${series.color}"/>`);
      }
    } else {
      const dash = series.dash ? ` stroke-dasharray="${series.dash}"` : "";
      parts.push(
        `<polyline points="${points.join(" ")}" fill="none" stroke="${series.color}" ` +
          `stroke-width="${series.width ?? 1.5}"${dash}/>`
      );
    }
  }

  // Legend, one row per series, top-left inside the plot frame.
  spec.series.forEach((series, i) => {
    const ly = MARGIN.top + 16 + 16 * i;
    const lx = MARGIN.left + 10;
    if (series.markers) {
      parts.push(`<circle cx="${lx + 11}" cy="${ly - 4}" r="2.5" fill="${series.color}"/>`);
    } else {
      const dash = series.dash ? ` stroke-dasharray="${series.dash}"` : "";
      parts.push(
        `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" y2="${ly - 4}" stroke="${series.color}" stroke-width="2"${dash}/>`
      );
    }
    parts.push(`<text x="${lx + 28}" y="${ly}" font-size="11">${esc(series.label)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
