import type { Bundle } from "./bundle.js";
import { BundleError, column, type Table } from "./csv.js";
import { renderFigure, type SeriesSpec } from "./svg.js";

/** Deterministic observer palette, best efficiency first. */
const OBSERVER_COLORS = ["#1f77b4", "#2ca02c", "#d62728", "#ff7f0e", "#8c564b"];
const TRUTH_COLOR = "#000000";
const REFERENCE_COLOR = "#9467bd";
const MAX_POINTS = 800;

/** Thin long series so figure files stay small; keeps the last sample. */
export function thin(values: number[], maxPoints = MAX_POINTS): number[] {
  if (values.length <= maxPoints) {
    return values;
  }
  const stride = Math.ceil(values.length / maxPoints);
  const out: number[] = [];
  for (let i = 0; i < values.length; i += stride) {
    out.push(values[i]!);
  }
  if (out[out.length - 1] !== values[values.length - 1]) {
    out.push(values[values.length - 1]!);
  }
  return out;
}

function observerColor(index: number): string {
  return OBSERVER_COLORS[index % OBSERVER_COLORS.length]!;
}

function etaTags(bundle: Bundle): string[] {
  return bundle.summary.etas.map((eta) => `eta${eta}`);
}

function line(
  table: Table,
  xName: string,
  yName: string,
  label: string,
  color: string,
  extra: Partial<SeriesSpec> = {}
): SeriesSpec {
  return {
    label,
    x: thin(column(table, xName)),
    y: thin(column(table, yName)),
    color,
    ...extra,
  };
}

/** Truth trajectory, per-observer estimates, and one filtered record. */
export function trackingFigure(bundle: Bundle): string {
  const series: SeriesSpec[] = [];
  const bestTag = etaTags(bundle)[0]!;
  series.push(
    line(bundle.filtered, "t", bestTag, `filtered record (${bestTag})`, "#bbbbbb", {
      width: 1,
    })
  );
  etaTags(bundle).forEach((tag, i) => {
    const tracker = bundle.gaussian.get(tag);
    if (!tracker) {
      throw new BundleError(`bundle has no Gaussian tracker for ${tag}`);
    }
    series.push(line(tracker, "t", "x", `estimate ${tag}`, observerColor(i)));
  });
  series.push(line(bundle.truth, "t", "x", "truth", TRUTH_COLOR, { width: 2 }));
  return renderFigure({
    title: `${bundle.summary.experiment}: tracking a continuous measurement record`,
    xLabel: "t",
    yLabel: "position",
    series,
  });
}

/** Conditioned widths for every tracker against the record-free spread. */
export function widthFigure(bundle: Bundle): string {
  const series: SeriesSpec[] = [];
  const names = bundle.widths.header.filter((name) => name !== "t");
  let observer = 0;
  for (const name of names) {
    let spec: SeriesSpec;
    if (name === "sse") {
      spec = line(bundle.widths, "t", name, "truth (SSE)", TRUTH_COLOR, { width: 2 });
    } else if (name === "unconditioned") {
      spec = line(bundle.widths, "t", name, "no record", REFERENCE_COLOR, {
        dash: "6 3",
      });
    } else {
      const color = observerColor(observer % bundle.summary.etas.length);
      const dash = name.startsWith("sme") ? "3 3" : undefined;
      spec = line(bundle.widths, "t", name, name, color, { dash });
      observer++;
    }
    series.push(spec);
  }
  return renderFigure({
    title: `${bundle.summary.experiment}: packet width with and without the record`,
    xLabel: "t",
    yLabel: "sqrt(v_x)",
    series,
    yLog: true,
  });
}

/** Per-observer estimation error, worst efficiency on top. */
export function errorFigure(bundle: Bundle): string {
  const series: SeriesSpec[] = [];
  const tags = etaTags(bundle);
  const names = bundle.errorStd.header.filter((name) => name !== "t");
  for (const name of names) {
    const tagIndex = tags.findIndex((tag) => name.endsWith(tag));
    const color = observerColor(tagIndex < 0 ? tags.length : tagIndex);
    const dash = name.startsWith("sme") ? "3 3" : undefined;
    series.push(line(bundle.errorStd, "t", name, name, color, { dash }));
  }
  return renderFigure({
    title: `${bundle.summary.experiment}: estimation error per observer`,
    xLabel: "t",
    yLabel: "error std",
    series,
  });
}

/** Kinetic energy per kick: closed, classical, and measured ensembles. */
export function energyFigure(bundle: Bundle): string {
  if (!bundle.energy) {
    throw new BundleError(`${bundle.dir} has no energy study tables`);
  }
  const series: SeriesSpec[] = [
    line(bundle.energy.classical, "kick", "energy", "classical ensemble", TRUTH_COLOR),
    line(bundle.energy.closed, "kick", "energy", "closed quantum", "#d62728", {
      dash: "6 3",
    }),
    {
      label: "measured quantum",
      x: column(bundle.energy.observed, "kick"),
      y: column(bundle.energy.observed, "energy"),
      color: "#1f77b4",
      markers: true,
    },
  ];
  return renderFigure({
    title: `${bundle.summary.experiment}: measurement restores classical heating`,
    xLabel: "kick",
    yLabel: "kinetic energy",
    series,
    xLog: true,
    yLog: true,
  });
}
