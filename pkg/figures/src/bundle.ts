import { existsSync, readFileSync } from "node:fs";
import { join } from "node:path";
import { BundleError, readTable, type Table } from "./csv.js";

/** The subset of summary.json the figures consume. */
export interface Summary {
  experiment: string;
  etas: number[];
  widths: {
    sse: { rms: number; max: number } | null;
    sme: Record<string, number> | null;
    gaussian: Record<string, number> | null;
  } | null;
  energy?: Record<string, number | null> | null;
}

/** One experiment output directory, loaded. */
export interface Bundle {
  dir: string;
  summary: Summary;
  truth: Table;
  widths: Table;
  errorStd: Table;
  filtered: Table;
  gaussian: Map<string, Table>;
  sme: Map<string, Table>;
  energy?: { observed: Table; classical: Table; closed: Table };
}

function etaTag(eta: number): string {
  // Matches the producer's f"eta{eta:g}" naming.
  return `eta${eta}`;
}

/**
 * Load the artifacts a figure needs from an experiment directory.
 *
 * Missing per-observer trackers are allowed (density-matrix replays are
 * optional); everything else is required.
 */
export function loadBundle(dir: string): Bundle {
  let summary: Summary;
  try {
    summary = JSON.parse(readFileSync(join(dir, "summary.json"), "utf8")) as Summary;
  } catch (err) {
    throw new BundleError(`cannot read ${join(dir, "summary.json")}: ${(err as Error).message}`);
  }
  if (!Array.isArray(summary.etas) || summary.etas.length === 0) {
    throw new BundleError(`${dir}: summary.json has no observer efficiencies`);
  }

  const bundle: Bundle = {
    dir,
    summary,
    truth: readTable(join(dir, "tracker_sse.csv")),
    widths: readTable(join(dir, "widths.csv")),
    errorStd: readTable(join(dir, "error_std.csv")),
    filtered: readTable(join(dir, "filtered_records.csv")),
    gaussian: new Map(),
    sme: new Map(),
  };
  for (const eta of summary.etas) {
    const tag = etaTag(eta);
    bundle.gaussian.set(tag, readTable(join(dir, `tracker_gaussian_${tag}.csv`)));
    const smePath = join(dir, `tracker_sme_${tag}.csv`);
    if (existsSync(smePath)) {
      bundle.sme.set(tag, readTable(smePath));
    }
  }

  const energyPath = join(dir, "energy_observed.csv");
  if (existsSync(energyPath)) {
    bundle.energy = {
      observed: readTable(energyPath),
      classical: readTable(join(dir, "energy_classical.csv")),
      closed: readTable(join(dir, "energy_closed.csv")),
    };
  }
  return bundle;
}
