import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { loadBundle } from "../src/bundle.js";
import { BundleError } from "../src/csv.js";
import { energyFigure, errorFigure, thin, trackingFigure, widthFigure } from "../src/figures.js";

/** Write a minimal but complete synthetic bundle and return its path. */
function syntheticBundle(withEnergy: boolean): string {
  const dir = mkdtempSync(join(tmpdir(), "qct-bundle-"));
  const t = [0, 0.1, 0.2, 0.3, 0.4];
  const col = (f: (ti: number) => number) => t.map(f);
  const rows = (cols: number[][]) =>
    t.map((_, i) => cols.map((c) => c[i]).join(",")).join("\n");

  writeFileSync(
    join(dir, "summary.json"),
    JSON.stringify({
      experiment: withEnergy ? "kicked_rotor" : "duffing",
      etas: [0.5, 0.3],
      widths: null,
    })
  );
  const tracker = (scale: number) =>
    "t,x,p,v_x,v_p,c_xp,k_xxx,k_xxp,k_xpp\n" +
    rows([
      t,
      col((ti) => scale * Math.sin(ti)),
      col(() => 0),
      col(() => 1e-6),
      col(() => 1e-6),
      col(() => 0),
      col(() => 0),
      col(() => 0),
      col(() => 0),
    ]) +
    "\n";
  writeFileSync(join(dir, "tracker_sse.csv"), tracker(1.0));
  writeFileSync(join(dir, "tracker_gaussian_eta0.5.csv"), tracker(1.01));
  writeFileSync(join(dir, "tracker_gaussian_eta0.3.csv"), tracker(0.99));
  writeFileSync(join(dir, "tracker_sme_eta0.5.csv"), tracker(1.02));
  writeFileSync(
    join(dir, "widths.csv"),
    "t,sse,gaussian_eta0.5,gaussian_eta0.3,unconditioned\n" +
      rows([t, col(() => 1e-3), col(() => 2e-3), col(() => 3e-3), col((ti) => 1e-3 * Math.exp(ti))]) +
      "\n"
  );
  writeFileSync(
    join(dir, "error_std.csv"),
    "t,gaussian_eta0.3,gaussian_eta0.5\n" + rows([t, col(() => 2e-3), col(() => 1e-3)]) + "\n"
  );
  writeFileSync(
    join(dir, "filtered_records.csv"),
    "t,eta0.5,eta0.3\n" + rows([t, col((ti) => Math.sin(ti) + 0.01), col((ti) => Math.sin(ti) - 0.01)]) + "\n"
  );
  if (withEnergy) {
    const kicks = [0, 1, 2, 3];
    const erows = (cols: number[][]) =>
      kicks.map((_, i) => cols.map((c) => c[i]).join(",")).join("\n");
    writeFileSync(
      join(dir, "energy_observed.csv"),
      "kick,energy,standard_error\n" + erows([kicks, [1, 20, 40, 60], [0.1, 1, 2, 3]]) + "\n"
    );
    writeFileSync(
      join(dir, "energy_classical.csv"),
      "kick,energy\n" + erows([kicks, [1, 22, 43, 65]]) + "\n"
    );
    writeFileSync(
      join(dir, "energy_closed.csv"),
      "kick,energy\n" + erows([kicks, [1, 15, 18, 18]]) + "\n"
    );
  }
  return dir;
}

describe("loadBundle", () => {
  it("loads trackers for every observer and optional extras", () => {
    const bundle = loadBundle(syntheticBundle(false));
    expect(bundle.summary.etas).toEqual([0.5, 0.3]);
    expect([...bundle.gaussian.keys()]).toEqual(["eta0.5", "eta0.3"]);
    expect([...bundle.sme.keys()]).toEqual(["eta0.5"]);
    expect(bundle.energy).toBeUndefined();
  });

  it("reports a missing summary clearly", () => {
    expect(() => loadBundle("/nonexistent")).toThrow(/summary.json/);
  });
});

describe("figure builders", () => {
  const duffing = loadBundle(syntheticBundle(false));
  const rotor = loadBundle(syntheticBundle(true));

  it("tracking figure overlays truth, estimates, and the filtered record", () => {
    const svg = trackingFigure(duffing);
    expect(svg).toContain("truth");
    expect(svg).toContain("estimate eta0.5");
    expect(svg).toContain("estimate eta0.3");
    expect(svg).toContain("filtered record (eta0.5)");
    expect(svg.match(/<polyline/g)!.length).toBe(4);
  });

  it("width figure uses a log axis and includes the record-free line", () => {
    const svg = widthFigure(duffing);
    expect(svg).toContain("no record");
    expect(svg).toContain("truth (SSE)");
    expect(svg).toContain("0.001");
  });

  it("error figure draws one line per error column", () => {
    const svg = errorFigure(duffing);
    expect(svg.match(/<polyline/g)!.length).toBe(2);
    expect(svg).toContain("gaussian_eta0.3");
  });

  it("energy figure needs the energy tables", () => {
    expect(() => energyFigure(duffing)).toThrow(BundleError);
    const svg = energyFigure(rotor);
    expect(svg).toContain("classical ensemble");
    expect(svg).toContain("closed quantum");
    expect(svg).toContain("measured quantum");
  });

  it("renders are deterministic", () => {
    expect(trackingFigure(duffing)).toBe(trackingFigure(duffing));
    expect(energyFigure(rotor)).toBe(energyFigure(rotor));
  });
});

describe("thin", () => {
  it("keeps short series intact", () => {
    expect(thin([1, 2, 3])).toEqual([1, 2, 3]);
  });

  it("bounds long series and keeps the final sample", () => {
    const values = Array.from({ length: 5000 }, (_, i) => i);
    const out = thin(values, 800);
    expect(out.length).toBeLessThanOrEqual(801);
    expect(out[0]).toBe(0);
    expect(out[out.length - 1]).toBe(4999);
  });
});
