"""Reconstruct a trajectory three ways from one measurement record.

A measured harmonic oscillator provides the cleanest possible test
bench: for linear dynamics the Gaussian moment closure is exact, so a
five-number filter must agree with the full density-matrix integration
to within discretization error. We generate one record from a
wavefunction trajectory at unit efficiency (so the estimators see
everything the apparatus saw), then hand that record to

  1. the Gaussian estimator (five coupled ODEs driven by the record),
  2. the stochastic master equation on a grid,
  3. a plain low-pass filter on the raw record,

and compare everything against the trajectory that produced the record.
Takes a minute or two.
"""

import math

import numpy as np

from qct import (
    GaussianState,
    NoiseParams,
    ObserverSet,
    band_limit,
    density_from_pure,
    gaussian_state,
    harmonic_oscillator,
    run_gaussian,
    run_sme,
    run_sse,
    sized_grid,
)

HBAR = 1.0
K = 0.25
ETA = 1.0
V0 = 0.8
DT = 1e-4
T_FINAL = 4 * 2 * math.pi


def main() -> None:
    model = harmonic_oscillator(1.0, 1.0)
    n_steps = round(T_FINAL / DT)
    stride = n_steps // 200
    dx = sized_grid(V0, HBAR, 64, span=24.0)

    truth = run_sse(
        gaussian_state(64, dx, HBAR, x=1.0, v_x=V0),
        model,
        ObserverSet(k=K, etas=(ETA,)),
        n_steps * DT,
        DT,
        seed=23,
        sample_stride=stride,
    )
    record = truth.records[0]
    print(f"one record, {record.n_steps} increments over {record.duration:.1f} time units")

    estimate = run_gaussian(
        GaussianState(1.0, 0.0, V0, HBAR**2 / (4 * V0), 0.0),
        model,
        NoiseParams.from_measurement(K, ETA, HBAR),
        record,
        sample_stride=stride,
    )
    replay = run_sme(
        density_from_pure(gaussian_state(64, dx, HBAR, x=1.0, v_x=V0)),
        model, K, ETA, record, sample_stride=stride,
    )
    filtered = band_limit(record, window=2.0)

    x_true = truth.series.column("x")
    gap_gauss = np.abs(estimate.column("x") - x_true).max()
    gap_sme = np.abs(replay.series.column("x") - x_true).max()
    closure = np.abs(estimate.column("x") - replay.series.column("x")).max()
    x_at = np.interp(filtered.times, truth.series.times, x_true)
    filt_rms = np.sqrt(np.mean((filtered.column("x_filtered") - x_at) ** 2))

    print(f"\nGaussian estimate vs truth, max |dx|   {gap_gauss:.3e}")
    print(f"SME replay vs truth, max |dx|          {gap_sme:.3e}")
    print(f"Gaussian vs SME (closure error)        {closure:.3e}")
    print(f"low-pass record vs truth, rms          {filt_rms:.3e}")
    floor = 1.0 / math.sqrt(8 * ETA * K * 2.0)
    print(f"tracking-noise prediction for that rms {floor:.3e}")
    print("\nat unit efficiency the density-matrix replay reproduces the")
    print("generating state to solver precision; the Gaussian closure is off")
    print("only by its coarser stepping. Raw-record filtering is pinned to")
    print("the noise floor, three orders of magnitude worse than either.")


if __name__ == "__main__":
    main()
