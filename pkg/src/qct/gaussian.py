"""Gaussian moment-closure estimator driven by measurement records.

The estimator propagates five numbers (two means, three covariances)
instead of a grid.  Closing the moment hierarchy at second order makes
the covariance flow deterministic: only the means feel the record.  The
same stepper serves two regimes distinguished purely by parameters:

- quantum filtering: ``g_m = 8 eta k`` and ``g_p = hbar^2 k``;
- classical estimation: any ``g_m`` (record quality) and ``g_p``
  (momentum diffusion) satisfying ``hbar^2 g_m <= 8 g_p``.

A quantum and a classical estimator with numerically equal parameters
perform bit-identical updates, which is the operational statement that
a continuously observed system in this regime cannot reveal whether
its dynamics are quantum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError
from .models import SystemModel
from .records import MeasurementRecord
from .series import GAUSSIAN_FIELDS, Series

__all__ = [
    "GaussianState",
    "NoiseParams",
    "step_gaussian",
    "kick_gaussian",
    "run_gaussian",
    "ensemble_decomposition",
]


@dataclass(frozen=True)
class GaussianState:
    """Means and covariances of a Gaussian phase-space estimate."""

    x: float
    p: float
    v_x: float
    v_p: float
    c_xp: float

    def __post_init__(self) -> None:
        if not all(map(math.isfinite, (self.x, self.p, self.v_x, self.v_p, self.c_xp))):
            raise DivergenceError("estimator diverged")
        if self.v_x <= 0 or self.v_p < 0 or self.v_x * self.v_p - self.c_xp**2 < 0:
            raise ConfigError(
                "covariance matrix must be positive semidefinite with v_x > 0: "
                f"v_x={self.v_x}, v_p={self.v_p}, c_xp={self.c_xp}"
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.p, self.v_x, self.v_p, self.c_xp])


@dataclass(frozen=True)
class NoiseParams:
    """Information rate ``g_m`` and momentum diffusion ``g_p``.

    ``g_m`` scales how sharply the record resolves position; ``g_p`` is
    the back-action (or environmental) momentum diffusion.  A parameter
    pair is realizable by a quantum measurement with Planck constant
    ``hbar`` when ``hbar^2 g_m <= 8 g_p``.
    """

    g_m: float
    g_p: float

    def __post_init__(self) -> None:
        if self.g_m < 0 or self.g_p < 0:
            raise ConfigError("noise rates must be nonnegative")

    @classmethod
    def from_measurement(cls, k: float, eta: float, hbar: float) -> "NoiseParams":
        """Rates induced by position measurement of strength ``k``."""
        return cls(g_m=8.0 * eta * k, g_p=hbar**2 * k)

    def realizable(self, hbar: float) -> bool:
        return hbar**2 * self.g_m <= 8.0 * self.g_p * (1 + 1e-12)


def step_gaussian(
    state: GaussianState,
    model: SystemModel,
    noise: NoiseParams,
    dy: float,
    dt: float,
    t: float = 0.0,
) -> GaussianState:
    """One Ito-Euler update conditioned on the record increment ``dy``.

    The innovation ``dW = sqrt(g_m) (dy - x dt)`` drives the means; the
    covariances follow their deterministic flow.  The force enters
    through its value and second derivative at the mean (the closure's
    surviving curvature correction) and the first derivative shears the
    covariances.
    """
    m = model.mass
    x, p, v_x, v_p, c_xp = state.x, state.p, state.v_x, state.v_p, state.c_xp
    g_m, g_p = noise.g_m, noise.g_p

    try:
        f = float(model.force(x, t))
        df = float(model.d_force(x, t))
        d2f = float(model.d2_force(x, t))

        dw = math.sqrt(g_m) * (dy - x * dt)
        root = math.sqrt(g_m)

        x_new = x + (p / m) * dt + root * v_x * dw
        p_new = p + (f + 0.5 * v_x * d2f) * dt + root * c_xp * dw
        v_x_new = v_x + (2.0 * c_xp / m - g_m * v_x**2) * dt
        v_p_new = v_p + (2.0 * g_p - g_m * c_xp**2 + 2.0 * df * c_xp) * dt
        c_new = c_xp + (v_p / m - g_m * v_x * c_xp + df * v_x) * dt
    except OverflowError:
        raise DivergenceError(f"estimator diverged at t={t}") from None

    if not all(map(math.isfinite, (x_new, p_new, v_x_new, v_p_new, c_new))):
        raise DivergenceError("estimator diverged")
    if v_x_new <= 0 or v_p_new < 0 or v_x_new * v_p_new - c_new**2 < 0:
        raise DivergenceError(
            f"estimator diverged: covariance lost positive-definiteness at t={t}"
        )
    return GaussianState(x_new, p_new, v_x_new, v_p_new, c_new)


def kick_gaussian(state: GaussianState, model: SystemModel) -> GaussianState:
    """Apply one impulsive kick to the estimate.

    The mean impulse is smeared by the position variance to the same
    order as the continuous closure; the covariances shear through the
    impulse gradient at the mean.
    """
    kicks = model.kicks
    if kicks is None:
        return state
    amp = kicks.amplitude
    s = math.sin(state.x)
    g = amp * math.cos(state.x)
    p_new = state.p + amp * s * (1.0 - 0.5 * state.v_x)
    c_new = state.c_xp + g * state.v_x
    v_p_new = state.v_p + 2.0 * g * state.c_xp + g * g * state.v_x
    return GaussianState(state.x, p_new, state.v_x, v_p_new, c_new)


def run_gaussian(
    initial: GaussianState,
    model: SystemModel,
    noise: NoiseParams,
    record: MeasurementRecord,
    t_start: float = 0.0,
    sample_stride: int = 1,
) -> Series:
    """Track a full record, sampling the estimate every ``sample_stride`` steps.

    The estimator consumes the record at its native resolution (one
    Ito-Euler step per increment).  Kicks fire at the start of the step
    containing each kick time, matching the convention of the reference
    classical dynamics.  The run is deterministic: identical inputs give
    bitwise identical output.
    """
    dt = record.dt
    n = record.n_steps
    kick_steps = _kick_step_indices(model, t_start, dt, n)

    sampled_rows = [initial.as_array()]
    sampled_times = [t_start]
    state = initial
    inc = record.increments
    for i in range(n):
        if i in kick_steps:
            state = kick_gaussian(state, model)
        state = step_gaussian(state, model, noise, float(inc[i]), dt, t_start + i * dt)
        if (i + 1) % sample_stride == 0 or i == n - 1:
            sampled_rows.append(state.as_array())
            sampled_times.append(t_start + (i + 1) * dt)

    return Series(
        times=np.asarray(sampled_times),
        columns=GAUSSIAN_FIELDS,
        data=np.asarray(sampled_rows),
    )


def _kick_step_indices(model: SystemModel, t_start: float, dt: float, n_steps: int) -> set:
    if model.kicks is None:
        return set()
    indices = set()
    for t_kick in model.kicks.times_in(t_start, t_start + n_steps * dt):
        idx = int(round((t_kick - t_start) / dt))
        if abs(t_start + idx * dt - t_kick) > 1e-6 * dt:
            raise ConfigError("kick times must align with record steps")
        if 0 <= idx < n_steps:
            indices.add(idx)
    return indices


def unconditioned_reference(
    initial: GaussianState,
    model: SystemModel,
    noise: NoiseParams,
    dt: float,
    n_steps: int,
    t_start: float = 0.0,
    sample_stride: int = 1,
) -> Series:
    """Moment flow with the record ignored (``g_m = 0``).

    This is the evolution of the ensemble-level covariances: diffusion
    pumps momentum at rate ``2 g_p`` and nothing contracts the spread.
    Stepping matches :func:`run_gaussian` so the two can be compared
    without scheme mismatch.
    """
    blind = NoiseParams(g_m=0.0, g_p=noise.g_p)
    record = MeasurementRecord(dt=dt, increments=np.zeros(n_steps))
    return run_gaussian(initial, model, blind, record, t_start, sample_stride)


def ensemble_decomposition(
    runs: list[Series],
    reference: Series,
) -> dict:
    """Split ensemble covariances into tracked spread plus mean scatter.

    For an ensemble of conditioned estimates, the total covariance of
    the underlying distribution decomposes as the average tracked
    covariance plus the covariance of the tracked means.  Both sides
    evolve identically when the closure is exact, so the residual
    against the unconditioned reference measures consistency.

    Returns the reconstruction, the reference, pointwise standard
    errors, and the worst absolute z-score over all times and channels.
    """
    if len(runs) < 2:
        raise ConfigError("ensemble decomposition needs at least two runs")
    times = runs[0].times
    for r in runs[1:]:
        if len(r.times) != len(times) or not np.allclose(r.times, times):
            raise ConfigError("ensemble runs do not share a time base")
    if len(reference.times) != len(times) or not np.allclose(reference.times, times):
        raise ConfigError("reference does not share the ensemble time base")

    xs = np.stack([r.column("x") for r in runs])
    ps = np.stack([r.column("p") for r in runs])
    n = xs.shape[0]

    # Per-run contributions whose ensemble means give the decomposition;
    # their scatter across runs provides the standard errors.
    def channel(mean_tracked, a_dev, b_dev):
        contrib = mean_tracked + a_dev * b_dev * n / (n - 1)
        est = contrib.mean(axis=0)
        se = contrib.std(axis=0, ddof=1) / np.sqrt(n)
        return est, se

    x_dev = xs - xs.mean(axis=0)
    p_dev = ps - ps.mean(axis=0)
    est_xx, se_xx = channel(np.stack([r.column("v_x") for r in runs]), x_dev, x_dev)
    est_xp, se_xp = channel(np.stack([r.column("c_xp") for r in runs]), x_dev, p_dev)
    est_pp, se_pp = channel(np.stack([r.column("v_p") for r in runs]), p_dev, p_dev)

    result = {"times": times, "sigma": {}, "reference": {}, "se": {}, "z": {}}
    worst = 0.0
    for name, est, se in (
        ("xx", est_xx, se_xx),
        ("xp", est_xp, se_xp),
        ("pp", est_pp, se_pp),
    ):
        ref = reference.column({"xx": "v_x", "xp": "c_xp", "pp": "v_p"}[name])
        z = np.zeros_like(est)
        live = se > 0
        z[live] = (est[live] - ref[live]) / se[live]
        result["sigma"][name] = est
        result["reference"][name] = ref
        result["se"][name] = se
        result["z"][name] = z
        if len(z) > 1:
            worst = max(worst, float(np.max(np.abs(z[1:]))))
    result["max_abs_z"] = worst
    return result
