"""Stochastic wavefunction integrator for continuously observed systems.

The state conditioned on every observer's record stays pure and obeys a
nonlinear stochastic Schrodinger equation.  One integration step is a
Strang split: half a kinetic step, the full potential and measurement
update, half a kinetic step.  The grid rides a classical carrier in a
velocity-Verlet pattern: kinetic half-steps advance the frame center by
``p dt / 2m``, the potential step transfers the carrier force impulse
``F(x) dt`` to the frame momentum, and only the nonlinear residue of the
potential acts on the grid.

The measurement update multiplies pointwise by

    exp(-2 k xi_c^2 dt + sqrt(2 k) xi_c dW)

and renormalizes, where ``xi_c`` is position centered on the current
mean and ``dW`` is the efficiency-weighted sum of all channel noises,
``dW = sum_i sqrt(eta_i) dW_i``.  Expanding the factor to first order in
``dt`` (with ``dW^2 = dt``) recovers the Ito form of the measurement
terms, and averaging over the noise recovers the double-commutator
master equation.  Each observer's record increment is emitted as

    dr_i = <X> dt + dW_i / sqrt(8 eta_i k).

When the efficiencies sum to less than one, the missing fraction is
carried by a phantom channel: its noise conditions the state like any
other observer's, but its record is discarded.  That is what
"information lost to the environment" means operationally, and it keeps
the state pure for any efficiency split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import ConfigError, GridLeakError, StateInvalidError, StepSizeError
from .grid import (
    CUMULANT_FIELDS,
    HEISENBERG_SLACK,
    RECENTER_TRIGGER_POINTS,
    SPILL_TOLERANCE,
    GridState,
    compute_moments,
    grid_momenta,
    grid_offsets,
    mean_grid_momentum,
    mean_offset,
    recenter,
)
from .models import SystemModel
from .records import MeasurementRecord, ObserverSet
from .series import Series
from .streams import measurement_stream, wiener_increments

__all__ = [
    "SSEResult",
    "step_sse",
    "run_sse",
    "ensemble_kinetic_energy",
    "n_noise_channels",
]

# Floor on the norm of the unnormalized post-measurement state; below it
# the record and the state are statistically incompatible at the chosen
# step size (e.g. a superposition stepped with k * separation^2 * dt >> 1).
_NORM_FLOOR = 1e-12

# The position recenter trigger is checked every step from quantities the
# step already computes; the momentum trigger needs an extra transform
# and is checked at this stride.
_MOMENTUM_CHECK_STRIDE = 16


@lru_cache(maxsize=32)
def _channels(observers: ObserverSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel sqrt(eta) weights and per-observer record noise scales.

    The phantom channel for unobserved information, if any, is last and
    has no noise scale entry.
    """
    etas = list(observers.etas)
    if observers.unassigned_efficiency > 1e-12:
        etas.append(observers.unassigned_efficiency)
    weights = np.sqrt(np.asarray(etas))
    weights.setflags(write=False)
    if observers.k > 0:
        scales = np.array(
            [observers.record_noise_scale(i) for i in range(observers.n_observers)]
        )
    else:
        scales = np.zeros(observers.n_observers)
    scales.setflags(write=False)
    return weights, scales


def n_noise_channels(observers: ObserverSet) -> int:
    """Number of independent Wiener processes one step consumes."""
    return len(_channels(observers)[0])


class _Propagator:
    """Precomputed step kernel for a fixed grid, model, and step size.

    Operates on batches: ``psi`` has shape ``(m, n)``, frame centers are
    length-``m`` vectors, and the noise block has one row per
    trajectory.  A single trajectory is the ``m = 1`` special case, so
    the stepping code exists exactly once.
    """

    def __init__(
        self,
        n_points: int,
        dx: float,
        hbar: float,
        model: SystemModel,
        observers: ObserverSet,
        dt: float,
    ) -> None:
        self.model = model
        self.observers = observers
        self.dt = dt
        self.dx = dx
        self.hbar = hbar
        self.xi = grid_offsets(n_points, dx)
        pk = grid_momenta(n_points, dx, hbar)
        self.half_kinetic = np.exp(pk**2 * (-0.25j * dt / (model.mass * hbar)))
        self.weights, self.noise_scales = _channels(observers)
        self.n_observers = observers.n_observers

    def step(
        self,
        psi: np.ndarray,
        x_bar: np.ndarray,
        p_bar: np.ndarray,
        t: float,
        dws: np.ndarray,
        t_next: float | None = None,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Advance every row one step from ``t``.

        ``t_next`` bounds the kick window; callers stepping on a fixed
        grid of times should pass it so consecutive windows partition
        the time axis exactly.  Returns ``(psi, x_bar, p_bar,
        increments)`` with one record increment row per trajectory.
        """
        model = self.model
        dt = self.dt
        xi = self.xi
        hbar = self.hbar
        mass = model.mass
        if t_next is None:
            t_next = t + dt

        if model.kicks is not None:
            for _ in model.kicks.times_in(t, t_next):
                psi, p_bar = self._kick(psi, x_bar, p_bar)

        psi = scipy.fft.ifft(self.half_kinetic * scipy.fft.fft(psi, axis=-1), axis=-1)
        x_bar = x_bar + p_bar * (0.5 * dt / mass)

        t_mid = t + 0.5 * dt
        f_bar = np.asarray(model.force(x_bar, t_mid), dtype=float)
        residual = (
            np.asarray(model.potential(x_bar[:, None] + xi, t_mid))
            - np.asarray(model.potential(x_bar, t_mid))[:, None]
            + f_bar[:, None] * xi
        )
        if np.any(residual):
            psi = psi * np.exp(residual * (-1j * dt / hbar))
        p_bar = p_bar + f_bar * dt

        # Grid-axis reductions use elementwise products with axis sums
        # instead of matrix-vector products: BLAS gemv regroups the sum
        # with the batch height, which would make trajectory values
        # depend on the ensemble chunk size.
        prob = np.abs(psi) ** 2 * self.dx
        mu = (prob * xi).sum(axis=-1)
        k = self.observers.k
        if k > 0.0:
            xi_c = xi - mu[:, None]
            dw_sum = (dws * self.weights).sum(axis=-1)
            expo = xi_c**2 * (-2.0 * k * dt) + xi_c * (np.sqrt(2.0 * k) * dw_sum[:, None])
            # Shifting the exponent only rescales the norm, which the
            # renormalization removes; it keeps exp() overflow-safe.
            shift = expo.max(axis=-1, keepdims=True)
            psi = psi * np.exp(expo - shift)
            norm_sq = np.sum(np.abs(psi) ** 2, axis=-1) * self.dx
            with np.errstate(divide="ignore"):
                log_norm = np.log(norm_sq) + 2.0 * shift[:, 0]
            if np.any(log_norm < np.log(_NORM_FLOOR)):
                raise StepSizeError(
                    f"time step too large for measurement strength at t={t:.6g}"
                )
            psi = psi / np.sqrt(norm_sq)[:, None]
            increments = (x_bar + mu)[:, None] * dt + dws[:, : self.n_observers] * self.noise_scales
        else:
            norm_sq = np.sum(np.abs(psi) ** 2, axis=-1) * self.dx
            psi = psi / np.sqrt(norm_sq)[:, None]
            increments = np.zeros((psi.shape[0], 0))

        psi = scipy.fft.ifft(self.half_kinetic * scipy.fft.fft(psi, axis=-1), axis=-1)
        x_bar = x_bar + p_bar * (0.5 * dt / mass)
        return psi, x_bar, p_bar, increments

    def _kick(
        self, psi: np.ndarray, x_bar: np.ndarray, p_bar: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Apply one impulsive kick, splitting it between carrier and grid.

        The impulse at the packet mean boosts the frame momentum; the
        grid keeps the kick potential minus its value and slope there,
        so the packet stays parked near zero grid momentum.
        """
        kicks = self.model.kicks
        prob = np.abs(psi) ** 2 * self.dx
        mu = (prob * self.xi).sum(axis=-1)
        center = x_bar + mu
        delta = self.xi - mu[:, None]
        residual = kicks.amplitude * (
            np.cos(center[:, None] + delta) - np.cos(center)[:, None]
        ) + np.asarray(kicks.impulse(center))[:, None] * delta
        psi = psi * np.exp(residual * (-1j / self.hbar))
        return psi, p_bar + kicks.impulse(center)


@dataclass(frozen=True)
class SSEResult:
    """Sampled cumulants, per-observer records, and the final state."""

    series: Series
    records: list
    final_state: GridState


def step_sse(
    state: GridState,
    model: SystemModel,
    observers: ObserverSet,
    dt: float,
    rng: np.random.Generator,
    t: float = 0.0,
) -> tuple[GridState, np.ndarray]:
    """One stochastic step, drawing one Wiener increment per channel.

    Returns the stepped state and the record increments, one per
    observer (empty when ``k = 0``: no measurement, no record).
    """
    prop = _Propagator(state.n_points, state.dx, state.hbar, model, observers, dt)
    dws = rng.standard_normal(n_noise_channels(observers)) * np.sqrt(dt)
    psi, x_bar, p_bar, inc = prop.step(
        state.amplitudes[None, :],
        np.array([state.frame_center_x]),
        np.array([state.frame_center_p]),
        t,
        dws[None, :],
    )
    new_state = replace(
        state,
        amplitudes=psi[0],
        frame_center_x=float(x_bar[0]),
        frame_center_p=float(p_bar[0]),
    )
    return new_state, inc[0]


def run_sse(
    initial: GridState,
    model: SystemModel,
    observers: ObserverSet,
    t_final: float,
    dt: float,
    seed: int,
    trajectory: int = 0,
    t_start: float = 0.0,
    sample_stride: int = 1,
) -> SSEResult:
    """Integrate one conditioned trajectory and emit its records.

    Noise channel ``c`` is drawn in one block from the stream addressed
    by ``(seed, trajectory, c)``, so the run is bitwise reproducible and
    any observer's noise can be reconstructed in isolation.  Cumulants
    are sampled at ``t_start``, every ``sample_stride`` steps, and at
    the end.  Normalization and grid confinement are checked every step;
    the uncertainty product is checked at every sample.
    """
    n_steps = _step_count(t_start, t_final, dt)
    prop = _Propagator(initial.n_points, initial.dx, initial.hbar, model, observers, dt)
    n_chan = n_noise_channels(observers)
    noise = np.empty((n_steps, n_chan))
    for c in range(n_chan):
        noise[:, c] = wiener_increments(
            measurement_stream(seed, trajectory, c), n_steps, dt
        )[:, 0]

    initial.validate()
    rows = [_checked_moments(initial).as_array()]
    times = [t_start]
    increments = np.empty((n_steps, observers.n_observers if observers.k > 0 else 0))

    state = initial
    dp_bin = 2.0 * np.pi * initial.hbar / (initial.n_points * initial.dx)
    trigger_x = RECENTER_TRIGGER_POINTS * initial.dx
    trigger_p = RECENTER_TRIGGER_POINTS * dp_bin
    for i in range(n_steps):
        t = t_start + i * dt
        psi, xb, pb, inc = prop.step(
            state.amplitudes[None, :],
            np.array([state.frame_center_x]),
            np.array([state.frame_center_p]),
            t,
            noise[i][None, :],
            t_next=t_start + (i + 1) * dt,
        )
        increments[i] = inc[0]
        state = replace(
            state, amplitudes=psi[0], frame_center_x=float(xb[0]), frame_center_p=float(pb[0])
        )
        state.validate()
        if abs(mean_offset(state)) > trigger_x or (
            (i + 1) % _MOMENTUM_CHECK_STRIDE == 0
            and abs(mean_grid_momentum(state)) > trigger_p
        ):
            state = recenter(state)
        if (i + 1) % sample_stride == 0 or i == n_steps - 1:
            rows.append(_checked_moments(state).as_array())
            times.append(t_start + (i + 1) * dt)

    records = [
        MeasurementRecord(dt=dt, increments=increments[:, c], observer_index=c)
        for c in range(increments.shape[1])
    ]
    series = Series(
        times=np.asarray(times), columns=CUMULANT_FIELDS, data=np.asarray(rows)
    )
    return SSEResult(series=series, records=records, final_state=state)


def ensemble_kinetic_energy(
    initial: GridState,
    model: SystemModel,
    observers: ObserverSet,
    t_final: float,
    dt: float,
    seed: int,
    n_trajectories: int,
    t_start: float = 0.0,
    sample_stride: int = 1,
    chunk_size: int = 64,
    hygiene_stride: int = 8,
) -> Series:
    """Mean kinetic energy ``<P^2>/2m`` over an ensemble of trajectories.

    Every trajectory starts from ``initial`` and consumes its own noise
    streams addressed by ``(seed, trajectory, channel)``, and the
    per-trajectory energies are reduced in one pass at the end, so the
    result is bitwise independent of ``chunk_size`` (which only bounds
    the working-set memory; the sample-by-trajectory energy matrix is
    kept whole).  Samples at ``t_start`` and every ``sample_stride``
    steps; returns columns ``kinetic_energy`` (ensemble mean) and
    ``standard_error``.  Grid confinement is checked every
    ``hygiene_stride`` steps and the uncertainty product at every
    sample.
    """
    if n_trajectories < 1:
        raise ConfigError("ensemble needs at least one trajectory")
    n_steps = _step_count(t_start, t_final, dt)
    prop = _Propagator(initial.n_points, initial.dx, initial.hbar, model, observers, dt)
    n_chan = n_noise_channels(observers)
    initial.validate()

    n = initial.n_points
    dx = initial.dx
    hbar = initial.hbar
    xi = prop.xi
    pk = grid_momenta(n, dx, hbar)
    dp_bin = 2.0 * np.pi * hbar / (n * dx)
    trigger_x = RECENTER_TRIGGER_POINTS * dx
    trigger_p = RECENTER_TRIGGER_POINTS * dp_bin
    edge = n // 10
    heisenberg_floor = 0.25 * hbar**2 * (1.0 - HEISENBERG_SLACK)

    sample_steps = [i for i in range(1, n_steps + 1) if i % sample_stride == 0]
    if n_steps > 0 and n_steps not in sample_steps:
        sample_steps.append(n_steps)
    times = np.concatenate(([t_start], t_start + dt * np.asarray(sample_steps, dtype=float)))
    energies = np.empty((len(times), n_trajectories))

    for chunk_start in range(0, n_trajectories, chunk_size):
        rows = min(chunk_size, n_trajectories - chunk_start)
        noise = np.empty((n_steps, rows, n_chan))
        for r in range(rows):
            for c in range(n_chan):
                noise[:, r, c] = wiener_increments(
                    measurement_stream(seed, chunk_start + r, c), n_steps, dt
                )[:, 0]

        psi = np.tile(initial.amplitudes, (rows, 1))
        x_bar = np.full(rows, initial.frame_center_x)
        p_bar = np.full(rows, initial.frame_center_p)

        cols = slice(chunk_start, chunk_start + rows)
        sample_index = 0
        _store_energy(energies, 0, cols, psi, p_bar, prop, pk, heisenberg_floor)
        for i in range(n_steps):
            t = t_start + i * dt
            psi, x_bar, p_bar, _ = prop.step(
                psi, x_bar, p_bar, t, noise[i], t_next=t_start + (i + 1) * dt
            )
            check_momentum = (i + 1) % _MOMENTUM_CHECK_STRIDE == 0
            psi, x_bar, p_bar = _recenter_rows(
                psi, x_bar, p_bar, xi, pk, hbar, dx, trigger_x,
                trigger_p if check_momentum else None,
            )
            if (i + 1) % hygiene_stride == 0 or i == n_steps - 1:
                prob = np.abs(psi) ** 2 * dx
                spill = prob[:, :edge].sum(axis=-1) + prob[:, n - edge:].sum(axis=-1)
                if np.any(spill > SPILL_TOLERANCE):
                    raise GridLeakError(
                        f"state leaking off grid: edge probability {spill.max():.3e}"
                    )
            if sample_index < len(sample_steps) and sample_steps[sample_index] == i + 1:
                sample_index += 1
                _store_energy(
                    energies, sample_index, cols, psi, p_bar, prop, pk, heisenberg_floor
                )

    mean = energies.mean(axis=1)
    if n_trajectories > 1:
        se = energies.std(axis=1, ddof=1) / math.sqrt(n_trajectories)
    else:
        se = np.zeros_like(mean)
    return Series(
        times=times,
        columns=("kinetic_energy", "standard_error"),
        data=np.column_stack([mean, se]),
    )


def _store_energy(energies, index, cols, psi, p_bar, prop, pk, heisenberg_floor):
    """Write each row's ``<P^2>/2m`` into the energy matrix at one sample."""
    dx = prop.dx
    n = psi.shape[-1]
    xi = prop.xi
    prob = np.abs(psi) ** 2 * dx
    mu = (prob * xi).sum(axis=-1)
    v_x = (prob * xi**2).sum(axis=-1) - mu**2

    phi = scipy.fft.fft(psi, axis=-1)
    prob_p = np.abs(phi) ** 2 * (dx / n)
    q_mean = (prob_p * pk).sum(axis=-1)
    q_sq = (prob_p * pk**2).sum(axis=-1)
    v_p = q_sq - q_mean**2

    u = scipy.fft.ifft((pk - q_mean[:, None]) * phi, axis=-1)
    c_xp = (psi.conj() * (xi - mu[:, None]) * u).sum(axis=-1).real * dx
    if np.any(v_x * v_p - c_xp**2 < heisenberg_floor):
        raise StateInvalidError("uncertainty product below the Heisenberg bound")

    energies[index, cols] = (p_bar**2 + 2.0 * p_bar * q_mean + q_sq) / (
        2.0 * prop.model.mass
    )


def _recenter_rows(psi, x_bar, p_bar, xi, pk, hbar, dx, trigger_x, trigger_p):
    """Recenter the rows whose mean has drifted past the trigger.

    The momentum trigger is only evaluated when ``trigger_p`` is given,
    since it costs an extra transform of the whole batch.
    """
    prob = np.abs(psi) ** 2 * dx
    mu = (prob * xi).sum(axis=-1)
    mask = np.abs(mu) > trigger_x
    if trigger_p is not None:
        phi = scipy.fft.fft(psi, axis=-1)
        prob_p = np.abs(phi) ** 2 * (dx / psi.shape[-1])
        pg = (prob_p * pk).sum(axis=-1)
        mask |= np.abs(pg) > trigger_p
    if not np.any(mask):
        return psi, x_bar, p_bar

    rows = psi[mask]
    phi = scipy.fft.fft(rows, axis=-1)
    prob_p = np.abs(phi) ** 2 * (dx / rows.shape[-1])
    pg = (prob_p * pk).sum(axis=-1)
    shift = mu[mask]
    rows = scipy.fft.ifft(np.exp(1j * np.outer(shift, pk) / hbar) * phi, axis=-1)
    rows = rows * np.exp(-1j * np.outer(pg, xi) / hbar)
    rows = rows / np.sqrt(np.sum(np.abs(rows) ** 2, axis=-1) * dx)[:, None]

    psi = psi.copy()
    x_bar = x_bar.copy()
    p_bar = p_bar.copy()
    psi[mask] = rows
    x_bar[mask] += shift
    p_bar[mask] += pg
    return psi, x_bar, p_bar


def _checked_moments(state: GridState):
    """Full cumulants with the uncertainty-product invariant enforced."""
    moments = compute_moments(state)
    bound = 0.25 * state.hbar**2 * (1.0 - HEISENBERG_SLACK)
    if moments.uncertainty_product() < bound:
        raise StateInvalidError(
            f"uncertainty product {moments.uncertainty_product():.6e} below the "
            f"Heisenberg bound for hbar={state.hbar:.3e}"
        )
    return moments


def _step_count(t_start: float, t_final: float, dt: float) -> int:
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if t_final < t_start:
        raise ConfigError("t_final must not precede t_start")
    n = int(round((t_final - t_start) / dt))
    if abs(t_start + n * dt - t_final) > 1e-9 * max(dt, abs(t_final), 1.0):
        raise ConfigError("t_final - t_start must be a whole number of steps")
    return n
