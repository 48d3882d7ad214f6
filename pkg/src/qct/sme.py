"""Conditioned density-matrix integrator driven by a measurement record.

An observer who sees only channel ``i`` of a monitored system holds a
density matrix, not a wavefunction: the channels they cannot see leave
behind decoherence.  Conditioned on the record ``dr`` their state obeys

    drho = -(i/hbar) [H, rho] dt - k [X, [X, rho]] dt
           + sqrt(2 eta k) (X_c rho + rho X_c) dV,

with ``X_c = X - Tr[rho X]`` and the innovation
``dV = sqrt(8 eta k) (dr - Tr[rho X] dt)`` reconstructed from the raw
record increment.  The full double commutator carries the total
measurement strength ``k``; only the observed fraction ``eta`` of it is
compensated by conditioning.

The step mirrors the wavefunction integrator: kicks, then a Strang
split of kinetic half steps around the potential residual and the
measurement update, everything expressed on the moving frame carried by
:class:`~qct.grid.DensityState`.  The measurement update is applied in
completely positive form rather than as the expanded Ito increment: the
one-sided factor ``g = exp(-2 eta k xi_c^2 dt + sqrt(2 eta k) xi_c dV)``
multiplies the kernel on both indices (``g rho g`` is an update by a
positive operator), and the unobserved remainder of the back-action is
the Hadamard factor ``exp(-(1 - eta) k (xi - xi')^2 dt)``, a positive
semidefinite Gaussian kernel.  Expanding the product to first order in
``dt`` recovers the equation above, so positivity survives any step
size and the equation is matched to the same order as an Ito scheme.

Trace bookkeeping doubles as a step-size guard.  The trace of the
exponential update carries the record likelihood, which fluctuates
with the innovation even for a perfectly resolved step, so the guard
checks the predictable part instead: the trace of ``rho`` under the
deterministic factor ``exp(-4 eta k xi_c^2 dt)`` deviates from one by
about ``4 eta k v_x dt``, and a deviation beyond 1e-3 means the step
cannot resolve the measurement.  A separate floor catches outright
collapse of the conditioned weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft

from .errors import ConfigError, StateInvalidError, StepSizeError
from .grid import (
    CUMULANT_FIELDS,
    Cumulants,
    DensityState,
    RECENTER_TRIGGER_POINTS,
    density_moments,
    grid_momenta,
    grid_offsets,
    recenter_density,
)
from .models import SystemModel
from .records import MeasurementRecord
from .series import Series

__all__ = ["SMEResult", "error_std", "run_sme", "step_sme"]

_TRACE_TOLERANCE = 1e-3
_TRACE_FLOOR = 1e-12
_EIGENVALUE_FLOOR = -1e-4


class _DensityPropagator:
    """Precomputed factors for repeated density steps on one grid."""

    def __init__(
        self,
        n_points: int,
        dx: float,
        hbar: float,
        model: SystemModel,
        k: float,
        eta: float,
        dt: float,
    ) -> None:
        if k < 0.0:
            raise ConfigError("measurement strength k must be nonnegative")
        if not 0.0 <= eta <= 1.0:
            raise ConfigError("observer efficiency must lie in [0, 1]")
        self.dx = dx
        self.hbar = hbar
        self.model = model
        self.k = k
        self.eta = eta
        self.dt = dt
        self.xi = grid_offsets(n_points, dx)
        pk = grid_momenta(n_points, dx, hbar)
        half = np.exp(pk**2 * (-0.25j * dt / (model.mass * hbar)))
        # Adjacent half steps of consecutive uninterrupted steps merge
        # into one full application of the same operator product.  Both
        # sides of the conjugation are folded into one precomputed
        # matrix so the hot loop multiplies once.
        self.half_kinetic = np.outer(half, half.conj())
        self.full_kinetic = self.half_kinetic * self.half_kinetic
        self.noise_gain = math.sqrt(8.0 * eta * k)
        leak = (1.0 - eta) * k
        if k > 0.0 and leak > 0.0:
            gap = self.xi[:, None] - self.xi[None, :]
            self.kernel = np.exp(-leak * gap**2 * dt)
        else:
            self.kernel = None

    def kinetic(self, m: np.ndarray, phase: np.ndarray) -> np.ndarray:
        """Conjugate by a momentum-diagonal unitary, folded into ``phase``."""
        m = scipy.fft.fft(scipy.fft.ifft(m, axis=1, overwrite_x=True), axis=0,
                          overwrite_x=True)
        np.multiply(m, phase, out=m)
        return scipy.fft.fft(scipy.fft.ifft(m, axis=0, overwrite_x=True), axis=1,
                             overwrite_x=True)

    def inner(
        self, m: np.ndarray, x_bar: float, p_bar: float, t: float, dr: float
    ) -> tuple[np.ndarray, float, float]:
        """Potential residual and measurement update between kinetic steps.

        Returns the updated kernel, the new carrier momentum, and the
        packet mean on the grid (a free byproduct, used for recenter
        triggers).  The kernel is modified in place.
        """
        model = self.model
        dt = self.dt
        xi = self.xi
        t_mid = t + 0.5 * dt
        f_bar = float(model.force(x_bar, t_mid))
        residual = (
            np.asarray(model.potential(x_bar + xi, t_mid))
            - float(model.potential(x_bar, t_mid))
            + f_bar * xi
        )
        row = np.exp(residual * (-1j * dt / self.hbar)) if np.any(residual) else None
        p_bar = p_bar + f_bar * dt

        prob = m.diagonal().real * self.dx
        mu = float(prob @ xi)
        if self.k > 0.0:
            xi_c = xi - mu
            # The guard uses the record-free part of the update: the
            # full trace also carries the likelihood of the innovation,
            # which fluctuates at this order even for a resolved step.
            drift = xi_c**2 * (-2.0 * self.eta * self.k * dt)
            deviation = abs(float(prob @ np.exp(2.0 * drift)) - 1.0)
            if deviation > _TRACE_TOLERANCE:
                raise StepSizeError(
                    f"step too large: trace deviated by {deviation:.3e} at t={t:.6g}"
                )
            dv = self.noise_gain * (dr - (x_bar + mu) * dt)
            expo = drift + xi_c * (math.sqrt(2.0 * self.eta * self.k) * dv)
            shift = expo.max()
            g = np.exp(expo - shift)
            if row is None:
                row = g.astype(complex)
                col = row.conj()
            else:
                col = row.conj() * g
                row = row * g
            np.multiply(m, row[:, None], out=m)
            np.multiply(m, col[None, :], out=m)
            if self.kernel is not None:
                np.multiply(m, self.kernel, out=m)
            trace_shifted = float(np.sum(m.diagonal().real)) * self.dx
            if trace_shifted <= 0.0:
                # The exponent spread exceeded the floating-point range,
                # which only happens when the increment is wildly
                # inconsistent with the state.
                raise StepSizeError(
                    f"step too large: record increment out of range at t={t:.6g}"
                )
            if math.log(trace_shifted) + 2.0 * shift < math.log(_TRACE_FLOOR):
                raise StepSizeError(
                    f"step too large: conditioned weight collapsed at t={t:.6g}"
                )
            m /= trace_shifted
        else:
            if row is not None:
                np.multiply(m, row[:, None], out=m)
                np.multiply(m, row.conj()[None, :], out=m)
            m /= float(np.sum(m.diagonal().real)) * self.dx
        return m, p_bar, mu

    def step(
        self,
        m: np.ndarray,
        x_bar: float,
        p_bar: float,
        t: float,
        dr: float,
        t_next: float | None = None,
    ) -> tuple[np.ndarray, float, float]:
        """One symmetric step: kicks, half kinetic, inner, half kinetic."""
        dt = self.dt
        mass = self.model.mass
        if t_next is None:
            t_next = t + dt

        if self.model.kicks is not None:
            for _ in self.model.kicks.times_in(t, t_next):
                m, p_bar = self._kick(m, x_bar, p_bar)

        m = self.kinetic(m.copy(), self.half_kinetic)
        x_bar = x_bar + p_bar * (0.5 * dt / mass)
        m, p_bar, _ = self.inner(m, x_bar, p_bar, t, dr)
        m = self.kinetic(m, self.half_kinetic)
        x_bar = x_bar + p_bar * (0.5 * dt / mass)
        return m, x_bar, p_bar

    def _kick(
        self, m: np.ndarray, x_bar: float, p_bar: float
    ) -> tuple[np.ndarray, float]:
        """Apply one kick, splitting it between carrier and grid."""
        kicks = self.model.kicks
        xi = self.xi
        mu = float((m.diagonal().real * self.dx) @ xi)
        center = x_bar + mu
        delta = xi - mu
        residual = kicks.amplitude * (np.cos(center + delta) - math.cos(center)) + (
            float(kicks.impulse(center)) * delta
        )
        phase = np.exp(residual * (-1j / self.hbar))
        m = phase[:, None] * m * phase.conj()[None, :]
        return m, p_bar + float(kicks.impulse(center))


@dataclass(frozen=True)
class SMEResult:
    """Sampled cumulants and the final conditioned density matrix."""

    series: Series
    final_state: DensityState


def step_sme(
    state: DensityState,
    model: SystemModel,
    k: float,
    eta: float,
    dr: float,
    dt: float,
    t: float = 0.0,
) -> DensityState:
    """Advance a conditioned density matrix through one record step.

    ``dr`` is the raw record increment for this observer's channel over
    ``[t, t + dt)``; pass ``eta = 0`` to ignore the record and recover
    the unconditioned evolution.  Raises StepSizeError ("step too
    large") when the pre-renormalization trace deviates from one by
    more than 1e-3.
    """
    if dt <= 0.0:
        raise ConfigError("dt must be positive")
    prop = _DensityPropagator(
        state.n_points, state.dx, state.hbar, model, k, eta, dt
    )
    m, x_bar, p_bar = prop.step(
        state.matrix, state.frame_center_x, state.frame_center_p, t, dr
    )
    return replace(
        state, matrix=m, frame_center_x=x_bar, frame_center_p=p_bar
    )


def run_sme(
    initial: DensityState,
    model: SystemModel,
    k: float,
    eta: float,
    record: MeasurementRecord,
    t_start: float = 0.0,
    sample_stride: int = 1,
) -> SMEResult:
    """Replay one observer's record through the conditioned evolution.

    The step size and duration come from the record itself.  Cumulants
    are sampled at ``t_start``, every ``sample_stride`` steps, and at
    the final time.  Each sample is checked for Hermiticity, trace,
    grid confinement, and positivity; an eigenvalue weight below -1e-4
    raises StateInvalidError ("positivity lost").  The frame recenters
    on this observer's own means, so different observers of the same
    system ride different frames.
    """
    if sample_stride < 1:
        raise ConfigError("sample_stride must be at least 1")
    initial.validate()
    dt = record.dt
    n_steps = record.n_steps
    prop = _DensityPropagator(
        initial.n_points, initial.dx, initial.hbar, model, k, eta, dt
    )
    dx = initial.dx
    pk = grid_momenta(initial.n_points, dx, initial.hbar)
    dp_bin = 2.0 * np.pi * initial.hbar / (initial.n_points * dx)
    trigger_x = RECENTER_TRIGGER_POINTS * dx
    trigger_p = RECENTER_TRIGGER_POINTS * dp_bin
    mass = model.mass
    kicks = model.kicks

    m = initial.matrix.copy()
    x_bar = initial.frame_center_x
    p_bar = initial.frame_center_p

    def current_state() -> DensityState:
        return replace(
            initial, matrix=m, frame_center_x=x_bar, frame_center_p=p_bar
        )

    times = [t_start]
    rows = [_checked_moments(current_state()).as_array()]
    # The trailing half kinetic of one step and the leading half of the
    # next are merged into a single full application whenever nothing
    # (sampling, a kick, or a frame recenter) has to happen between
    # them; the operator product is unchanged.
    synchronized = True
    for i in range(n_steps):
        t = t_start + i * dt
        t_next = t_start + (i + 1) * dt
        if synchronized:
            if kicks is not None:
                for _ in kicks.times_in(t, t_next):
                    m, p_bar = prop._kick(m, x_bar, p_bar)
            m = prop.kinetic(m, prop.half_kinetic)
            x_bar = x_bar + p_bar * (0.5 * dt / mass)
            synchronized = False
        m, p_bar, mu = prop.inner(m, x_bar, p_bar, t, record.increments[i])
        is_last = i + 1 == n_steps
        sampling = (i + 1) % sample_stride == 0 or is_last
        kick_next = (
            not is_last
            and kicks is not None
            and len(kicks.times_in(t_next, t_start + (i + 2) * dt)) > 0
        )
        drifted = abs(mu) > trigger_x
        if sampling or kick_next or drifted:
            m = prop.kinetic(m, prop.half_kinetic)
            x_bar = x_bar + p_bar * (0.5 * dt / mass)
            synchronized = True
            recenter = drifted
            if sampling and not recenter:
                phi = scipy.fft.fft(m, axis=0)
                prob_p = (
                    scipy.fft.ifft(phi, axis=1) * initial.n_points
                ).diagonal().real
                recenter = (
                    abs(float(prob_p @ pk) * (dx / initial.n_points)) > trigger_p
                )
            if recenter:
                state = recenter_density(current_state())
                m = state.matrix
                x_bar = state.frame_center_x
                p_bar = state.frame_center_p
            if sampling:
                times.append(t_next)
                rows.append(_checked_moments(current_state()).as_array())
        else:
            m = prop.kinetic(m, prop.full_kinetic)
            x_bar = x_bar + p_bar * (dt / mass)

    series = Series(
        times=np.asarray(times), columns=CUMULANT_FIELDS, data=np.asarray(rows)
    )
    return SMEResult(series=series, final_state=current_state())


def error_std(observer: Cumulants, true: Cumulants) -> float:
    """Excess position spread of an observer's estimate, as a length.

    The observer's state is conditioned on less information than the
    true (fully conditioned) state, so its position variance exceeds
    the true one by the mean-square estimation error; the square root
    of that excess measures how far the estimated mean wanders from the
    true mean.  Clamped at zero against roundoff.
    """
    return math.sqrt(max(0.0, observer.v_x - true.v_x))


def _checked_moments(state: DensityState) -> Cumulants:
    """Moments plus the per-sample hygiene checks."""
    state.validate(check_positivity=False)
    lowest = float(np.linalg.eigvalsh(state.matrix).min()) * state.dx
    if lowest < _EIGENVALUE_FLOOR:
        raise StateInvalidError(
            f"positivity lost: eigenvalue weight {lowest:.3e}"
        )
    return density_moments(state)
