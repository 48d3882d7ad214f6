"""System models: potentials, forces, and classical reference dynamics.

A model bundles the mass with the smooth potential, its force, and the
first two force derivatives, plus an optional train of impulsive cosine
kicks.  The same model object drives the wavefunction integrators, the
moment-closure estimator, and the classical trajectory solver, so the
derivative callables are the single source of truth for the dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError

__all__ = [
    "KickTrain",
    "SystemModel",
    "DuffingParams",
    "KickedRotorParams",
    "duffing",
    "kicked_rotor",
    "polynomial_model",
    "free_particle",
    "harmonic_oscillator",
    "classical_trajectory",
    "typical_scales",
]

Field = Callable[[np.ndarray | float, float], np.ndarray | float]


@dataclass(frozen=True)
class KickTrain:
    """Impulsive potential ``amplitude * cos(x)`` applied every period.

    The first kick fires at ``t = 0`` and the train repeats with the
    given period.  Between kicks only the smooth part of the model acts.
    """

    period: float
    amplitude: float

    def times_in(self, t_start: float, t_final: float) -> np.ndarray:
        """Kick times in the half-open window ``[t_start, t_final)``."""
        first = math.ceil(t_start / self.period - 1e-9)
        last = math.ceil(t_final / self.period - 1e-9)
        return np.arange(first, last) * self.period

    def impulse(self, x: np.ndarray | float) -> np.ndarray | float:
        """Momentum transferred by one kick at position ``x``."""
        return self.amplitude * np.sin(x)


@dataclass(frozen=True)
class SystemModel:
    """A one-dimensional system with smooth and impulsive forcing.

    ``potential``, ``force``, ``d_force``, and ``d2_force`` all take
    ``(x, t)`` and broadcast over ``x``.  ``force`` is the negative
    potential gradient; ``d_force`` and ``d2_force`` are its first and
    second position derivatives.  ``kicks`` is None for smooth systems.
    """

    mass: float
    potential: Field
    force: Field
    d_force: Field
    d2_force: Field
    kicks: Optional[KickTrain] = None
    name: str = "custom"


@dataclass(frozen=True)
class DuffingParams:
    """Double-well parameters: ``V = b x^4 - a x^2 + lam x cos(omega t)``."""

    mass: float = 1.0
    a: float = 10.0
    b: float = 0.5
    lam: float = 10.0
    omega: float = 6.07


@dataclass(frozen=True)
class KickedRotorParams:
    """Kicked rotor parameters: free flight plus ``kappa cos(x)`` kicks."""

    mass: float = 1.0
    kappa: float = 10.0
    kick_period: float = 1.0


def duffing(params: DuffingParams = DuffingParams()) -> SystemModel:
    """Driven double-well oscillator.

    With the default parameters the static wells sit at
    ``x = +/- sqrt(a / (2 b)) ~ +/- 3.2`` and the barrier height is
    ``a^2 / (4 b) = 50``; the drive tilts the well floor periodically.
    """
    m, a, b, lam, omega = params.mass, params.a, params.b, params.lam, params.omega

    def potential(x, t):
        return b * x**4 - a * x**2 + lam * x * np.cos(omega * t)

    def force(x, t):
        return -4.0 * b * x**3 + 2.0 * a * x - lam * np.cos(omega * t)

    def d_force(x, t):
        return -12.0 * b * x**2 + 2.0 * a

    def d2_force(x, t):
        return -24.0 * b * x

    return SystemModel(
        mass=m,
        potential=potential,
        force=force,
        d_force=d_force,
        d2_force=d2_force,
        name="duffing",
    )


def kicked_rotor(params: KickedRotorParams = KickedRotorParams()) -> SystemModel:
    """Delta-kicked rotor: free evolution broken by cosine kicks."""

    def zero(x, t):
        return np.zeros_like(np.asarray(x, dtype=float))

    return SystemModel(
        mass=params.mass,
        potential=zero,
        force=zero,
        d_force=zero,
        d2_force=zero,
        kicks=KickTrain(period=params.kick_period, amplitude=params.kappa),
        name="kicked_rotor",
    )


def polynomial_model(mass: float, coefficients, name: str = "polynomial") -> SystemModel:
    """Model with a time-independent polynomial potential.

    ``coefficients`` are in increasing order of power, as accepted by
    ``numpy.polynomial.Polynomial``.
    """
    v = np.polynomial.Polynomial(coefficients)
    f = -v.deriv()
    df = f.deriv()
    d2f = df.deriv()

    def potential(x, t):
        return v(x)

    def force(x, t):
        return f(x)

    def d_force(x, t):
        return df(x)

    def d2_force(x, t):
        return d2f(x)

    return SystemModel(
        mass=mass,
        potential=potential,
        force=force,
        d_force=d_force,
        d2_force=d2_force,
        name=name,
    )


def free_particle(mass: float = 1.0) -> SystemModel:
    return polynomial_model(mass, [0.0], name="free_particle")


def harmonic_oscillator(mass: float = 1.0, omega: float = 1.0) -> SystemModel:
    return polynomial_model(mass, [0.0, 0.0, 0.5 * mass * omega**2], name="harmonic")


def classical_trajectory(
    model: SystemModel,
    x0: float,
    p0: float,
    t_final: float,
    dt: float = 1e-4,
    sample_stride: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate the classical equations of motion.

    Smooth forces use a velocity Verlet scheme with step ``dt``.  Kicked
    models are integrated exactly: free flight between kicks and an
    impulse ``amplitude * sin(x)`` at each kick, sampled once per kick
    (``dt`` and ``sample_stride`` are ignored).

    Returns ``(t, x, p)`` arrays including the initial point.

    Raises
    ------
    DivergenceError
        If the state leaves the representable range, with the message
        "trajectory diverged".
    """
    if model.kicks is not None:
        return _kicked_trajectory(model, x0, p0, t_final)

    n_full = int(math.floor(t_final / dt + 1e-9))
    remainder = t_final - n_full * dt
    if remainder < 1e-12 * max(dt, 1.0):
        remainder = 0.0

    ts = [0.0]
    xs = [x0]
    ps = [p0]
    m = model.mass
    x, p = x0, p0
    try:
        f = float(model.force(x, 0.0))
        for step in range(1, n_full + 1):
            p_half = p + 0.5 * dt * f
            x = x + dt * p_half / m
            t = step * dt
            f = float(model.force(x, t))
            p = p_half + 0.5 * dt * f
            if step % sample_stride == 0:
                if not (np.isfinite(x) and np.isfinite(p)):
                    raise DivergenceError("trajectory diverged")
                ts.append(t)
                xs.append(x)
                ps.append(p)
        if remainder > 0.0:
            # Short final step so the trajectory ends exactly at t_final.
            p_half = p + 0.5 * remainder * f
            x = x + remainder * p_half / m
            f = float(model.force(x, t_final))
            p = p_half + 0.5 * remainder * f
    except OverflowError:
        raise DivergenceError("trajectory diverged") from None
    if not (np.isfinite(x) and np.isfinite(p)):
        raise DivergenceError("trajectory diverged")
    if ts[-1] != t_final and t_final > 0.0:
        ts.append(t_final)
        xs.append(x)
        ps.append(p)
    return np.asarray(ts), np.asarray(xs), np.asarray(ps)


def _kicked_trajectory(
    model: SystemModel, x0: float, p0: float, t_final: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    kicks = model.kicks
    assert kicks is not None
    period = kicks.period
    n_kicks = int(math.floor(t_final / period + 1e-9))
    ts = np.arange(n_kicks + 1) * period
    xs = np.empty(n_kicks + 1)
    ps = np.empty(n_kicks + 1)
    x, p = x0, p0
    xs[0], ps[0] = x, p
    m = model.mass
    for i in range(1, n_kicks + 1):
        # Kick at the start of the interval, then free flight.
        p = p + kicks.amplitude * math.sin(x)
        x = x + p * period / m
        if not (np.isfinite(x) and np.isfinite(p)):
            raise DivergenceError("trajectory diverged")
        xs[i], ps[i] = x, p
    return ts, xs, ps


def typical_scales(
    model: SystemModel,
    x: np.ndarray,
    p: np.ndarray,
    t: np.ndarray,
) -> dict[str, float]:
    """Trajectory-averaged magnitudes of the force and its derivatives.

    Averages ``|F|``, ``|F'|``, ``|F''|``, and ``|p|`` over the sampled
    trajectory, excluding instants where the force magnitude falls below
    ``1e-6`` of its maximum (turning points carry no scale information
    and would otherwise drag the ratios used by regime diagnostics).
    For kicked models the kick impulse gradient is folded into the force
    scales, since between kicks the smooth force vanishes.
    """
    f = np.asarray(model.force(x, t), dtype=float)
    df = np.asarray(model.d_force(x, t), dtype=float)
    d2f = np.asarray(model.d2_force(x, t), dtype=float)
    if model.kicks is not None:
        amp = model.kicks.amplitude / model.kicks.period
        f = f + amp * np.sin(x)
        df = df + amp * np.cos(x)
        d2f = d2f - amp * np.sin(x)

    fmax = float(np.max(np.abs(f))) if f.size else 0.0
    keep = np.abs(f) >= 1e-6 * fmax if fmax > 0 else np.ones_like(f, dtype=bool)
    if not np.any(keep):
        keep = np.ones_like(f, dtype=bool)
    return {
        "force": float(np.mean(np.abs(f[keep]))),
        "d_force": float(np.mean(np.abs(df[keep]))),
        "d2_force": float(np.mean(np.abs(d2f[keep]))),
        "momentum": float(np.mean(np.abs(p[keep]))),
    }
