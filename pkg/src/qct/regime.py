"""Classical-limit diagnostics: steady-state widths and regime inequalities.

Continuous position measurement drives a system toward classical
behavior when three things hold at once: the conditioned state stays
localized on the scale over which the force varies, the measurement
back-action noise is negligible on the scale of the deterministic
motion, and the raw record tracks the state faithfully.  Each condition
becomes a dimensionless margin (an inequality ``lhs << rhs``); the
verdict summarizes how decisively all of them hold at a typical
phase-space point of the trajectory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = [
    "Margin",
    "RegimeReport",
    "steady_state_covariance",
    "covariance_rates",
    "localization_check",
    "low_noise_check",
    "tracking_check",
    "build_report",
    "DEFAULT_MARGIN_FACTOR",
]

# How decisively "much less than" must hold before a margin counts as
# comfortably satisfied.
DEFAULT_MARGIN_FACTOR = 10.0


@dataclass(frozen=True)
class Margin:
    """One inequality ``lhs << rhs`` with its evaluation.

    ``satisfied`` is the bare comparison ``lhs < rhs``; ``None`` means
    the condition does not apply at this point (for example a
    localization ratio with zero typical force).  Only ``required``
    margins feed the verdict.
    """

    lhs: float
    rhs: float
    satisfied: bool | None
    required: bool = True
    note: str = ""

    @property
    def factor(self) -> float:
        if self.satisfied is None:
            return math.nan
        if self.lhs == 0.0:
            return math.inf
        return self.rhs / self.lhs


@dataclass(frozen=True)
class RegimeReport:
    """Steady-state widths, dimensionless ratios, margins, and verdict."""

    v_x_ss: float
    v_p_ss: float
    c_xp_ss: float
    r: float
    s: float
    s_prime: float
    xi: float
    margins: dict[str, Margin]
    verdict: str
    scales: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "v_x_ss": self.v_x_ss,
            "v_p_ss": self.v_p_ss,
            "c_xp_ss": self.c_xp_ss,
            "r": self.r,
            "s": self.s,
            "s_prime": self.s_prime,
            "xi": self.xi,
            "verdict": self.verdict,
            "scales": dict(self.scales),
            "margins": {
                name: {
                    "lhs": m.lhs,
                    "rhs": m.rhs,
                    "satisfied": m.satisfied,
                    "required": m.required,
                    "factor": None if math.isnan(m.factor) else m.factor,
                    "note": m.note,
                }
                for name, m in self.margins.items()
            },
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def steady_state_covariance(
    d_force: float, mass: float, k: float, eta: float, hbar: float
) -> tuple[float, float, float]:
    """Stable fixed point of the conditioned covariance flow.

    For constant force gradient the covariances settle to

        c_xp = dF/kbar + sqrt((dF/kbar)^2 + hbar^2/(4 eta))
        v_x  = sqrt(2 c_xp / (m kbar))
        v_p  = m v_x (kbar c_xp - dF)

    with ``kbar = 8 eta k``.  For strongly stable points (large negative
    ``dF``) the closed form suffers catastrophic cancellation, so that
    branch is evaluated in rationalized form.  At ``eta = 1`` and
    ``dF = 0`` the result is a minimum-uncertainty state.

    Returns ``(v_x, v_p, c_xp)``.
    """
    if mass <= 0:
        raise ConfigError("steady state requires positive mass")
    if k <= 0:
        raise ConfigError("steady state requires positive measurement strength")
    if not 0 < eta <= 1:
        raise ConfigError("efficiency must lie in (0, 1]")

    kbar = 8.0 * eta * k
    ratio = d_force / kbar
    root = math.sqrt(ratio * ratio + hbar * hbar / (4.0 * eta))
    if d_force >= 0:
        c_xp = ratio + root
    else:
        c_xp = (hbar * hbar / (4.0 * eta)) / (root - ratio)
    v_x = math.sqrt(2.0 * c_xp / (mass * kbar))
    v_p = mass * v_x * (kbar * c_xp - d_force)
    return v_x, v_p, c_xp


def covariance_rates(
    v_x: float, v_p: float, c_xp: float,
    d_force: float, mass: float, k: float, eta: float, hbar: float,
) -> tuple[float, float, float]:
    """Deterministic time derivatives of the covariance triple.

    Mirrors the moment-closure flow for a constant force gradient; used
    to confirm that :func:`steady_state_covariance` is an exact fixed
    point.
    """
    kbar = 8.0 * eta * k
    dv_x = 2.0 * c_xp / mass - kbar * v_x * v_x
    dv_p = 2.0 * hbar * hbar * k - kbar * c_xp * c_xp + 2.0 * d_force * c_xp
    dc = v_p / mass - kbar * v_x * c_xp + d_force * v_x
    return dv_x, dv_p, dc


def localization_check(
    scales: dict[str, float], mass: float, k: float, eta: float, hbar: float
) -> tuple[float, dict[str, Margin]]:
    """Wavepacket localization margins at the typical point.

    The ratio ``r = |F'' V_x / (2 F)|`` measures how much the packet
    width distorts the mean force; it is evaluated with the steady-state
    width at the (destabilizing) typical gradient, which is the wider of
    the two branches.  Which inequality then guarantees ``r << 1``
    depends on whether the nonlinearity is weak or strong compared to
    ``16 eta m F^2 |F'| / hbar^2``.
    """
    f = scales["force"]
    df = scales["d_force"]
    d2f = scales["d2_force"]
    margins: dict[str, Margin] = {}

    if f <= 0.0:
        margins["localization"] = Margin(
            lhs=math.nan, rhs=math.nan, satisfied=None, required=True,
            note="undefined: typical force is zero",
        )
        return math.nan, margins

    if k > 0:
        v_x_unstable = steady_state_covariance(abs(df), mass, k, eta, hbar)[0]
        r = abs(d2f * v_x_unstable / (2.0 * f))
    else:
        r = math.inf
    margins["localization_ratio"] = Margin(
        lhs=r, rhs=1.0, satisfied=bool(r < 1.0), required=False,
        note="r evaluated with the steady-state width at the unstable gradient",
    )

    weak_lhs = d2f * d2f
    weak_rhs = 16.0 * eta * mass * f * f * df / (hbar * hbar)
    weak = weak_lhs < weak_rhs
    margins["localization_weak_nonlinearity"] = Margin(
        lhs=weak_lhs, rhs=weak_rhs, satisfied=bool(weak), required=False,
        note="selects which localization bound applies",
    )

    if weak:
        rhs = 8.0 * eta * k
        lhs = math.sqrt(d2f * d2f * df / (2.0 * mass * f * f))
        margins["localization"] = Margin(
            lhs=lhs, rhs=rhs, satisfied=bool(lhs < rhs), required=True,
            note="weak-nonlinearity branch",
        )
    else:
        rhs = 8.0 * eta * k
        lhs = d2f * d2f * hbar / (4.0 * math.sqrt(eta) * mass * f * f)
        margins["localization"] = Margin(
            lhs=lhs, rhs=rhs, satisfied=bool(lhs < rhs), required=True,
            note="strong-nonlinearity branch",
        )
    return r, margins


def low_noise_check(
    scales: dict[str, float], mass: float, k: float, eta: float, hbar: float
) -> tuple[float, float, float, dict[str, Margin]]:
    """Noise-versus-dynamics margins at the typical point.

    Builds the two dimensionless actions ``s`` (energy-based) and ``s'``
    (force-gradient-based) and checks the summary window

        2 |F'| / (eta s_min)  <<  hbar k  <<  |F'| s_min / 4

    with ``s_min = min(s, s')``, which implies all the constituent
    conditions.  The window is empty when ``s_min^2 < 8 / eta``; that is
    reported as having no classical window at all.
    """
    f = scales["force"]
    df = scales["d_force"]
    p = scales["momentum"]
    margins: dict[str, Margin] = {}

    if df <= 0.0 or f <= 0.0 or p <= 0.0:
        margins["low_noise"] = Margin(
            lhs=math.nan, rhs=math.nan, satisfied=None, required=True,
            note="not useful: typical force, gradient, or momentum is zero",
        )
        return math.nan, math.nan, math.nan, margins

    energy = p * p / (2.0 * mass)
    s = energy * p / (4.0 * f * hbar)
    s_prime = mass * f * f * f / (df * df * p * hbar)
    s_min = min(s, s_prime)
    kbar = 8.0 * eta * k
    xi = hbar * kbar / df

    margins["low_noise_action"] = Margin(
        lhs=1.0 / (8.0 * math.sqrt(eta)), rhs=s, satisfied=bool(s > 1.0 / (8.0 * math.sqrt(eta))),
        required=False, note="constituent: action large in measurement units",
    )

    if s_min * s_min < 8.0 / eta:
        note = "no classical window: actions too small for any k"
        margins["low_noise_window_lower"] = Margin(
            lhs=2.0 * df / (eta * s_min), rhs=hbar * k, satisfied=False, note=note
        )
        margins["low_noise_window_upper"] = Margin(
            lhs=hbar * k, rhs=df * s_min / 4.0, satisfied=False, note=note
        )
        return s, s_prime, xi, margins

    lower = 2.0 * df / (eta * s_min)
    upper = df * s_min / 4.0
    margins["low_noise_window_lower"] = Margin(
        lhs=lower, rhs=hbar * k, satisfied=bool(lower < hbar * k),
        note="record must carry enough information",
    )
    margins["low_noise_window_upper"] = Margin(
        lhs=hbar * k, rhs=upper, satisfied=bool(hbar * k < upper),
        note="back-action must stay below the dynamics",
    )
    return s, s_prime, xi, margins


def tracking_check(
    eta: float, k: float, dx_required: float, dt_required: float
) -> tuple[float, Margin]:
    """Whether a boxcar-averaged record resolves ``dx`` within ``dt``.

    Averaging the record over a window ``dt`` leaves residual noise of
    standard deviation ``sigma_T = 1 / sqrt(8 eta k dt)``; tracking is
    faithful when that is below the required resolution, i.e.
    ``8 eta k >= 1 / (dt dx^2)``.
    """
    if dx_required <= 0 or dt_required <= 0:
        raise ConfigError("tracking check needs positive resolutions")
    sigma_t = 1.0 / math.sqrt(8.0 * eta * k * dt_required) if k > 0 else math.inf
    lhs = 1.0 / (dt_required * dx_required**2)
    rhs = 8.0 * eta * k
    margin = Margin(
        lhs=lhs, rhs=rhs, satisfied=bool(rhs >= lhs),
        note=f"filtered-record noise sigma_T={sigma_t:.3g}",
    )
    return sigma_t, margin


def build_report(
    scales: dict[str, float],
    mass: float,
    k: float,
    eta: float,
    hbar: float,
    dx_required: float | None = None,
    dt_required: float | None = None,
    margin_factor: float = DEFAULT_MARGIN_FACTOR,
) -> RegimeReport:
    """Assemble the full diagnostic report at one parameter point.

    The verdict is "classical" when every applicable required margin
    holds with at least ``margin_factor`` to spare, "non-classical" when
    any is outright violated (or no measurement window exists), and
    "marginal" in between.
    """
    if k > 0:
        df_typ = scales.get("d_force", 0.0)
        v_x_ss, v_p_ss, c_xp_ss = steady_state_covariance(-df_typ, mass, k, eta, hbar)
    else:
        v_x_ss = v_p_ss = c_xp_ss = math.nan

    r, margins = localization_check(scales, mass, k, eta, hbar)
    s, s_prime, xi, noise_margins = low_noise_check(scales, mass, k, eta, hbar)
    margins.update(noise_margins)
    if dx_required is not None and dt_required is not None:
        _, tracking = tracking_check(eta, k, dx_required, dt_required)
        margins["tracking"] = tracking

    verdict = _verdict(margins, margin_factor)
    return RegimeReport(
        v_x_ss=v_x_ss, v_p_ss=v_p_ss, c_xp_ss=c_xp_ss,
        r=r, s=s, s_prime=s_prime, xi=xi,
        margins=margins, verdict=verdict, scales=dict(scales),
    )


def _verdict(margins: dict[str, Margin], margin_factor: float) -> str:
    applicable = [
        m for m in margins.values() if m.required and m.satisfied is not None
    ]
    if not applicable:
        return "marginal"
    if any(not m.satisfied for m in applicable):
        return "non-classical"
    if all(m.factor >= margin_factor for m in applicable):
        return "classical"
    return "marginal"
