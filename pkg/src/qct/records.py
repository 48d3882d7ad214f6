"""Measurement records, observer bookkeeping, and record filtering.

A measurement record is the integrated observer output: increment ``i``
holds ``dy`` accumulated over ``[i dt, (i+1) dt)``, with mean part
``<X> dt`` and noise ``dW / sqrt(8 eta k)``.  Records are the only
channel through which estimators see the system, so everything here is
deliberately independent of how the record was produced.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .series import Series

__all__ = [
    "ObserverSet",
    "MeasurementRecord",
    "band_limit",
    "agreement_stats",
]


@dataclass(frozen=True)
class ObserverSet:
    """Measurement strength ``k`` shared by observers with given efficiencies.

    Each observer ``i`` receives a record carrying a fraction ``etas[i]``
    of the total measurement information; efficiencies must sum to at
    most one.  The unattributed remainder ``1 - sum(etas)`` decoheres the
    system without producing a record.
    """

    k: float
    etas: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ConfigError("measurement strength k must be nonnegative")
        if len(self.etas) == 0:
            raise ConfigError("at least one observer is required")
        if any(eta <= 0 or eta > 1 for eta in self.etas):
            raise ConfigError("every efficiency must lie in (0, 1]")
        if sum(self.etas) > 1 + 1e-12:
            raise ConfigError(f"efficiencies sum to {sum(self.etas)} > 1")

    @property
    def n_observers(self) -> int:
        return len(self.etas)

    @property
    def unassigned_efficiency(self) -> float:
        return max(0.0, 1.0 - sum(self.etas))

    def information_rate(self, observer: int) -> float:
        """The rate ``8 eta_i k`` at which observer ``i`` gains information."""
        return 8.0 * self.etas[observer] * self.k

    def record_noise_scale(self, observer: int) -> float:
        """Standard deviation of the record noise per unit sqrt(time)."""
        return 1.0 / np.sqrt(self.information_rate(observer))


@dataclass(frozen=True)
class MeasurementRecord:
    """One observer's integrated output stream.

    ``increments[i]`` is the record change over ``[i dt, (i+1) dt)``.
    """

    dt: float
    increments: np.ndarray
    observer_index: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.increments)

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    def edge_times(self) -> np.ndarray:
        """Times bounding each increment, from 0 to the duration."""
        return np.arange(self.n_steps + 1) * self.dt

    def coarse_grained(self, factor: int) -> "MeasurementRecord":
        """Sum consecutive increments into a coarser record.

        Integrated records are exactly additive, so replaying a coarse
        record is equivalent to consuming the fine one at a larger step.
        """
        if factor < 1 or self.n_steps % factor != 0:
            raise ConfigError(
                f"cannot coarse-grain {self.n_steps} steps by factor {factor}"
            )
        summed = self.increments.reshape(-1, factor).sum(axis=1)
        return replace(self, dt=self.dt * factor, increments=summed)


def band_limit(record: MeasurementRecord, window: float) -> Series:
    """Boxcar-filtered position estimate carried by a record.

    Averages ``dy / dt`` over a trailing window and reports the result at
    the window midpoint, removing the filter's group delay.  The window
    must cover at least two record steps.  On a noise-only record the
    filtered output has standard deviation ``1 / sqrt(8 eta k T)`` for
    window length ``T``.
    """
    w = int(round(window / record.dt))
    if w < 2:
        raise ConfigError("filter window must cover at least two record steps")
    if w > record.n_steps:
        raise ConfigError("filter window exceeds the record duration")
    cum = np.concatenate(([0.0], np.cumsum(record.increments)))
    values = (cum[w:] - cum[:-w]) / (w * record.dt)
    times = (np.arange(len(values)) + 0.5 * w) * record.dt
    return Series(times=times, columns=("x_filtered",), data=values[:, None])


def agreement_stats(filtered: list[Series]) -> dict:
    """Pairwise agreement between filtered observer estimates.

    All series must share a time base.  Returns symmetric matrices of
    rms and maximum absolute differences, evaluated on the overlap.
    """
    n = len(filtered)
    if n < 2:
        raise ConfigError("agreement needs at least two filtered records")
    base = filtered[0].times
    for s in filtered[1:]:
        if len(s.times) != len(base) or not np.allclose(s.times, base):
            raise ConfigError("filtered records do not share a time base")
    rms = np.zeros((n, n))
    peak = np.zeros((n, n))
    for i in range(n):
        xi = filtered[i].column("x_filtered")
        for j in range(i + 1, n):
            diff = xi - filtered[j].column("x_filtered")
            rms[i, j] = rms[j, i] = float(np.sqrt(np.mean(diff**2)))
            peak[i, j] = peak[j, i] = float(np.max(np.abs(diff)))
    return {"rms": rms, "max": peak}
