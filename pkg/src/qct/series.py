"""A small time-series container shared by all integrators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Series", "GAUSSIAN_FIELDS"]

GAUSSIAN_FIELDS = ("x", "p", "v_x", "v_p", "c_xp")


@dataclass(frozen=True)
class Series:
    """Sampled scalar channels on a common time axis.

    ``data`` has shape ``(len(times), len(columns))``.  The container is
    deliberately dumb: integrators fill it, post-processing reads it.
    """

    times: np.ndarray
    columns: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.shape != (len(self.times), len(self.columns)):
            raise ValueError(
                f"data shape {self.data.shape} does not match "
                f"{len(self.times)} times x {len(self.columns)} columns"
            )

    def __len__(self) -> int:
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def tail(self, name: str) -> float:
        return float(self.column(name)[-1])
