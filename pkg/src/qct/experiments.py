"""Packaged experiment drivers: configuration, orchestration, artifacts.

Each driver runs one complete numerical experiment and writes a bundle
of plain-text artifacts into an output directory:

- ``records.csv``: the raw measurement records, one time column and one
  increment column per observer; row ``t`` holds the increments
  accumulated over ``[t, t + dt)``.
- ``tracker_*.csv``: per-time cumulants ``(t, x, p, v_x, v_p, c_xp,
  k_xxx, k_xxp, k_xpp)`` for every state tracker: the conditioned
  wavefunction (``sse``), one conditioned density matrix and one
  Gaussian estimate per observer, and the record-free reference.
  Gaussian trackers report identically zero third cumulants.
- ``widths.csv`` / ``error_std.csv`` / ``filtered_records.csv``:
  position spreads, excess estimator spreads, and band-limited record
  estimates on the shared sample grid.
- ``summary.json``: scalar statistics mirroring the tracking tables
  (rms spreads per observer and method, averaged-record deviations,
  error stds, observer agreement), plus energy-growth slopes for the
  rotor.
- ``config.json``: the exact configuration, for replays and provenance.

Runs are deterministic: the same configuration and seed produce
byte-identical artifacts.  Floats are written with ``repr``, which is
round-trip exact.  Output lands in the configured directory, or under
``$QCT_OUTPUT_DIR`` (default ``qct-output``) with one subdirectory per
experiment.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft

from .errors import ConfigError, GridLeakError
from .gaussian import (
    GaussianState,
    NoiseParams,
    run_gaussian,
    unconditioned_reference,
)
from .grid import density_from_pure, gaussian_state, sized_grid
from .models import (
    DuffingParams,
    KickedRotorParams,
    SystemModel,
    classical_trajectory,
    duffing,
    free_particle,
    harmonic_oscillator,
    kicked_rotor,
    typical_scales,
)
from .records import MeasurementRecord, ObserverSet, agreement_stats, band_limit
from .regime import (
    DEFAULT_MARGIN_FACTOR,
    RegimeReport,
    build_report,
    steady_state_covariance,
)
from .series import Series
from .sme import run_sme
from .sse import ensemble_kinetic_energy, run_sse
from .streams import initial_condition_stream

__all__ = [
    "ExperimentConfig",
    "ExperimentBundle",
    "run_duffing_experiment",
    "run_rotor_experiment",
    "analyze_regime",
    "replay_records",
    "typical_point_scales",
    "closed_rotor_energies",
    "classical_rotor_energies",
    "load_records_csv",
    "OUTPUT_DIR_ENV",
]

OUTPUT_DIR_ENV = "QCT_OUTPUT_DIR"

# Integration and replay resolutions per model, used when the config
# leaves them unset.  The replay step is coarser than the raw step
# because integrated records are exactly additive, and well below the
# scale where the density-matrix trace guard would trip.
_DEFAULT_DT = {"duffing": 2e-5, "kicked_rotor": 1e-4}
_DEFAULT_REPLAY_DT = {"duffing": 1e-4, "kicked_rotor": 1e-4}

# Wavefunction grid span in initial position sigmas.  The conditioned
# width breathes around its steady value as the force gradient changes
# sign along the trajectory, so the span must hold the widest excursion
# while the spacing still resolves the narrowest.
_DEFAULT_GRID_SPAN = {"duffing": 24.0, "kicked_rotor": 28.0}

# Density-matrix replays are an order of magnitude more expensive for
# strongly kicked models: each kick multiplies the momentum spread, and
# the grid must resolve phase-space area sigma_x * sigma_p / hbar.  The
# kicked-rotor replays are therefore opt-in.
_DEFAULT_SME_REPLAYS = {"duffing": True, "kicked_rotor": False}

# Replay grids are sized from the Gaussian width envelope: at least
# this many points per narrowest position sigma (against aliasing), and
# tails held to these many sigmas in position and momentum.
_REPLAY_ALIAS_POINTS = 3.0
_REPLAY_X_TAIL = 8.0
_REPLAY_P_TAIL = 7.0

_TRACKER_COLUMNS = ("x", "p", "v_x", "v_p", "c_xp", "k_xxx", "k_xxp", "k_xpp")

_MODEL_NAMES = ("duffing", "kicked_rotor", "harmonic", "free")


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob of an experiment run, serializable as JSON.

    ``dt``, ``replay_dt``, ``grid_span``, and ``sme_replays`` default to
    per-model values when left as ``None``; ``v_x0`` defaults to the
    steady-state conditioned variance at the initial point.  The double
    well runs for ``t_final`` time units; kicked models run for
    ``n_kicks`` kicks.  ``sample_interval`` is the time between stored
    samples and must be a whole number of integration steps.
    """

    model: str = "duffing"
    model_params: dict = field(default_factory=dict)
    hbar: float = 1e-5
    k: float = 1e5
    etas: tuple[float, ...] = (0.5, 0.3, 0.2)
    x0: float = 1.0
    p0: float = 0.0
    v_x0: float | None = None
    t_final: float = 5.0
    n_kicks: int = 30
    closed_kicks: int = 3000
    dt: float | None = None
    replay_dt: float | None = None
    sme_replays: bool | None = None
    sample_interval: float = 1e-3
    filter_window: float = 2.5e-2
    seed: int = 0
    quantum_ensemble: int = 1000
    classical_ensemble: int = 10000
    energy_hbar: float = 0.1
    energy_k: float = 10.0
    energy_dt: float = 1e-3
    energy_points: int = 512
    n_points: int = 256
    grid_span: float | None = None
    output_dir: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "etas", tuple(float(e) for e in self.etas))
        object.__setattr__(self, "model_params", dict(self.model_params))
        if self.model not in _MODEL_NAMES:
            raise ConfigError(f"unknown model {self.model!r}")
        if len(self.etas) == 0:
            raise ConfigError("at least one observer efficiency is required")
        if any(eta <= 0 or eta > 1 for eta in self.etas):
            raise ConfigError("every efficiency must lie in (0, 1]")
        if sum(self.etas) > 1 + 1e-12:
            raise ConfigError(f"efficiencies sum to {sum(self.etas)} > 1")
        if self.hbar <= 0:
            raise ConfigError("hbar must be positive")
        if self.k < 0:
            raise ConfigError("measurement strength k must be nonnegative")
        if self.v_x0 is not None and self.v_x0 <= 0:
            raise ConfigError("v_x0 must be positive")
        if self.t_final < 0:
            raise ConfigError("t_final must be nonnegative")
        if self.n_kicks < 0 or self.closed_kicks < 0:
            raise ConfigError("kick counts must be nonnegative")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.replay_dt is not None and self.replay_dt <= 0:
            raise ConfigError("replay_dt must be positive")
        if self.sample_interval <= 0:
            raise ConfigError("sample_interval must be positive")
        if self.filter_window <= 0:
            raise ConfigError("filter_window must be positive")
        if self.quantum_ensemble < 1 or self.classical_ensemble < 1:
            raise ConfigError("ensemble sizes must be at least 1")
        if self.energy_hbar <= 0 or self.energy_dt <= 0:
            raise ConfigError("energy study needs positive hbar and dt")
        if self.energy_k <= 0:
            raise ConfigError("energy study needs positive measurement strength")
        if self.n_points < 8 or self.energy_points < 8:
            raise ConfigError("grids need at least 8 points")
        if self.grid_span is not None and self.grid_span <= 0:
            raise ConfigError("grid_span must be positive")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["etas"] = list(self.etas)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class ExperimentBundle:
    """Artifacts of one run: file paths plus the in-memory time series."""

    output_dir: Path
    paths: dict[str, Path]
    summary: dict
    series: dict[str, Series]


def _build_model(name: str, params: dict) -> SystemModel:
    try:
        if name == "duffing":
            return duffing(DuffingParams(**params))
        if name == "kicked_rotor":
            return kicked_rotor(KickedRotorParams(**params))
        if name == "harmonic":
            return harmonic_oscillator(**params)
        if name == "free":
            return free_particle(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for model {name!r}: {exc}") from None
    raise ConfigError(f"unknown model {name!r}")


def _resolved_dt(config: ExperimentConfig) -> float:
    if config.dt is not None:
        return config.dt
    return _DEFAULT_DT.get(config.model, 1e-4)


def _sample_stride(interval: float, dt: float) -> int:
    """Steps per stored sample; the interval must be a whole number of steps."""
    ratio = interval / dt
    stride = round(ratio)
    if stride < 1 or abs(ratio - stride) > 1e-6 * max(1.0, stride):
        raise ConfigError(
            f"sample interval {interval:g} is not a whole number of {dt:g} steps"
        )
    return stride


def _replay_factor(config: ExperimentConfig, dt: float, stride: int) -> int:
    """Coarse-graining factor from the raw record to the replay record."""
    if config.replay_dt is None:
        target = _DEFAULT_REPLAY_DT.get(config.model, dt)
        best = 1
        for f in range(1, stride + 1):
            if stride % f == 0 and f * dt <= target * (1 + 1e-9):
                best = f
        return best
    ratio = config.replay_dt / dt
    factor = round(ratio)
    if factor < 1 or abs(ratio - factor) > 1e-6 * max(1.0, factor):
        raise ConfigError("replay_dt must be a whole multiple of dt")
    if stride % factor != 0:
        raise ConfigError("replay_dt must divide the sample interval")
    return factor


def _initial_width(config: ExperimentConfig, model: SystemModel) -> float:
    if config.v_x0 is not None:
        return config.v_x0
    if config.k <= 0:
        raise ConfigError("v_x0 is required when k is zero")
    d_force = float(model.d_force(config.x0, 0.0))
    return steady_state_covariance(d_force, model.mass, config.k, 1.0, config.hbar)[0]


def _grid_span(config: ExperimentConfig) -> float:
    if config.grid_span is not None:
        return config.grid_span
    return _DEFAULT_GRID_SPAN.get(config.model, 40.0)


def _sme_enabled(config: ExperimentConfig) -> bool:
    if config.sme_replays is not None:
        return config.sme_replays
    return _DEFAULT_SME_REPLAYS.get(config.model, True)


def _tag(eta: float) -> str:
    return f"eta{eta:g}"


def _resolve_output_dir(config: ExperimentConfig, experiment: str) -> Path:
    """Explicit directory as-is; otherwise env-var base plus experiment name."""
    if config.output_dir is not None:
        out = Path(config.output_dir)
    else:
        out = Path(os.environ.get(OUTPUT_DIR_ENV, "qct-output")) / experiment
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header: tuple[str, ...], columns: list[np.ndarray]) -> None:
    """Comma-separated columns with repr floats (round-trip exact)."""
    if columns and any(len(c) != len(columns[0]) for c in columns):
        raise ValueError("csv columns differ in length")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        if not columns:
            return
        for row in zip(*columns):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _write_tracker(path: Path, series: Series) -> None:
    columns = [np.asarray(series.times, dtype=float)]
    zeros = np.zeros(len(series))
    for name in _TRACKER_COLUMNS:
        columns.append(series.column(name) if name in series.columns else zeros)
    _write_csv(path, ("t",) + _TRACKER_COLUMNS, columns)


def _write_records(path: Path, records: list[MeasurementRecord]) -> None:
    header = ("t",) + tuple(f"dr_{i + 1}" for i in range(len(records)))
    if not records or records[0].n_steps == 0:
        _write_csv(path, header, [])
        return
    t = np.arange(records[0].n_steps) * records[0].dt
    _write_csv(path, header, [t] + [np.asarray(r.increments) for r in records])


def load_records_csv(path: str | Path) -> list[MeasurementRecord]:
    """Read a ``records.csv`` file back into per-observer records."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
    except OSError as exc:
        raise ConfigError(f"cannot read records file: {exc}") from None
    if header[:1] != ["t"] or any(
        name != f"dr_{i + 1}" for i, name in enumerate(header[1:])
    ):
        raise ConfigError(f"{path.name} is not a records file")
    if len(header) < 2:
        raise ConfigError("records file has no observer columns")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0 or data.shape[0] < 2:
        raise ConfigError("records file needs at least two steps")
    t = data[:, 0]
    dt = float(t[1] - t[0])
    if dt <= 0 or not np.allclose(np.diff(t), dt, rtol=1e-6, atol=0.0):
        raise ConfigError("records file time axis is not uniform")
    return [
        MeasurementRecord(dt=dt, increments=np.ascontiguousarray(data[:, j + 1]),
                          observer_index=j)
        for j in range(len(header) - 1)
    ]


def _subsample(series: Series, stride: int) -> Series:
    """Rows at every ``stride`` steps plus the final row."""
    if stride == 1 or len(series) == 0:
        return series
    last = len(series) - 1
    idx = list(range(0, len(series), stride))
    if idx[-1] != last:
        idx.append(last)
    return Series(
        times=series.times[idx], columns=series.columns, data=series.data[idx]
    )


def _check_alignment(base: Series, other: Series) -> None:
    if len(base.times) != len(other.times) or not np.allclose(
        base.times, other.times, rtol=0.0, atol=1e-9
    ):
        raise ConfigError("trackers fell out of time alignment")


def _next_power_of_two(n: int) -> int:
    return 1 << max(3, (n - 1).bit_length())


def _replay_grid(envelope: Series, hbar: float) -> tuple[int, float]:
    """Grid size and spacing for a density-matrix replay.

    Sized from the Gaussian width envelope of the same record: the
    spacing resolves the narrowest position sigma and the fastest
    momentum-induced phase oscillation, and the span holds the widest
    excursion with room for tails.
    """
    v_x = envelope.column("v_x")
    v_p = envelope.column("v_p")
    sigma_x_min = math.sqrt(float(v_x.min()))
    sigma_x_max = math.sqrt(float(v_x.max()))
    sigma_p_max = math.sqrt(float(v_p.max()))
    dx = min(
        sigma_x_min / _REPLAY_ALIAS_POINTS,
        math.pi * hbar / (_REPLAY_P_TAIL * sigma_p_max),
    )
    half_span = _REPLAY_X_TAIL * sigma_x_max
    n = _next_power_of_two(math.ceil(2.0 * half_span / dx))
    return n, 2.0 * half_span / n


def _width_rms(series: Series) -> float:
    return float(np.sqrt(np.mean(series.column("v_x"))))


def _error_std_series(tracked: Series, truth: Series) -> np.ndarray:
    """Pointwise excess position spread of a less-informed tracker."""
    gap = tracked.column("v_x") - truth.column("v_x")
    return np.sqrt(np.maximum(0.0, gap))


def _clean(value):
    """Replace non-finite floats with None for strict JSON."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def _write_summary(path: Path, summary: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")


def _tracking_run(
    config: ExperimentConfig,
    model: SystemModel,
    dt: float,
    t_final: float,
    out_dir: Path,
) -> tuple[dict[str, Path], dict[str, Series], dict]:
    """The shared tracking pipeline: one trajectory, every tracker.

    Integrates the conditioned wavefunction with all observers attached,
    then replays each observer's record through a Gaussian estimator
    (and optionally a density-matrix integrator on an envelope-sized
    grid), band-limits the raw records, and reduces everything to the
    summary statistics.
    """
    if config.k <= 0:
        raise ConfigError("tracking experiments need positive measurement strength")
    stride = _sample_stride(config.sample_interval, dt)
    factor = _replay_factor(config, dt, stride)
    replay_stride = stride // factor
    with_sme = _sme_enabled(config)

    hbar = config.hbar
    v0 = _initial_width(config, model)
    dx = sized_grid(v0, hbar, config.n_points, span=_grid_span(config))
    observers = ObserverSet(k=config.k, etas=config.etas)

    initial = gaussian_state(
        config.n_points, dx, hbar, x=config.x0, p=config.p0, v_x=v0
    )
    result = run_sse(
        initial, model, observers, t_final, dt,
        seed=config.seed, sample_stride=stride,
    )

    trackers: dict[str, Series] = {"sse": result.series}
    filtered: list[Series] = []
    sme_rms: dict[str, float] = {}
    gauss_rms: dict[str, float] = {}
    sme_err: dict[str, float] = {}
    gauss_err: dict[str, float] = {}
    record_rms: dict[str, float] = {}
    noise_floor: dict[str, float] = {}
    error_columns: dict[str, np.ndarray] = {}

    estimate0 = GaussianState(
        config.x0, config.p0, v0, hbar**2 / (4.0 * v0), 0.0
    )
    for i, eta in enumerate(config.etas):
        tag = _tag(eta)
        record = result.records[i].coarse_grained(factor)
        noise = NoiseParams.from_measurement(config.k, eta, hbar)

        full = run_gaussian(estimate0, model, noise, record, sample_stride=1)
        gauss = _subsample(full, replay_stride)
        _check_alignment(result.series, gauss)
        trackers[f"gaussian_{tag}"] = gauss
        gauss_rms[tag] = _width_rms(gauss)
        err = _error_std_series(gauss, result.series)
        error_columns[f"gaussian_{tag}"] = err
        gauss_err[tag] = float(np.sqrt(np.mean(err**2)))

        if with_sme:
            n_replay, dx_replay = _replay_grid(full, hbar)
            dens = density_from_pure(
                gaussian_state(
                    n_replay, dx_replay, hbar,
                    x=config.x0, p=config.p0, v_x=v0,
                )
            )
            sme_out = run_sme(
                dens, model, config.k, eta, record, sample_stride=replay_stride
            )
            _check_alignment(result.series, sme_out.series)
            trackers[f"sme_{tag}"] = sme_out.series
            sme_rms[tag] = _width_rms(sme_out.series)
            err = _error_std_series(sme_out.series, result.series)
            error_columns[f"sme_{tag}"] = err
            sme_err[tag] = float(np.sqrt(np.mean(err**2)))

        filt = band_limit(result.records[i], config.filter_window)
        filtered.append(filt)
        x_true = np.interp(
            filt.times, result.series.times, result.series.column("x")
        )
        record_rms[tag] = float(
            np.sqrt(np.mean((filt.column("x_filtered") - x_true) ** 2))
        )
        noise_floor[tag] = 1.0 / math.sqrt(
            8.0 * eta * config.k * config.filter_window
        )

    n_coarse = result.records[0].n_steps // factor
    reference = unconditioned_reference(
        estimate0, model, NoiseParams.from_measurement(config.k, config.etas[0], hbar),
        dt * factor, n_coarse, sample_stride=replay_stride,
    )
    _check_alignment(result.series, reference)
    trackers["unconditioned"] = reference

    paths: dict[str, Path] = {}
    paths["records"] = out_dir / "records.csv"
    _write_records(paths["records"], result.records)
    for name, series in trackers.items():
        key = f"tracker_{name}"
        paths[key] = out_dir / f"{key}.csv"
        _write_tracker(paths[key], series)

    width_columns = [np.asarray(result.series.times)]
    width_header = ["t"]
    for name, series in trackers.items():
        width_header.append(name)
        width_columns.append(np.sqrt(series.column("v_x")))
    paths["widths"] = out_dir / "widths.csv"
    _write_csv(paths["widths"], tuple(width_header), width_columns)

    err_header = ["t"] + sorted(error_columns)
    err_columns = [np.asarray(result.series.times)]
    err_columns += [error_columns[name] for name in sorted(error_columns)]
    paths["error_std"] = out_dir / "error_std.csv"
    _write_csv(paths["error_std"], tuple(err_header), err_columns)

    filt_header = ["t"] + [_tag(eta) for eta in config.etas]
    filt_columns = [np.asarray(filtered[0].times)]
    filt_columns += [f.column("x_filtered") for f in filtered]
    paths["filtered_records"] = out_dir / "filtered_records.csv"
    _write_csv(paths["filtered_records"], tuple(filt_header), filt_columns)

    agreement = None
    if len(filtered) >= 2:
        stats = agreement_stats(filtered)
        agreement = {
            "rms": stats["rms"].tolist(),
            "max": stats["max"].tolist(),
        }

    summary = {
        "widths": {
            "sse": {
                "rms": _width_rms(result.series),
                "max": float(np.sqrt(result.series.column("v_x").max())),
            },
            "sme": sme_rms if with_sme else None,
            "gaussian": gauss_rms,
        },
        "error_std": {
            "sme": sme_err if with_sme else None,
            "gaussian": gauss_err,
        },
        "averaged_record": record_rms,
        "filter_noise_floor": noise_floor,
        "agreement": agreement,
    }
    return paths, trackers, summary


def _empty_tracking_artifacts(
    config: ExperimentConfig, out_dir: Path
) -> tuple[dict[str, Path], dict[str, Series], dict]:
    """Header-only artifacts and a null summary for zero-duration runs."""
    paths: dict[str, Path] = {}
    header = ("t",) + tuple(f"dr_{i + 1}" for i in range(len(config.etas)))
    paths["records"] = out_dir / "records.csv"
    _write_csv(paths["records"], header, [])
    names = ["sse", "unconditioned"] + [
        f"{kind}_{_tag(eta)}"
        for eta in config.etas
        for kind in (("sme", "gaussian") if _sme_enabled(config) else ("gaussian",))
    ]
    for name in names:
        key = f"tracker_{name}"
        paths[key] = out_dir / f"{key}.csv"
        _write_csv(paths[key], ("t",) + _TRACKER_COLUMNS, [])
    paths["widths"] = out_dir / "widths.csv"
    _write_csv(paths["widths"], ("t",) + tuple(names), [])
    paths["error_std"] = out_dir / "error_std.csv"
    _write_csv(paths["error_std"], ("t",), [])
    paths["filtered_records"] = out_dir / "filtered_records.csv"
    _write_csv(
        paths["filtered_records"],
        ("t",) + tuple(_tag(eta) for eta in config.etas),
        [],
    )
    summary = {
        "widths": None,
        "error_std": None,
        "averaged_record": None,
        "filter_noise_floor": None,
        "agreement": None,
    }
    return paths, {}, summary


def run_duffing_experiment(config: ExperimentConfig) -> ExperimentBundle:
    """Track one driven double-well trajectory with every estimator.

    Runs the conditioned wavefunction for ``t_final`` with all observers
    attached, replays each observer's record through a density matrix
    and a Gaussian estimator, band-limits the raw records, and writes
    the artifact bundle described in the module docstring.  A zero
    ``t_final`` produces valid, empty artifacts.

    Raises the underlying integrator error (with its failing time stamp)
    if any tracker leaves its validity envelope.
    """
    if config.model != "duffing":
        raise ConfigError(
            f"the double-well experiment needs model 'duffing', got {config.model!r}"
        )
    model = _build_model(config.model, config.model_params)
    out_dir = _resolve_output_dir(config, "duffing")
    dt = _resolved_dt(config)
    if config.t_final == 0:
        paths, series, summary = _empty_tracking_artifacts(config, out_dir)
    else:
        paths, series, summary = _tracking_run(
            config, model, dt, config.t_final, out_dir
        )
    summary = {"experiment": "duffing", "etas": list(config.etas), **summary}
    paths["config"] = out_dir / "config.json"
    with open(paths["config"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config.to_json())
    paths["summary"] = out_dir / "summary.json"
    _write_summary(paths["summary"], summary)
    return ExperimentBundle(
        output_dir=out_dir, paths=paths, summary=_clean(summary), series=series
    )


def closed_rotor_energies(
    model: SystemModel,
    hbar: float,
    n_kicks: int,
    x0: float = 0.0,
    p0: float = 0.0,
    v_x0: float = 1.0,
    cells: int = 32,
    points_per_cell: int = 4096,
) -> np.ndarray:
    """Kinetic energy per kick for the unmeasured kicked model.

    Without measurement nothing holds the state together, so the moving
    grid of the conditioned integrators is the wrong tool; instead the
    wavefunction lives on a fixed box of ``cells`` spatial periods with
    periodic boundaries, and each kick period is integrated exactly: a
    position-diagonal kick phase and a momentum-diagonal free flight.
    Returns mean kinetic energies indexed by kick number, entry 0 being
    the initial state.  Raises GridLeakError if probability reaches the
    edge of the momentum grid.
    """
    if model.kicks is None:
        raise ConfigError("closed kick energies need a kicked model")
    if hbar <= 0 or v_x0 <= 0:
        raise ConfigError("closed kick energies need positive hbar and v_x0")
    if n_kicks < 0:
        raise ConfigError("kick counts must be nonnegative")
    n = cells * points_per_cell
    length = 2.0 * math.pi * cells
    grid_dx = length / n
    x = (np.arange(n) - n // 2) * grid_dx
    p = 2.0 * math.pi * hbar * scipy.fft.fftfreq(n, d=grid_dx)
    psi = np.exp(-((x - x0) ** 2) / (4.0 * v_x0) + 1j * (p0 / hbar) * x)
    psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * grid_dx)

    flight = np.exp(p**2 * (-0.5j * model.kicks.period / (model.mass * hbar)))
    kick = np.exp(np.cos(x) * (-1j * model.kicks.amplitude / hbar))
    p_sq = p**2
    edge = np.abs(p) > 0.9 * np.abs(p).max()

    energies = np.empty(n_kicks + 1)
    phi = scipy.fft.fft(psi)
    for j in range(n_kicks + 1):
        weights = np.abs(phi) ** 2
        total = float(weights.sum())
        energies[j] = float(weights @ p_sq) / total / (2.0 * model.mass)
        spilled = float(weights[edge].sum()) / total
        if spilled > 1e-8:
            raise GridLeakError(
                f"state leaking off momentum grid: edge probability "
                f"{spilled:.3e} after {j} kicks"
            )
        if j == n_kicks:
            break
        psi = scipy.fft.ifft(phi, overwrite_x=True)
        psi *= kick
        phi = scipy.fft.fft(psi, overwrite_x=True)
        phi *= flight
    return energies


def classical_rotor_energies(
    model: SystemModel,
    n_kicks: int,
    n_trajectories: int,
    x0: float = 0.0,
    p0: float = 0.0,
    v_x: float = 1.0,
    v_p: float = 1.0,
    seed: int = 0,
) -> np.ndarray:
    """Ensemble kinetic energy of the classical kicked map.

    Initial conditions are Gaussian about ``(x0, p0)`` with the given
    marginal variances, mirroring a quantum initial state.  Each kick
    adds the impulse ``amplitude * sin(x)``, followed by free flight for
    one period.  Returns energies indexed by kick number.
    """
    if model.kicks is None:
        raise ConfigError("classical kick energies need a kicked model")
    if n_trajectories < 1:
        raise ConfigError("ensemble sizes must be at least 1")
    if n_kicks < 0:
        raise ConfigError("kick counts must be nonnegative")
    rng = initial_condition_stream(seed)
    x = x0 + math.sqrt(v_x) * rng.standard_normal(n_trajectories)
    p = p0 + math.sqrt(v_p) * rng.standard_normal(n_trajectories)
    drift = model.kicks.period / model.mass
    amplitude = model.kicks.amplitude
    energies = np.empty(n_kicks + 1)
    energies[0] = float(np.mean(p**2)) / (2.0 * model.mass)
    for j in range(1, n_kicks + 1):
        p = p + amplitude * np.sin(x)
        x = x + p * drift
        energies[j] = float(np.mean(p**2)) / (2.0 * model.mass)
    return energies


def _fit_slope(energies: np.ndarray, lo: int, hi: int) -> float | None:
    """Linear energy-growth rate over kicks ``lo..hi``, if resolvable."""
    if lo < 0 or hi <= lo + 1 or len(energies) <= hi:
        return None
    kicks = np.arange(lo, hi + 1, dtype=float)
    return float(np.polyfit(kicks, energies[lo : hi + 1], 1)[0])


def _energy_study(
    config: ExperimentConfig, model: SystemModel, out_dir: Path
) -> tuple[dict[str, Path], dict]:
    """Ensemble energy growth: classical map, observed quantum, closed."""
    period = model.kicks.period
    hbar = config.energy_hbar
    v0 = steady_state_covariance(0.0, model.mass, config.energy_k, 1.0, hbar)[0]
    v_p0 = hbar**2 / (4.0 * v0)

    stride = _sample_stride(period, config.energy_dt)
    initial = gaussian_state(
        config.energy_points,
        sized_grid(v0, hbar, config.energy_points),
        hbar, x=config.x0, p=config.p0, v_x=v0,
    )
    observed = ensemble_kinetic_energy(
        initial, model, ObserverSet(k=config.energy_k, etas=(1.0,)),
        config.n_kicks * period, config.energy_dt,
        seed=config.seed, n_trajectories=config.quantum_ensemble,
        sample_stride=stride,
    )

    classical = classical_rotor_energies(
        model, max(config.n_kicks, config.closed_kicks),
        config.classical_ensemble,
        x0=config.x0, p0=config.p0, v_x=v0, v_p=v_p0, seed=config.seed,
    )
    closed = closed_rotor_energies(
        model, hbar, config.closed_kicks,
        x0=config.x0, p0=config.p0, v_x0=v0,
    )

    paths: dict[str, Path] = {}
    paths["energy_observed"] = out_dir / "energy_observed.csv"
    _write_csv(
        paths["energy_observed"],
        ("kick", "energy", "standard_error"),
        [observed.times / period, observed.column("kinetic_energy"),
         observed.column("standard_error")],
    )
    paths["energy_classical"] = out_dir / "energy_classical.csv"
    _write_csv(
        paths["energy_classical"], ("kick", "energy"),
        [np.arange(len(classical), dtype=float), classical],
    )
    paths["energy_closed"] = out_dir / "energy_closed.csv"
    _write_csv(
        paths["energy_closed"], ("kick", "energy"),
        [np.arange(len(closed), dtype=float), closed],
    )

    observed_e = observed.column("kinetic_energy")
    observed_slope = _fit_slope(observed_e, 5, config.n_kicks)
    classical_slope = _fit_slope(classical, 5, config.n_kicks)
    closed_slope = _fit_slope(closed, config.closed_kicks - 10, config.closed_kicks)
    classical_tail = _fit_slope(
        classical, config.closed_kicks - 10, config.closed_kicks
    )
    summary = {
        "observed_slope": observed_slope,
        "classical_slope_observed_window": classical_slope,
        "observed_to_classical": (
            observed_slope / classical_slope
            if observed_slope is not None and classical_slope else None
        ),
        "closed_slope": closed_slope,
        "classical_slope_closed_window": classical_tail,
        "closed_to_classical": (
            closed_slope / classical_tail
            if closed_slope is not None and classical_tail else None
        ),
        "closed_final_energy": float(closed[-1]) if len(closed) else None,
    }
    return paths, summary


def run_rotor_experiment(config: ExperimentConfig) -> ExperimentBundle:
    """Track a kicked rotor and measure its ensemble energy growth.

    The tracking half mirrors the double-well experiment over
    ``n_kicks`` kicks (density-matrix replays are opt-in here; see
    ``ExperimentConfig.sme_replays``).  The energy half compares three
    ensembles at the ``energy_hbar``/``energy_k`` point: the classical
    kicked map, continuously observed quantum trajectories, and the
    closed quantum system over ``closed_kicks`` kicks, whose growth
    stalls where the classical ensemble keeps diffusing.  A zero
    ``n_kicks`` produces valid, empty artifacts.
    """
    if config.model != "kicked_rotor":
        raise ConfigError(
            f"the rotor experiment needs model 'kicked_rotor', got {config.model!r}"
        )
    model = _build_model(config.model, config.model_params)
    out_dir = _resolve_output_dir(config, "rotor")
    dt = _resolved_dt(config)
    t_final = config.n_kicks * model.kicks.period
    if config.n_kicks == 0:
        paths, series, summary = _empty_tracking_artifacts(config, out_dir)
        for key in ("energy_observed", "energy_classical", "energy_closed"):
            paths[key] = out_dir / f"{key}.csv"
        _write_csv(paths["energy_observed"], ("kick", "energy", "standard_error"), [])
        _write_csv(paths["energy_classical"], ("kick", "energy"), [])
        _write_csv(paths["energy_closed"], ("kick", "energy"), [])
        summary = {**summary, "energy": None}
    else:
        paths, series, summary = _tracking_run(config, model, dt, t_final, out_dir)
        energy_paths, energy_summary = _energy_study(config, model, out_dir)
        paths.update(energy_paths)
        summary = {**summary, "energy": energy_summary}
    summary = {"experiment": "rotor", "etas": list(config.etas), **summary}
    paths["config"] = out_dir / "config.json"
    with open(paths["config"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config.to_json())
    paths["summary"] = out_dir / "summary.json"
    _write_summary(paths["summary"], summary)
    return ExperimentBundle(
        output_dir=out_dir, paths=paths, summary=_clean(summary), series=series
    )


def typical_point_scales(
    model: SystemModel,
    x0: float,
    p0: float,
    t_final: float,
    dt: float = 1e-4,
) -> dict[str, float]:
    """Scales of the classical trajectory from one starting point.

    Runs the classical reference trajectory and reduces it with
    :func:`qct.models.typical_scales`, adding the position spread of
    the trajectory itself as ``x_scale`` (what a tracking filter must
    resolve to count as following the motion).
    """
    t, x, p = classical_trajectory(model, x0, p0, t_final, dt)
    scales = typical_scales(model, x, p, t)
    scales["x_scale"] = float(np.std(x))
    return scales


def analyze_regime(
    config: ExperimentConfig,
    margin_factor: float = DEFAULT_MARGIN_FACTOR,
) -> RegimeReport:
    """Locate a configured system on the quantum-to-classical spectrum.

    Runs the classical trajectory from the configured initial point,
    reduces it to typical-point scales, and evaluates every margin with
    the combined efficiency of all observers.  The tracking margin asks
    whether a record averaged over the filter window resolves the
    trajectory's own position spread; it is omitted when the trajectory
    does not move.
    """
    model = _build_model(config.model, config.model_params)
    if model.kicks is not None:
        duration = config.n_kicks * model.kicks.period
    else:
        duration = config.t_final
    scales = typical_point_scales(
        model, config.x0, config.p0, duration,
        config.dt if config.dt is not None else 1e-4,
    )
    eta = sum(config.etas)
    x_scale = scales.get("x_scale", 0.0)
    return build_report(
        scales, model.mass, config.k, eta, config.hbar,
        dx_required=x_scale if x_scale > 0 else None,
        dt_required=config.filter_window if x_scale > 0 else None,
        margin_factor=margin_factor,
    )


def replay_records(
    config: ExperimentConfig, records_path: str | Path
) -> ExperimentBundle:
    """Re-run the conditioned trackers from a stored records file.

    The file must have one increment column per configured observer.
    Emits the same tracker, width, and filtered-record artifacts as the
    experiments; statistics that need the generating trajectory (error
    stds) are not available here.
    """
    model = _build_model(config.model, config.model_params)
    records = load_records_csv(records_path)
    if len(records) != len(config.etas):
        raise ConfigError(
            f"records file has {len(records)} observer columns, "
            f"config has {len(config.etas)} efficiencies"
        )
    if config.k <= 0:
        raise ConfigError("tracking experiments need positive measurement strength")
    out_dir = _resolve_output_dir(config, "replay")
    dt = records[0].dt
    stride = _sample_stride(config.sample_interval, dt)
    factor = _replay_factor(config, dt, stride)
    replay_stride = stride // factor
    with_sme = _sme_enabled(config)

    hbar = config.hbar
    v0 = _initial_width(config, model)
    estimate0 = GaussianState(config.x0, config.p0, v0, hbar**2 / (4.0 * v0), 0.0)

    trackers: dict[str, Series] = {}
    filtered: list[Series] = []
    sme_rms: dict[str, float] = {}
    gauss_rms: dict[str, float] = {}
    base: Series | None = None
    for i, eta in enumerate(config.etas):
        tag = _tag(eta)
        record = records[i].coarse_grained(factor)
        noise = NoiseParams.from_measurement(config.k, eta, hbar)
        full = run_gaussian(estimate0, model, noise, record, sample_stride=1)
        gauss = _subsample(full, replay_stride)
        if base is None:
            base = gauss
        _check_alignment(base, gauss)
        trackers[f"gaussian_{tag}"] = gauss
        gauss_rms[tag] = _width_rms(gauss)
        if with_sme:
            n_replay, dx_replay = _replay_grid(full, hbar)
            dens = density_from_pure(
                gaussian_state(
                    n_replay, dx_replay, hbar,
                    x=config.x0, p=config.p0, v_x=v0,
                )
            )
            sme_out = run_sme(
                dens, model, config.k, eta, record, sample_stride=replay_stride
            )
            _check_alignment(base, sme_out.series)
            trackers[f"sme_{tag}"] = sme_out.series
            sme_rms[tag] = _width_rms(sme_out.series)
        filtered.append(band_limit(records[i], config.filter_window))

    paths: dict[str, Path] = {}
    for name, series in trackers.items():
        key = f"tracker_{name}"
        paths[key] = out_dir / f"{key}.csv"
        _write_tracker(paths[key], series)

    width_header = ["t"] + list(trackers)
    width_columns = [np.asarray(base.times)]
    width_columns += [np.sqrt(s.column("v_x")) for s in trackers.values()]
    paths["widths"] = out_dir / "widths.csv"
    _write_csv(paths["widths"], tuple(width_header), width_columns)

    filt_header = ["t"] + [_tag(eta) for eta in config.etas]
    filt_columns = [np.asarray(filtered[0].times)]
    filt_columns += [f.column("x_filtered") for f in filtered]
    paths["filtered_records"] = out_dir / "filtered_records.csv"
    _write_csv(paths["filtered_records"], tuple(filt_header), filt_columns)

    agreement = None
    if len(filtered) >= 2:
        stats = agreement_stats(filtered)
        agreement = {"rms": stats["rms"].tolist(), "max": stats["max"].tolist()}

    summary = {
        "experiment": "replay",
        "etas": list(config.etas),
        "widths": {"sme": sme_rms if with_sme else None, "gaussian": gauss_rms},
        "agreement": agreement,
    }
    paths["config"] = out_dir / "config.json"
    with open(paths["config"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config.to_json())
    paths["summary"] = out_dir / "summary.json"
    _write_summary(paths["summary"], summary)
    return ExperimentBundle(
        output_dir=out_dir, paths=paths, summary=_clean(summary), series=trackers
    )
