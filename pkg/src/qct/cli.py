"""Command-line entry points for the packaged experiments.

Four subcommands mirror the drivers in :mod:`qct.experiments`:

- ``qct run-duffing``: the driven double-well tracking experiment.
- ``qct run-rotor``: the kicked-rotor tracking and energy experiment.
- ``qct analyze-regime``: evaluate the classicality margins for a
  configuration and print them as a table (or JSON with ``--json``).
- ``qct replay-records``: re-run the trackers from a stored records
  file.

Every configuration field can come from a JSON file (``--config``) or a
flag; flags win.  Output lands in ``--output-dir`` when given, otherwise
under ``$QCT_OUTPUT_DIR`` (default ``qct-output``).  On success the run
commands print a JSON object with the output directory, artifact paths,
and summary statistics, and exit 0.  Any simulation or configuration
failure prints ``{"error": <type>, "message": <text>}`` to stderr and
exits 1.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .errors import ConfigError, SimulationError
from .experiments import (
    ExperimentBundle,
    ExperimentConfig,
    analyze_regime,
    replay_records,
    run_duffing_experiment,
    run_rotor_experiment,
)
from .regime import RegimeReport

__all__ = ["main", "build_parser"]


def _etas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated efficiencies, got {text!r}"
        ) from None


def _json_object(text: str) -> dict:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc}") from None
    if not isinstance(value, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return value


# (flag, config field, argparse type, help) for every overridable field.
_FIELD_FLAGS = [
    ("--model", "model", str, "system model name"),
    ("--model-params", "model_params", _json_object,
     "model parameters as a JSON object"),
    ("--hbar", "hbar", float, "effective Planck constant"),
    ("--k", "k", float, "measurement strength"),
    ("--etas", "etas", _etas, "comma-separated observer efficiencies"),
    ("--x0", "x0", float, "initial mean position"),
    ("--p0", "p0", float, "initial mean momentum"),
    ("--v-x0", "v_x0", float,
     "initial position variance (default: steady-state value)"),
    ("--t-final", "t_final", float, "duration for smooth models"),
    ("--n-kicks", "n_kicks", int, "kick count for kicked models"),
    ("--closed-kicks", "closed_kicks", int,
     "kick count for the closed-system energy run"),
    ("--dt", "dt", float, "integration step"),
    ("--replay-dt", "replay_dt", float, "record step for estimator replays"),
    ("--sample-interval", "sample_interval", float, "time between samples"),
    ("--filter-window", "filter_window", float,
     "boxcar window for record filtering"),
    ("--seed", "seed", int, "noise seed"),
    ("--quantum-ensemble", "quantum_ensemble", int,
     "trajectories in the observed energy ensemble"),
    ("--classical-ensemble", "classical_ensemble", int,
     "trajectories in the classical energy ensemble"),
    ("--energy-hbar", "energy_hbar", float,
     "effective Planck constant for the energy study"),
    ("--energy-k", "energy_k", float,
     "measurement strength for the energy study"),
    ("--energy-dt", "energy_dt", float, "integration step for the energy study"),
    ("--energy-points", "energy_points", int,
     "grid points for the energy study"),
    ("--n-points", "n_points", int, "grid points for the tracked trajectory"),
    ("--grid-span", "grid_span", float,
     "grid span in initial position sigmas"),
    ("--output-dir", "output_dir", str, "directory for artifacts"),
]


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config", type=Path, default=None,
        help="JSON file with configuration fields (flags take precedence)",
    )
    for flag, dest, kind, text in _FIELD_FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, default=None, help=text)
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        "--sme-replays", dest="sme_replays", action="store_true", default=None,
        help="replay records through density-matrix integrators",
    )
    group.add_argument(
        "--no-sme-replays", dest="sme_replays", action="store_false",
        help="skip the density-matrix replays",
    )


def _config_from_args(args: argparse.Namespace, model: str | None) -> ExperimentConfig:
    """Merge config file and flags; flags win, then dataclass defaults."""
    merged: dict = {}
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        data = json.loads(text) if text.strip() else {}
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        merged.update(data)
    for _, dest, _, _ in _FIELD_FLAGS:
        value = getattr(args, dest)
        if value is not None:
            merged[dest] = value
    if args.sme_replays is not None:
        merged["sme_replays"] = args.sme_replays
    if model is not None:
        merged.setdefault("model", model)
    return ExperimentConfig.from_dict(merged)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qct",
        description="Simulate and track continuously measured systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    duffing = sub.add_parser(
        "run-duffing", help="track one driven double-well trajectory"
    )
    _add_config_arguments(duffing)

    rotor = sub.add_parser(
        "run-rotor", help="track a kicked rotor and measure energy growth"
    )
    _add_config_arguments(rotor)

    regime = sub.add_parser(
        "analyze-regime", help="evaluate the classicality margins"
    )
    _add_config_arguments(regime)
    regime.add_argument(
        "--margin-factor", type=float, default=10.0,
        help="slack required of every margin for a classical verdict",
    )
    regime.add_argument(
        "--json", action="store_true", help="print the report as JSON"
    )

    replay = sub.add_parser(
        "replay-records", help="re-run the trackers from a records file"
    )
    _add_config_arguments(replay)
    replay.add_argument(
        "--records", type=Path, required=True, help="records.csv to replay"
    )
    return parser


def _print_bundle(bundle: ExperimentBundle) -> None:
    out = {
        "output_dir": str(bundle.output_dir),
        "artifacts": {name: str(path) for name, path in sorted(bundle.paths.items())},
        "summary": bundle.summary,
    }
    print(json.dumps(out, indent=2, sort_keys=True))


def _print_report(report: RegimeReport) -> None:
    print(f"verdict: {report.verdict}")
    print()
    rows = []
    for name, margin in report.margins.items():
        if margin.satisfied is None:
            status, factor = "n/a", "-"
        else:
            status = "ok" if margin.satisfied else "violated"
            factor = "inf" if math.isinf(margin.factor) else f"{margin.factor:.2e}"
        if not margin.required:
            status += " (advisory)"
        note = f"  ({margin.note})" if margin.note else ""
        rows.append((name, f"{margin.lhs:.3e}", f"{margin.rhs:.3e}", factor,
                     status + note))
    widths = [max(len(r[i]) for r in rows + [("margin", "lhs", "rhs", "factor", "")])
              for i in range(4)]
    header = ("margin", "lhs", "rhs", "factor")
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)) + "  status")
    for row in rows:
        print("  ".join(v.ljust(w) for v, w in zip(row[:4], widths)) + f"  {row[4]}")
    print()
    print(
        f"steady state: v_x={report.v_x_ss:.3e}  v_p={report.v_p_ss:.3e}  "
        f"c_xp={report.c_xp_ss:.3e}"
    )
    print(
        f"ratios: r={report.r:.3e}  s={report.s:.3e}  "
        f"s'={report.s_prime:.3e}  xi={report.xi:.3e}"
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run-duffing":
            _print_bundle(run_duffing_experiment(_config_from_args(args, "duffing")))
        elif args.command == "run-rotor":
            _print_bundle(run_rotor_experiment(_config_from_args(args, "kicked_rotor")))
        elif args.command == "analyze-regime":
            report = analyze_regime(
                _config_from_args(args, None), margin_factor=args.margin_factor
            )
            if args.json:
                print(report.to_json())
            else:
                _print_report(report)
        elif args.command == "replay-records":
            _print_bundle(
                replay_records(_config_from_args(args, None), args.records)
            )
    except SimulationError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1
    except json.JSONDecodeError as exc:
        print(
            json.dumps({"error": "ConfigError", "message": f"bad JSON: {exc}"}),
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
