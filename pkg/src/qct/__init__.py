"""Simulation and estimation toolkit for continuously measured systems.

The package follows a single system through four coupled layers:

- ``grid``: wavefunctions and density matrices on a moving grid that
  tracks the packet's classical carrier.
- ``models``: potentials, forces, and classical reference dynamics.
- ``sse`` / ``sme``: stochastic wavefunction and density-matrix
  integrators conditioned on continuous position measurement records.
- ``gaussian``: the moment-closure estimator that tracks the same
  records with five numbers instead of a grid.
- ``regime``: inequality diagnostics locating a system on the
  quantum-to-classical spectrum.
- ``records`` / ``experiments``: record post-processing, multi-observer
  bookkeeping, and the packaged experiment drivers.
"""

from .errors import (
    ConfigError,
    DivergenceError,
    GridLeakError,
    PositivityError,
    SimulationError,
    StateInvalidError,
    StepSizeError,
)
from .grid import (
    Cumulants,
    DensityState,
    GridState,
    compute_moments,
    density_from_pure,
    density_moments,
    gaussian_state,
    recenter,
    recenter_density,
    sized_grid,
)
from .experiments import (
    ExperimentBundle,
    ExperimentConfig,
    analyze_regime,
    classical_rotor_energies,
    closed_rotor_energies,
    replay_records,
    run_duffing_experiment,
    run_rotor_experiment,
    typical_point_scales,
)
from .gaussian import (
    GaussianState,
    NoiseParams,
    ensemble_decomposition,
    kick_gaussian,
    run_gaussian,
    step_gaussian,
    unconditioned_reference,
)
from .models import (
    DuffingParams,
    KickedRotorParams,
    SystemModel,
    classical_trajectory,
    duffing,
    free_particle,
    harmonic_oscillator,
    kicked_rotor,
    polynomial_model,
    typical_scales,
)
from .records import MeasurementRecord, ObserverSet, agreement_stats, band_limit
from .regime import (
    RegimeReport,
    build_report,
    covariance_rates,
    steady_state_covariance,
)
from .series import Series
from .sme import SMEResult, run_sme, step_sme
from .sse import SSEResult, ensemble_kinetic_energy, run_sse, step_sse

__version__ = "0.1.0"
