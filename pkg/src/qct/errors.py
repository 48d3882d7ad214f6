"""Exception types raised by the simulators and estimators."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class StateInvalidError(SimulationError):
    """A state object failed one of its structural invariants."""


class GridLeakError(SimulationError):
    """Probability reached the edge of the position grid."""


class StepSizeError(SimulationError):
    """The time step is too large for the requested evolution."""


class PositivityError(SimulationError):
    """A density matrix developed a negative eigenvalue beyond tolerance."""


class DivergenceError(SimulationError):
    """A trajectory or estimator left the numerically representable range."""


class ConfigError(SimulationError):
    """An experiment configuration is inconsistent or unphysical."""
