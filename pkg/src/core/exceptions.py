"""Domain errors raised by the reconfiguration engine."""


class ReconfigError(Exception):
    """Base class for all engine errors."""


class ConfigError(ReconfigError):
    """Malformed key=value configuration file."""


class InfeasibleRadiality(ReconfigError):
    """Cutoff L falls outside [0, M_sw]; no radial topology can exist."""


class DegenerateVoltage(ReconfigError):
    """A squared voltage magnitude <= 0 was used as a divisor."""


class UnknownLayout(ReconfigError):
    """Solar layout or grid identifier is not known."""


class DatasetError(ReconfigError):
    """Dataset request cannot be satisfied."""


class TooManyTopologies(ReconfigError):
    """Switch-subset enumeration exceeds the configured guard."""


class InfeasibleDispatch(ReconfigError):
    """No dispatch meets the loads within generator and voltage limits."""


class MaxIterations(ReconfigError):
    """Iterative solver hit its iteration cap."""


class AllInfeasible(ReconfigError):
    """Every radial topology is infeasible for the scenario."""


class BatchTooSmall(ReconfigError):
    """Batch normalization in train mode needs at least two samples."""


class NonFiniteGradient(ReconfigError):
    """A gradient contains NaN or inf."""


class InvalidLayerShape(ReconfigError):
    """Layer width must be positive."""


class BadCutoff(ReconfigError):
    """Rounding cutoff outside [0, m]."""


class BadBounds(ReconfigError):
    """Box lower bound is not strictly below the upper bound."""


class DimensionMismatch(ReconfigError):
    """Array shape does not match the grid index map."""


class MissingLabels(ReconfigError):
    """Labels are missing or not aligned with predictions."""


class CheckpointError(ReconfigError):
    """Checkpoint file cannot be read."""


class NonRadialTopology(ReconfigError):
    """A fixed-topology solve was asked for a switch set that is not a spanning tree."""
