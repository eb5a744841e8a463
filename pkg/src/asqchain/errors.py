"""Exception hierarchy. The CLI maps these onto exit codes."""


class AsqChainError(Exception):
    """Base class for all package errors."""


class ValidationError(AsqChainError, ValueError):
    """Invalid parameters, config file, or precondition violation."""


class ConvergenceError(AsqChainError, ArithmeticError):
    """A numerical procedure failed to converge."""


class DegenerateCouplingError(ConvergenceError):
    """The effective total Josephson energy is (numerically) zero."""


class BranchIdentificationError(ConvergenceError):
    """No dressed state can be identified with the bare resonator."""


class FitError(ConvergenceError):
    """A calibration fit could not extract the requested parameters."""


class NearResonanceWarning(UserWarning):
    """The readout resonator is close to a circuit transition."""


class DegeneracyError(ValidationError):
    """Spin configurations expected to be degenerate are not."""
