"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 3 for a violated physics
precondition, 4 for a numerical failure.
"""


class EITModeError(Exception):
    exit_code = 4


class PhysicsPreconditionError(EITModeError, ValueError):
    exit_code = 3


class NumericalError(EITModeError, RuntimeError):
    exit_code = 4


class NotNegativeDetuning(PhysicsPreconditionError):
    """Bound transverse modes only exist for a red-detuned probe (delta < 0)."""


class ProfileZero(PhysicsPreconditionError):
    """The control Rabi frequency fell below the configured floor."""


class OffAxisField(PhysicsPreconditionError):
    """Too much input power lies outside the largest inscribed circle."""


class BasisMismatch(PhysicsPreconditionError):
    """Modes passed together do not share (m, delta, grid)."""


class TruncationFailed(NumericalError):
    pass


class ConvergenceFailed(NumericalError):
    pass


class NonNegativeSlope(NumericalError):
    """d(beta)/d(delta) >= 0; impossible for this medium, so it signals a solver defect."""


class UnstableStep(NumericalError):
    pass


class PowerLoss(NumericalError):
    pass
