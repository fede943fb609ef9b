"""Exception types shared across the package.

Missing files raise the builtin FileNotFoundError (an OSError); everything
that is a domain error rather than an IO error derives from TiltweighError
so the CLI can map it to exit code 1.
"""


class TiltweighError(Exception):
    """Base class for all domain errors raised by tiltweigh."""


class SchemaError(TiltweighError):
    """Malformed input data: ragged rows, non-finite values, bad labels."""


class DegenerateSplit(TiltweighError):
    """A requested split would leave one side empty."""


class InsufficientTarget(TiltweighError):
    """Mixing requested more target rows than are available."""


class EmptyInput(TiltweighError):
    """An operation received an empty vector it cannot reduce."""


class DimensionMismatch(TiltweighError):
    """Operand dimensions are incompatible."""


class LengthMismatch(TiltweighError):
    """Paired vectors differ in length."""


class ConstantInput(TiltweighError):
    """Rank correlation is undefined: an input has zero rank variance."""


class ConfigError(TiltweighError):
    """A configuration object violates its invariants."""


class NonFiniteObjective(TiltweighError):
    """The training objective became non-finite even after exponent clipping."""


class AllCellsFailed(TiltweighError):
    """Every cell of a hyperparameter sweep failed."""


class InfeasibleSpec(TiltweighError):
    """The discrete target marginal is not representable by the tilt family.

    Carries the best residual KL found across restarts.
    """

    def __init__(self, message, residual_kl):
        super().__init__(message)
        self.residual_kl = residual_kl


class NoGroups(TiltweighError):
    """Group annotations were required but the dataset has none."""
