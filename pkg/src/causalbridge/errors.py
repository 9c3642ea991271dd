"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: :class:`ConfigError` -> 2,
:class:`NumericalError` (and subclasses) -> 3, ``OSError`` -> 4.
"""


class CausalBridgeError(Exception):
    """Base class for all package errors."""


class ConfigError(CausalBridgeError, ValueError):
    """Invalid configuration, split fractions, grids or schedule."""


class DimensionError(CausalBridgeError, ValueError):
    """Operand shapes are incompatible."""


class ContractError(CausalBridgeError, ValueError):
    """A precondition of an operation was violated."""


class StateError(CausalBridgeError, RuntimeError):
    """Object used before it was fitted or built."""


class NumericalError(CausalBridgeError, ArithmeticError):
    """Generic numerical failure (singular matrix, non-convergence, ...)."""


class ParameterError(NumericalError):
    """Model parameters produce an invalid distribution."""


class DegenerateError(NumericalError):
    """Statistic undefined on the given data (no events, all points trimmed, ...)."""


class SampleSizeError(NumericalError):
    """Monte Carlo error too large to support the requested decision."""


class TrainingDivergence(NumericalError):
    """Loss or gradient became non-finite during optimisation.

    ``checkpoint`` holds the last finite parameter snapshot (list of arrays)
    when one is available.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
