"""Exception hierarchy. ``exit_code`` is what the command line returns."""


class DelalaError(Exception):
    exit_code = 1


class ConfigError(DelalaError, ValueError):
    exit_code = 2


class InfeasibleBudgetError(ConfigError):
    """Labeling budget cannot satisfy the per-class quota."""


class DataError(DelalaError, ValueError):
    exit_code = 3


class StructureError(DelalaError, RuntimeError):
    """A parent array does not describe a forest."""

    exit_code = 3


class PropagationError(DelalaError, RuntimeError):
    exit_code = 3


class TrainingError(DelalaError, RuntimeError):
    exit_code = 4
