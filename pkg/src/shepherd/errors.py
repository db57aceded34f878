"""Exception taxonomy shared across the package."""


class ShepherdError(Exception):
    """Base class for all package-specific failures."""


class DomainError(ShepherdError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class NumericalError(ShepherdError, ArithmeticError):
    """A numerical routine failed (singular system, bad residual, divergence)."""


class ContractViolationError(ShepherdError):
    """A caller-supplied quantity breaks a conservation/consistency contract."""


class ConfigError(ShepherdError, ValueError):
    """Invalid configuration or incompatible component combination."""


class CheckpointError(ShepherdError):
    """Checkpoint file is missing, corrupt, or has an unsupported version."""
