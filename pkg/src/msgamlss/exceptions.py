"""Exception hierarchy.

Two broad classes matter for the CLI: configuration/usage problems
(exit code 2) and numeric failures during estimation (exit code 3).
"""


class MsgamlssError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MsgamlssError):
    """Invalid model specification, configuration file, or input schema."""

    exit_code = 2


class DataError(ConfigError):
    """Malformed or inconsistent input data (bad cells, length mismatches)."""


class DomainError(ConfigError):
    """Evaluation outside the supported domain (e.g. prediction beyond the
    observed covariate range, probabilities outside (0, 1))."""


class ParameterError(ConfigError):
    """Distribution parameters violate their constraints (e.g. sigma <= 0)."""


class NumericError(MsgamlssError):
    """Numeric failure during likelihood evaluation or optimization."""

    exit_code = 3


class LikelihoodError(NumericError):
    """The likelihood is degenerate (zero density at some time point)."""


class StationaryError(NumericError):
    """The stationary distribution is not unique or could not be solved."""


class FitError(NumericError):
    """Optimization failed; carries the best point reached so far."""

    def __init__(self, message, theta=None, grad_norm=None):
        super().__init__(message)
        self.theta = theta
        self.grad_norm = grad_norm
