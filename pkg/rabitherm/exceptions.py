"""
Error hierarchy. The CLI maps ConfigError to exit code 2 and
NumericalError (including ConvergenceError) to exit code 3.
"""


class RabithermError(Exception):
    exit_code = 1


class ConfigError(RabithermError, ValueError):
    """Invalid parameters, documents or grids"""
    exit_code = 2


class NumericalError(RabithermError, RuntimeError):
    """A computation failed or could not be carried out accurately"""
    exit_code = 3


class ConvergenceError(NumericalError):
    """Fock cutoff growth did not converge within the configured ceiling"""
