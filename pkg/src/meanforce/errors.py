"""Exception hierarchy.

Each class carries the process exit code the CLI reports for it.
"""


class MeanForceError(Exception):
    exit_code = 3
    reason = "error"


class DimensionError(MeanForceError, ValueError):
    reason = "dimension_error"


class ContractViolation(MeanForceError):
    """An operator or state failed a structural contract (Hermiticity, trace, ...)."""

    reason = "contract_violation"


class DomainError(MeanForceError, ValueError):
    reason = "domain_error"


class ParameterError(MeanForceError, ValueError):
    reason = "parameter_error"


class DegeneracyError(DomainError):
    reason = "degeneracy_error"


class OracleDeviationError(MeanForceError):
    exit_code = 4
    reason = "oracle_deviation"

    def __init__(self, message, max_deviation):
        super().__init__(message)
        self.max_deviation = max_deviation


class ConfigError(MeanForceError, ValueError):
    exit_code = 2
    reason = "config_error"
