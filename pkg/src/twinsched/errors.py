class ContractViolation(ValueError):
    """A caller broke an operation's precondition."""


class OracleInfeasible(ValueError):
    """Exhaustive search was requested above the configured size limit."""


class ConfigError(ValueError):
    """Invalid experiment or distribution parameters."""
