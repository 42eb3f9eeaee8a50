"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value or character definition is invalid."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}")


class ContractViolation(RuntimeError):
    """A caller broke an operation's precondition."""


class NumericError(FloatingPointError):
    """A non-finite value appeared during a learner computation."""

    def __init__(self, message: str, diagnostics: dict | None = None) -> None:
        self.diagnostics = diagnostics or {}
        super().__init__(f"{message} {self.diagnostics}" if diagnostics else message)


class CorruptionError(IOError):
    """A checkpoint or manifest failed integrity checks."""
