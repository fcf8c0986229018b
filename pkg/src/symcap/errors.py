"""Exception hierarchy. The CLI maps these onto exit codes."""


class SymcapError(Exception):
    pass


class InputError(SymcapError, ValueError):
    """Malformed argument: wrong shape, non-finite entries, bad parameter."""


class NumericalError(SymcapError, ArithmeticError):
    """A computation finished outside its tolerance.

    ``detail`` carries whatever the caller needs to diagnose it (residual,
    bracketing interval, duality gap, ...).
    """

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail


class ConditioningError(NumericalError):
    pass


class ConfigError(SymcapError):
    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class SchemaError(SymcapError):
    pass
