"""Exception hierarchy shared by all modules."""


class ThermolabError(Exception):
    """Base class for library errors."""


class InputError(ThermolabError, ValueError):
    """Bad arguments: out-of-range symbols, depth mismatches, etc."""


class NotPrimitiveError(ThermolabError):
    """Transition matrix has no strictly positive power."""


class NumericalError(ThermolabError, ArithmeticError):
    """Iteration failed to converge or produced unusable values."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ConfigError(ThermolabError):
    """Invalid run configuration; carries every violation found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
