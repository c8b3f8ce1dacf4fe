"""Exception hierarchy shared by the library and the CLI."""


class PolicySirError(Exception):
    """Base class for all errors raised by policysir."""


class PreconditionError(PolicySirError, ValueError):
    """An operation was called with arguments outside its domain."""


class NoEpidemicError(PreconditionError):
    """Raised when the reproduction number does not exceed 1."""


class SearchSpaceTooLarge(PolicySirError):
    """The requested exhaustive search exceeds the configured guard."""

    def __init__(self, size, limit):
        super().__init__(f"search space of {size} schedules exceeds limit {limit}")
        self.size = size
        self.limit = limit


class ScenarioError(PolicySirError):
    """A scenario file could not be parsed or failed validation.

    ``field`` names the offending key (dotted path) and ``line`` the
    1-based line in the source file when known.
    """

    def __init__(self, message, field=None, line=None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
