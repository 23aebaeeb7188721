"""Exception hierarchy shared by all pipeline stages."""


class NewsVolError(Exception):
    """Base class for every error raised by this package."""


class DataError(NewsVolError):
    """Input data is malformed or violates a domain invariant."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DataError):
    pass


class FormatError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class AlignmentError(DataError):
    pass


class DegenerateTrainingError(DataError):
    """Training labels contain a single class."""


class ContractError(NewsVolError, ValueError):
    """A caller broke an operation's precondition."""


class ConfigError(NewsVolError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DependencyError(NewsVolError):
    """A pipeline stage needs an artifact an earlier stage has not produced."""


class ProviderError(NewsVolError):
    def __init__(self, message, retry_after=None):
        self.retry_after = retry_after
        super().__init__(message)


class ProtocolError(NewsVolError):
    """The embedding provider answered with an inconsistent payload."""
