"""Exception hierarchy for the vizscout engine.

Every operational failure raises a typed subclass of :class:`VizScoutError`
so callers (CLI, HTTP service) can map errors to exit codes / status codes
without string matching.
"""


class VizScoutError(Exception):
    """Base class for all engine errors."""


# --- ingestion ---------------------------------------------------------------

class IngestError(VizScoutError):
    pass


class EmptyFileError(IngestError):
    pass


class DuplicateColumnError(IngestError):
    pass


class NoRowsError(IngestError):
    pass


class TooManyRowsError(IngestError):
    pass


# --- query execution ---------------------------------------------------------

class ExecError(VizScoutError):
    pass


class UnknownFieldError(ExecError):
    pass


class TypeMismatchError(ExecError):
    pass


class EmptyResultError(ExecError):
    pass


class ParseError(VizScoutError):
    """Canonical-text parse failure; carries the character offset and what was expected."""

    def __init__(self, offset: int, expected: str):
        super().__init__(f"parse error at offset {offset}: expected {expected}")
        self.offset = offset
        self.expected = expected


# --- query graph -------------------------------------------------------------

class GraphError(VizScoutError):
    pass


class NoColumnsError(GraphError):
    pass


class BackpropError(VizScoutError):
    pass


class BrokenPathError(BackpropError):
    pass


class FreezeError(VizScoutError):
    pass


class EmptyKeepSetError(FreezeError):
    pass


# --- reward models -----------------------------------------------------------

class ModelError(VizScoutError):
    pass


class DimensionMismatchError(ModelError):
    pass


class RangeError(VizScoutError):
    """An input fell outside its documented numeric range."""


class TrainError(VizScoutError):
    pass


class DegenerateCorpusError(TrainError):
    pass


# --- search ------------------------------------------------------------------

class SearchError(VizScoutError):
    pass


class DeadEndError(SearchError):
    """No legal action exists from the current partial query."""


class NoValidQueryError(SearchError):
    """Every search path dead-ended; the table admits no valid chart."""


# --- hints -------------------------------------------------------------------

class OracleError(VizScoutError):
    pass


class TooLargeError(OracleError):
    pass


class TemplateError(VizScoutError):
    pass


class InapplicableTemplateError(TemplateError):
    pass


# --- sessions ----------------------------------------------------------------

class SessionError(VizScoutError):
    pass


class UnknownHintError(SessionError):
    pass


class UnknownQueryError(SessionError):
    pass
