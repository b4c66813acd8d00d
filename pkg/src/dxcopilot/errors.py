"""Exception hierarchy shared by every pipeline stage.

Errors carry enough structure (line numbers, byte positions, raw payloads)
for the CLI and HTTP layer to surface actionable diagnostics instead of
bare tracebacks.
"""


class DxCopilotError(Exception):
    """Base class for all engine errors."""


# --- embedding / index ---------------------------------------------------


class EmptyText(DxCopilotError):
    """Text was empty (or whitespace-only) where content is required."""


class DimensionMismatch(DxCopilotError):
    """Vectors of different dimensions were combined."""


class ZeroVector(DxCopilotError):
    """An all-zero vector reached a cosine computation; upstream bug."""


class DuplicateId(DxCopilotError):
    """The same record id appeared twice."""


class EncoderMismatch(DxCopilotError):
    """A vector produced by one encoder was offered to an index built with another."""


class RemoteEncoderUnavailable(DxCopilotError):
    """The remote embedding service failed after the configured retries. Retriable."""


# --- corpus ---------------------------------------------------------------


class MalformedRecord(DxCopilotError):
    """A corpus line failed validation."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


# --- diagnostic KG --------------------------------------------------------


class NoLabeledRecords(DxCopilotError):
    """KG construction needs at least one record with a diagnosis label."""


class InvalidThresholds(DxCopilotError):
    """Subcategory cut distance must be strictly below the category cut."""


class InconsistentHierarchy(DxCopilotError):
    """Records disagree about a disease's category/subcategory placement."""


class ExtractorUnavailable(DxCopilotError):
    """The LLM-backed feature extractor failed. Retriable."""


class AugmenterUnavailable(DxCopilotError):
    """The feature augmenter failed. Retriable."""


class EmptyKg(DxCopilotError):
    """The graph has no subcategories to match against."""


class UnknownNode(DxCopilotError):
    """A node id was not found in the graph."""


class SchemaVersionMismatch(DxCopilotError):
    """A persisted graph uses a schema version this build does not understand."""


class KgIoError(DxCopilotError):
    """A graph file could not be read or decoded; message includes the position."""


# --- orchestration --------------------------------------------------------


class EmptySession(DxCopilotError):
    """A turn was requested on a session with no evidence."""


class SessionConcluded(DxCopilotError):
    """A turn was requested on a session that already concluded."""


class GeneratorUnavailable(DxCopilotError):
    """The LLM question generator failed; callers fall back to the template."""


class LlmUnavailable(DxCopilotError):
    """The backbone LLM could not be reached (or no fixture matched). Retriable."""


class ParseFailure(DxCopilotError):
    """LLM output could not be parsed into a recommendation.

    The raw model text is preserved on ``raw_text`` so callers can surface it.
    """

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text


class TranscriptionFailure(DxCopilotError):
    """The transcription client could not produce text for an audio reference."""


# --- evaluation -----------------------------------------------------------


class UnresolvableGoldLabel(DxCopilotError):
    """An eval case's gold label does not exist in the KG hierarchy."""

    def __init__(self, case_id: str, reason: str):
        super().__init__(f"case {case_id}: {reason}")
        self.case_id = case_id
        self.reason = reason
