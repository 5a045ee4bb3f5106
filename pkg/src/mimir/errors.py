"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MimirError(Exception):
    """Base class for every error raised by this package."""


# --- input validation ---

class EmptyTopicError(MimirError):
    """Topic text is empty after trimming."""


class MalformedKeywordError(MimirError):
    """Keyword topic contains interior sentence punctuation."""


class InvalidEncodingError(MimirError):
    """Uploaded file is not valid UTF-8."""


class InvalidConfigError(MimirError):
    """A config value violates its contract.

    ``field`` names the offending field so callers can surface
    field-level messages.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# --- dataset registry ---

class CountMismatchError(MimirError):
    """Descriptor record_count disagrees with the records supplied."""


class ForeignRecordError(MimirError):
    """A record's dataset_id does not match the descriptor being registered."""


class UnknownDatasetError(MimirError):
    """Referenced dataset id is not in the registry."""


# --- providers ---

class ProviderError(MimirError):
    """Base class for completion-provider failures."""


class ProviderTimeout(ProviderError):
    """The provider did not answer in time."""


class RateLimitedError(ProviderError):
    """Provider rejected the call for rate reasons; retriable.

    ``retry_after`` carries the provider-supplied delay hint in seconds
    when one was present, else None.
    """

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class MalformedResponseError(ProviderError):
    """Provider answer could not be interpreted."""


class AuthFailureError(ProviderError):
    """Provider rejected the configured credentials."""


# --- role play ---

class UnknownDomainError(MimirError):
    """No role catalogue exists for the requested domain."""


class IdeaGenerationError(MimirError):
    """A provider call failed while seeding role ideas.

    ``role`` names the failing role; ``partial`` holds the ideas that
    were produced before the failure.
    """

    def __init__(self, role: str, partial: dict[str, str], cause: Exception):
        super().__init__(f"idea generation failed for role {role!r}: {cause}")
        self.role = role
        self.partial = partial


class MemoryRatingError(MimirError):
    """A provider call failed while rating memories; carries the index."""

    def __init__(self, memory_index: int, cause: Exception):
        super().__init__(f"rating failed for memory {memory_index}: {cause}")
        self.memory_index = memory_index


class DialogueGenerationError(MimirError):
    """Dialogue generation failed at a specific (round, side)."""

    def __init__(self, round_index: int, side: str, cause: Exception | str):
        super().__init__(f"round {round_index} ({side}): {cause}")
        self.round_index = round_index
        self.side = side


# --- trajectories and tools ---

class EmptySeedError(MimirError):
    """Raw record has no text to build a seed instruction from."""


class ToolUnavailableError(MimirError):
    """Search tool could not be called (unknown name, network, auth)."""


class EmptyResultsError(MimirError):
    """Search returned no results; ``observation`` is what a loop should record."""

    observation = "No results found."


class UnparseableStepError(MimirError):
    """Provider output did not follow the action grammar after a reprompt."""


class MissingPlaceholderError(MimirError):
    """A template lacks a required placeholder."""


# --- verification ---

class InvalidTurnIndexError(MimirError):
    """Selected turn index is not an assistant turn of the sample."""


class UnknownSampleError(MimirError):
    """A verdict references a sample id missing from the turn-count map."""


class EmptyInputError(MimirError):
    """An aggregate was asked for on no data."""


# --- export and fine-tuning ---

class SchemaViolationError(MimirError):
    """A sample breaks its own invariants; refused rather than repaired."""


class ExportIoError(MimirError):
    """Writing or reading an export file failed."""


class MissingDatasetError(MimirError):
    """FineTuneConfig.dataset_path does not exist."""


class SpawnFailureError(MimirError):
    """The trainer process could not be started."""


# --- job service ---

class JobNotFoundError(MimirError):
    """No job with the given id."""


class IllegalTransitionError(MimirError):
    """Attempted job state change violates the transition relation."""
