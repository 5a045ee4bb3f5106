"""Core domain types and input validation.

Everything here is an immutable value object: safe to share between
threads and to use as generation seeds. Constructors reject invariant
violations instead of repairing them.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from .errors import EmptyTopicError, InvalidConfigError, MalformedKeywordError

TOPIC_KINDS = ("keyword", "sentence")
TOPIC_SOURCES = ("user_upload", "dataset")
FRAMEWORKS = ("react", "cot", "reflexion")

_WHITESPACE_RUN = re.compile(r"\s+")
_SENTENCE_PUNCT = ".?!"


def normalize_seed(entry_text: str) -> str:
    """Collapse whitespace runs to single spaces and trim the ends.

    Idempotent, and never lengthens its input.
    """
    return _WHITESPACE_RUN.sub(" ", entry_text).strip()


def _content_id(*parts: str) -> str:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()
    return digest[:16]


@dataclass(frozen=True)
class Topic:
    """A user-supplied generation topic: a keyword or a full sentence."""

    id: str
    kind: str
    text: str
    source: str = "user_upload"

    def __post_init__(self):
        if self.kind not in TOPIC_KINDS:
            raise InvalidConfigError("kind", f"must be one of {TOPIC_KINDS}")
        if self.source not in TOPIC_SOURCES:
            raise InvalidConfigError("source", f"must be one of {TOPIC_SOURCES}")
        if not self.text.strip():
            raise EmptyTopicError("topic text is empty")
        if self.kind == "keyword" and _keyword_violates_punctuation(self.text):
            raise MalformedKeywordError(
                f"keyword contains sentence punctuation: {self.text!r}"
            )


def _keyword_violates_punctuation(text: str) -> bool:
    # A single trailing sentence mark is tolerated; interior ones are not.
    return any(ch in _SENTENCE_PUNCT for ch in text[:-1])


def validate_topic(raw_text: str, kind: str, source: str = "user_upload") -> Topic:
    """Validate raw topic text and build a Topic.

    The id is a content hash of (kind, normalized text) so duplicate
    uploads dedupe naturally.

    Raises EmptyTopicError for whitespace-only input and
    MalformedKeywordError when a keyword carries interior sentence
    punctuation.
    """
    text = raw_text.strip()
    if not text:
        raise EmptyTopicError("topic text is empty after trimming")
    return Topic(id=_content_id(kind, normalize_seed(text)), kind=kind, text=text, source=source)


@dataclass(frozen=True)
class DatasetDescriptor:
    """Catalogue entry for one curated dataset."""

    id: str
    name: str
    domain: str
    format: str
    record_count: int
    license_note: str = ""

    def __post_init__(self):
        if self.format not in ("instruction", "raw"):
            raise InvalidConfigError("format", "must be 'instruction' or 'raw'")
        if self.record_count < 0:
            raise InvalidConfigError("record_count", "must be non-negative")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "domain": self.domain,
            "format": self.format,
            "record_count": self.record_count,
            "license_note": self.license_note,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetDescriptor":
        return cls(
            id=data["id"],
            name=data["name"],
            domain=data.get("domain", ""),
            format=data["format"],
            record_count=int(data["record_count"]),
            license_note=data.get("license_note", ""),
        )


@dataclass(frozen=True)
class DataPoolEntry:
    """One generation seed in the merged data pool.

    ``provenance`` is a (source kind, source id) pair; kinds are
    "topic:keyword", "topic:sentence", "record:instruction" and
    "record:raw". Instruction-record seeds are complete questions and
    may open a dialogue verbatim.
    """

    seed_text: str
    provenance: tuple[str, str]
    domain: str = ""

    def __post_init__(self):
        if not self.seed_text.strip():
            raise InvalidConfigError("seed_text", "must be non-empty")

    @property
    def is_instruction(self) -> bool:
        return self.provenance[0] == "record:instruction"

    def to_dict(self) -> dict:
        return {
            "seed_text": self.seed_text,
            "provenance": list(self.provenance),
            "domain": self.domain,
        }


@dataclass(frozen=True)
class Role:
    """A persona the generator can role-play."""

    name: str
    role_prompt: str
    domain: str = ""


@dataclass(frozen=True)
class GenerationConfig:
    """Run parameters for dialogue and trajectory generation.

    Defaults: temperature 0.1 and max_tokens 1000 (the platform's
    standard run setting), framework "react".
    """

    rounds: int
    temperature: float = 0.1
    max_tokens: int = 1000
    framework: str = "react"
    picked_roles: tuple[str, ...] = ()
    tools: tuple[str, ...] = ()
    rng_seed: int = 0
    max_steps: int = 8
    max_attempts: int = 2

    def __post_init__(self):
        if self.rounds < 1:
            raise InvalidConfigError("rounds", "must be >= 1")
        if not 0.0 <= self.temperature <= 2.0:
            raise InvalidConfigError("temperature", "must be in [0, 2]")
        if self.max_tokens < 1:
            raise InvalidConfigError("max_tokens", "must be >= 1")
        if self.framework not in FRAMEWORKS:
            raise InvalidConfigError("framework", f"must be one of {FRAMEWORKS}")
        if self.max_steps < 1:
            raise InvalidConfigError("max_steps", "must be >= 1")
        if self.max_attempts < 0:
            raise InvalidConfigError("max_attempts", "must be >= 0")
        if not -(2**63) <= self.rng_seed < 2**63:
            raise InvalidConfigError("rng_seed", "must fit in 64 bits")
        # Tuples keep the config hashable and safe to share.
        object.__setattr__(self, "picked_roles", tuple(self.picked_roles))
        object.__setattr__(self, "tools", tuple(self.tools))
