"""Topic file parsing, the dataset registry, and data-pool assembly.

The registry is a plain directory: ``datasets.json`` holds the
descriptor catalogue and ``<id>.jsonl`` holds one record per line.
Line-oriented files keep diffs readable and allow streaming.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .core import DataPoolEntry, DatasetDescriptor, Topic, normalize_seed, validate_topic
from .errors import (
    CountMismatchError,
    EmptyTopicError,
    ForeignRecordError,
    InvalidConfigError,
    InvalidEncodingError,
    MalformedKeywordError,
    UnknownDatasetError,
)


@dataclass(frozen=True)
class DatasetRecord:
    """One stored dataset row.

    Instruction-format records carry ``question``/``answer`` (and
    optional ``choices``); raw-format records carry free ``text``.
    """

    dataset_id: str
    record_id: str
    question: str | None = None
    answer: str | None = None
    choices: tuple[str, ...] | None = None
    text: str | None = None

    def __post_init__(self):
        if self.choices is not None:
            object.__setattr__(self, "choices", tuple(self.choices))
        has_instruction = self.question is not None
        has_raw = self.text is not None
        if has_instruction == has_raw:
            raise InvalidConfigError(
                "payload", "record needs either question/answer or text, not both"
            )
        if has_instruction and (not self.question.strip() or self.answer is None):
            raise InvalidConfigError("question", "instruction record needs question and answer")
        if has_raw and not self.text.strip():
            raise InvalidConfigError("text", "raw record needs non-empty text")

    @property
    def format(self) -> str:
        return "instruction" if self.question is not None else "raw"

    @property
    def seed_text(self) -> str:
        """The text this record contributes to a data pool."""
        return self.question if self.question is not None else self.text

    def to_dict(self) -> dict:
        if self.format == "instruction":
            payload = {"record_id": self.record_id, "question": self.question, "answer": self.answer}
            if self.choices is not None:
                payload["choices"] = list(self.choices)
            return payload
        return {"record_id": self.record_id, "text": self.text}

    @classmethod
    def from_dict(cls, dataset_id: str, data: dict) -> "DatasetRecord":
        if "question" in data:
            return cls(
                dataset_id=dataset_id,
                record_id=data["record_id"],
                question=data["question"],
                answer=data.get("answer", ""),
                choices=tuple(data["choices"]) if "choices" in data else None,
            )
        return cls(dataset_id=dataset_id, record_id=data["record_id"], text=data["text"])


@dataclass(frozen=True)
class DataPool:
    """The merged, ordered collection of generation seeds.

    ``created_at`` is informational only: two pools built from identical
    inputs compare equal and share a digest regardless of when they were
    built.
    """

    entries: tuple[DataPoolEntry, ...]
    config_digest: str
    created_at: str = field(compare=False, default="")

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for entry in self.entries:
            if entry.provenance in seen:
                raise InvalidConfigError(
                    "entries", f"duplicate provenance {entry.provenance}"
                )
            seen.add(entry.provenance)

    def __len__(self) -> int:
        return len(self.entries)


def parse_topics(file_bytes: bytes, kind: str) -> list[Topic]:
    """Parse a newline-delimited topic upload into validated Topics.

    Accepts LF or CRLF line endings. Duplicates (same kind + normalized
    text) are dropped, first occurrence kept. Validation errors are
    re-raised with the offending 1-based line number prepended.
    """
    try:
        text = file_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidEncodingError(f"topic file is not valid UTF-8: {exc}") from exc

    topics: list[Topic] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        try:
            topic = validate_topic(line, kind)
        except EmptyTopicError as exc:
            raise EmptyTopicError(f"line {line_no}: {exc}") from exc
        except MalformedKeywordError as exc:
            raise MalformedKeywordError(f"line {line_no}: {exc}") from exc
        if topic.id not in seen_ids:
            seen_ids.add(topic.id)
            topics.append(topic)
    return topics


class DatasetRegistry:
    """Directory-backed registry of curated datasets.

    Reads are lock-free; registration serializes on a per-instance lock
    and replaces files atomically, so readers never observe a torn
    dataset.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    @property
    def _catalogue_path(self) -> Path:
        return self.root / "datasets.json"

    def _load_catalogue(self) -> dict[str, DatasetDescriptor]:
        if not self._catalogue_path.exists():
            return {}
        raw = json.loads(self._catalogue_path.read_text(encoding="utf-8"))
        descriptors = [DatasetDescriptor.from_dict(item) for item in raw]
        return {d.id: d for d in descriptors}

    def _store_catalogue(self, catalogue: dict[str, DatasetDescriptor]) -> None:
        items = [d.to_dict() for d in sorted(catalogue.values(), key=lambda d: d.id)]
        tmp = self._catalogue_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(items, ensure_ascii=False, indent=2), encoding="utf-8")
        tmp.replace(self._catalogue_path)

    def register(self, descriptor: DatasetDescriptor, records: list[DatasetRecord]) -> str:
        """Persist a dataset, replacing any existing one with the same id."""
        if descriptor.record_count != len(records):
            raise CountMismatchError(
                f"descriptor says {descriptor.record_count} records, got {len(records)}"
            )
        for record in records:
            if record.dataset_id != descriptor.id:
                raise ForeignRecordError(
                    f"record {record.record_id!r} belongs to {record.dataset_id!r}, "
                    f"not {descriptor.id!r}"
                )
        record_ids = [r.record_id for r in records]
        if len(set(record_ids)) != len(record_ids):
            raise InvalidConfigError("records", "duplicate record_id within dataset")

        with self._write_lock:
            lines = "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in records)
            tmp = self.root / f"{descriptor.id}.jsonl.tmp"
            tmp.write_text(lines, encoding="utf-8")
            tmp.replace(self.root / f"{descriptor.id}.jsonl")
            catalogue = self._load_catalogue()
            catalogue[descriptor.id] = descriptor
            self._store_catalogue(catalogue)
        return descriptor.id

    def get(self, dataset_id: str) -> DatasetDescriptor:
        catalogue = self._load_catalogue()
        if dataset_id not in catalogue:
            raise UnknownDatasetError(f"no dataset {dataset_id!r} in registry")
        return catalogue[dataset_id]

    def records(self, dataset_id: str) -> list[DatasetRecord]:
        self.get(dataset_id)
        path = self.root / f"{dataset_id}.jsonl"
        out = []
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(DatasetRecord.from_dict(dataset_id, json.loads(line)))
        return out

    def search(self, prefix: str = "") -> list[DatasetDescriptor]:
        """Descriptors whose name starts with ``prefix`` (case-insensitive), name-sorted."""
        folded = prefix.casefold()
        matches = [
            d for d in self._load_catalogue().values()
            if d.name.casefold().startswith(folded)
        ]
        return sorted(matches, key=lambda d: (d.name.casefold(), d.name))


def build_data_pool(
    topics: list[Topic],
    dataset_ids: list[str],
    registry: DatasetRegistry,
    per_dataset_cap: int | None = None,
    rng_seed: int = 0,
) -> DataPool:
    """Merge topics and sampled dataset records into one seed pool.

    Deterministic: the same (topics, dataset_ids, cap, rng_seed,
    registry contents) always yields the same pool. Per-dataset sampling
    without replacement is a seeded shuffle keyed on (rng_seed,
    dataset id), so adding a dataset never disturbs another's draw.
    """
    if per_dataset_cap is not None and per_dataset_cap < 1:
        raise InvalidConfigError("per_dataset_cap", "must be >= 1 when given")

    entries: list[DataPoolEntry] = []
    for topic in topics:
        entries.append(
            DataPoolEntry(
                seed_text=normalize_seed(topic.text),
                provenance=(f"topic:{topic.kind}", topic.id),
            )
        )

    for dataset_id in dataset_ids:
        descriptor = registry.get(dataset_id)
        records = registry.records(dataset_id)
        rng = random.Random(f"{rng_seed}:{dataset_id}")
        shuffled = list(records)
        rng.shuffle(shuffled)
        take = len(shuffled) if per_dataset_cap is None else min(per_dataset_cap, len(shuffled))
        for record in shuffled[:take]:
            entries.append(
                DataPoolEntry(
                    seed_text=normalize_seed(record.seed_text),
                    provenance=(f"record:{record.format}", f"{dataset_id}/{record.record_id}"),
                    domain=descriptor.domain,
                )
            )

    digest_input = json.dumps(
        {
            "topics": [t.id for t in topics],
            "datasets": list(dataset_ids),
            "cap": per_dataset_cap,
            "rng_seed": rng_seed,
        },
        sort_keys=True,
    )
    digest = hashlib.sha256(digest_input.encode("utf-8")).hexdigest()[:16]
    return DataPool(
        entries=tuple(entries),
        config_digest=digest,
        created_at=datetime.now(timezone.utc).isoformat(),
    )
