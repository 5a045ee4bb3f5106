"""Shared fixtures: a populated registry, scripted providers, and the
canonical three-round dialogue fixture."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from mimir.core import DatasetDescriptor
from mimir.ingest import DatasetRecord, DatasetRegistry
from mimir.roleplay import InstructionSample

FIXTURES = Path(__file__).parent / "fixtures"


def make_instruction_dataset(registry: DatasetRegistry, dataset_id: str, name: str,
                             questions: list[tuple[str, str]], domain: str = "medical") -> str:
    records = [
        DatasetRecord(dataset_id=dataset_id, record_id=f"r{i}", question=q, answer=a)
        for i, (q, a) in enumerate(questions, start=1)
    ]
    descriptor = DatasetDescriptor(
        id=dataset_id, name=name, domain=domain, format="instruction",
        record_count=len(records),
    )
    return registry.register(descriptor, records)


def make_raw_dataset(registry: DatasetRegistry, dataset_id: str, name: str,
                     texts: list[str], domain: str = "medical") -> str:
    records = [
        DatasetRecord(dataset_id=dataset_id, record_id=f"n{i}", text=t)
        for i, t in enumerate(texts, start=1)
    ]
    descriptor = DatasetDescriptor(
        id=dataset_id, name=name, domain=domain, format="raw", record_count=len(records),
    )
    return registry.register(descriptor, records)


@pytest.fixture
def registry(tmp_path) -> DatasetRegistry:
    return DatasetRegistry(tmp_path / "registry")


@pytest.fixture
def medical_registry(registry) -> DatasetRegistry:
    """The four catalogue names used throughout the docs, as toy data."""
    make_instruction_dataset(
        registry, "medqa", "MedQA",
        [("What organ does hepatitis affect?", "The liver."),
         ("Which vitamin deficiency causes scurvy?", "Vitamin C."),
         ("Which blood cells carry oxygen?", "Red blood cells.")],
    )
    make_instruction_dataset(
        registry, "medmcqa", "MedMCQA",
        [("Insulin is produced by which organ?", "Pancreas."),
         ("Which imaging method uses sound waves?", "Ultrasound.")],
    )
    make_instruction_dataset(
        registry, "pubmedqa", "PubMedQA",
        [("Does exercise lower resting blood pressure?", "Yes, over time.")],
    )
    make_instruction_dataset(
        registry, "mmlu_clinical", "MMLU Clinical Topics",
        [("What is the primary function of the alveoli?", "Gas exchange.")],
    )
    return registry


@pytest.fixture
def three_round_sample() -> InstructionSample:
    data = json.loads((FIXTURES / "dialogue_3round.json").read_text(encoding="utf-8"))
    return InstructionSample.from_dict(data)
