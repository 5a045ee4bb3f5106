"""A tiny bundled registry so the platform is explorable offline.

These are hand-written toy records, not rows from the real public
datasets; they exist to exercise the registry format, search, and the
generation pipeline end to end.
"""

from __future__ import annotations

from .core import DatasetDescriptor
from .ingest import DatasetRecord, DatasetRegistry

_TOY_DATASETS = [
    {
        "descriptor": {"id": "medqa", "name": "MedQA", "domain": "medical", "format": "instruction"},
        "records": [
            {"record_id": "q1", "question": "What organ is primarily affected by hepatitis?", "answer": "The liver."},
            {"record_id": "q2", "question": "Which vitamin deficiency causes scurvy?", "answer": "Vitamin C."},
            {"record_id": "q3", "question": "What is the normal resting heart rate range for adults?", "answer": "About 60 to 100 beats per minute."},
            {"record_id": "q4", "question": "What does a sphygmomanometer measure?", "answer": "Blood pressure."},
            {"record_id": "q5", "question": "Which blood cells carry oxygen?", "answer": "Red blood cells (erythrocytes)."},
        ],
    },
    {
        "descriptor": {"id": "medmcqa", "name": "MedMCQA", "domain": "medical", "format": "instruction"},
        "records": [
            {
                "record_id": "m1",
                "question": "Which of the following is a symptom of anemia?",
                "answer": "Fatigue",
                "choices": ["Fatigue", "Fever", "Rash", "Cough"],
            },
            {
                "record_id": "m2",
                "question": "Insulin is produced by which organ?",
                "answer": "Pancreas",
                "choices": ["Liver", "Pancreas", "Kidney", "Spleen"],
            },
            {
                "record_id": "m3",
                "question": "Which imaging method uses sound waves?",
                "answer": "Ultrasound",
                "choices": ["X-ray", "MRI", "Ultrasound", "CT"],
            },
        ],
    },
    {
        "descriptor": {"id": "pubmedqa", "name": "PubMedQA", "domain": "medical", "format": "instruction"},
        "records": [
            {"record_id": "p1", "question": "Does regular exercise lower resting blood pressure?", "answer": "Yes, moderate aerobic exercise tends to lower resting blood pressure over time."},
            {"record_id": "p2", "question": "Is hand washing effective at reducing infection transmission?", "answer": "Yes, consistent hand hygiene substantially reduces transmission of many pathogens."},
        ],
    },
    {
        "descriptor": {"id": "mmlu_clinical", "name": "MMLU Clinical Topics", "domain": "medical", "format": "instruction"},
        "records": [
            {"record_id": "c1", "question": "What is the primary function of the alveoli?", "answer": "Gas exchange between air and blood."},
            {"record_id": "c2", "question": "Which part of the brain regulates balance and coordination?", "answer": "The cerebellum."},
            {"record_id": "c3", "question": "What electrolyte imbalance is most associated with muscle cramps?", "answer": "Low potassium or low magnesium."},
        ],
    },
    {
        "descriptor": {"id": "clinical_notes", "name": "Clinical Notes (raw)", "domain": "medical", "format": "raw"},
        "records": [
            {"record_id": "n1", "text": "headaches, sore throat, dry heaves"},
            {"record_id": "n2", "text": "persistent dry cough, low-grade fever, three weeks"},
        ],
    },
]


def seed_demo_registry(registry: DatasetRegistry) -> list[str]:
    """Register the bundled toy datasets; returns the registered ids."""
    ids = []
    for spec in _TOY_DATASETS:
        meta = spec["descriptor"]
        records = [DatasetRecord.from_dict(meta["id"], raw) for raw in spec["records"]]
        descriptor = DatasetDescriptor(
            id=meta["id"],
            name=meta["name"],
            domain=meta["domain"],
            format=meta["format"],
            record_count=len(records),
            license_note="bundled toy data",
        )
        ids.append(registry.register(descriptor, records))
    return ids
