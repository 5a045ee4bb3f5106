"""Dataset export, fine-tuning configuration, training-script emission,
and external-trainer launch.

Training itself stays out of process: this module emits a config + a
launcher script and supervises the spawned trainer as a black box. The
trainer command comes from ``MIMIR_TRAINER_CMD`` at run time (default
``./trainer``).
"""

from __future__ import annotations

import hashlib
import json
import os
import shlex
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    EmptyInputError,
    ExportIoError,
    InvalidConfigError,
    MissingDatasetError,
    SchemaViolationError,
    SpawnFailureError,
)
from .roleplay import InstructionSample
from .trajectory import Trajectory

ENV_TRAINER_CMD = "MIMIR_TRAINER_CMD"
DEFAULT_TAIL_LINES = 200

SCRIPT_NAME = "train.sh"
CONFIG_NAME = "train_config.json"


@dataclass(frozen=True)
class FineTuneConfig:
    """Parameters for one fine-tuning run.

    The numeric defaults are conventional starting points, not tuned
    values; every field is overridable. With method "full" the lora_*
    fields are ignored by the script emitter.
    """

    base_model: str
    dataset_path: str
    output_dir: str
    method: str = "lora"
    lora_rank: int = 8
    lora_alpha: int = 16
    lora_dropout: float = 0.05
    learning_rate: float = 2e-5
    epochs: int = 3
    batch_size: int = 8

    def __post_init__(self):
        if not self.base_model:
            raise InvalidConfigError("base_model", "must be non-empty")
        if self.method not in ("full", "lora"):
            raise InvalidConfigError("method", "must be 'full' or 'lora'")
        if self.lora_rank < 1:
            raise InvalidConfigError("lora_rank", "must be >= 1")
        if self.lora_alpha < 1:
            raise InvalidConfigError("lora_alpha", "must be >= 1")
        if not 0.0 <= self.lora_dropout < 1.0:
            raise InvalidConfigError("lora_dropout", "must be in [0, 1)")
        if self.learning_rate <= 0:
            raise InvalidConfigError("learning_rate", "must be positive")
        if self.epochs < 1:
            raise InvalidConfigError("epochs", "must be >= 1")
        if self.batch_size < 1:
            raise InvalidConfigError("batch_size", "must be >= 1")

    def to_dict(self) -> dict:
        return {
            "base_model": self.base_model,
            "dataset_path": self.dataset_path,
            "output_dir": self.output_dir,
            "method": self.method,
            "lora_rank": self.lora_rank,
            "lora_alpha": self.lora_alpha,
            "lora_dropout": self.lora_dropout,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FineTuneConfig":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


@dataclass(frozen=True)
class ExportSummary:
    count: int
    bytes: int
    digest: str


def export_dataset(
    samples: list,
    kind: str,
    destination: Path | str,
    include_incomplete: bool = False,
) -> ExportSummary:
    """Write samples as JSON Lines; returns count, byte size, and a
    content digest of the file.

    Samples are validated before writing: one that breaks its own
    invariants is refused (SchemaViolationError), never repaired.
    Incomplete trajectories are dropped unless explicitly included.
    """
    if kind not in ("dialogue", "trajectory"):
        raise InvalidConfigError("kind", "must be 'dialogue' or 'trajectory'")
    if not samples:
        raise EmptyInputError("no samples to export")

    expected_type = InstructionSample if kind == "dialogue" else Trajectory
    for sample in samples:
        if not isinstance(sample, expected_type):
            raise SchemaViolationError(
                f"{kind} export got a {type(sample).__name__}"
            )
    if kind == "trajectory" and not include_incomplete:
        samples = [s for s in samples if s.complete]
        if not samples:
            raise EmptyInputError("all trajectories are incomplete; nothing to export")

    lines = []
    for sample in samples:
        sample.validate()
        lines.append(json.dumps(sample.to_dict(), ensure_ascii=False))
    payload = ("\n".join(lines) + "\n").encode("utf-8")

    destination = Path(destination)
    try:
        destination.parent.mkdir(parents=True, exist_ok=True)
        destination.write_bytes(payload)
    except OSError as exc:
        raise ExportIoError(f"cannot write {destination}: {exc}") from exc
    return ExportSummary(
        count=len(samples),
        bytes=len(payload),
        digest=hashlib.sha256(payload).hexdigest(),
    )


def _load_jsonl(path: Path | str) -> list[dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ExportIoError(f"cannot read {path}: {exc}") from exc
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def load_dialogue_samples(path: Path | str) -> list[InstructionSample]:
    return [InstructionSample.from_dict(item) for item in _load_jsonl(path)]


def load_trajectories(path: Path | str) -> list[Trajectory]:
    return [Trajectory.from_dict(item) for item in _load_jsonl(path)]


def emit_finetune_script(config: FineTuneConfig, destination: Path | str) -> Path:
    """Write ``train_config.json`` plus an executable launcher script.

    The script resolves the trainer command from MIMIR_TRAINER_CMD at
    run time, so emission is a pure function of the config: equal
    configs produce byte-identical files.
    """
    if not Path(config.dataset_path).exists():
        raise MissingDatasetError(f"dataset not found: {config.dataset_path}")
    destination = Path(destination)
    destination.mkdir(parents=True, exist_ok=True)

    config_path = destination / CONFIG_NAME
    config_path.write_text(
        json.dumps(config.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    flags = [
        ("--base-model", config.base_model),
        ("--method", config.method),
        ("--dataset", config.dataset_path),
        ("--output-dir", config.output_dir),
        ("--lr", config.learning_rate),
        ("--epochs", config.epochs),
        ("--batch-size", config.batch_size),
    ]
    if config.method == "lora":
        flags += [
            ("--lora-rank", config.lora_rank),
            ("--lora-alpha", config.lora_alpha),
            ("--lora-dropout", config.lora_dropout),
        ]
    flag_lines = " \\\n".join(f"    {flag} {shlex.quote(str(value))}" for flag, value in flags)
    script = (
        "#!/bin/sh\n"
        "set -eu\n"
        f'TRAINER="${{{ENV_TRAINER_CMD}:-./trainer}}"\n'
        f'exec "$TRAINER" \\\n{flag_lines}\n'
    )
    script_path = destination / SCRIPT_NAME
    script_path.write_text(script, encoding="utf-8")
    script_path.chmod(0o755)
    return script_path


class TrainingJob:
    """A spawned trainer process plus its captured output tail.

    The launcher records start time, the last ``tail_limit`` output
    lines, and the exit status; it never interprets what the trainer
    prints.
    """

    def __init__(self, process: subprocess.Popen, tail_limit: int):
        self._process = process
        self._tail: deque[str] = deque(maxlen=tail_limit)
        self._exit_code: int | None = None
        self.started_at = time.time()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._process.stdout is not None
        for line in self._process.stdout:
            self._tail.append(line.rstrip("\n"))
        self._exit_code = self._process.wait()

    def wait(self, timeout: float | None = None) -> int:
        self._reader.join(timeout)
        if self._reader.is_alive():
            raise TimeoutError("trainer still running")
        return self._exit_code

    @property
    def state(self) -> str:
        if self._reader.is_alive() or self._exit_code is None:
            return "running"
        return "succeeded" if self._exit_code == 0 else "failed"

    @property
    def exit_code(self) -> int | None:
        return self._exit_code

    def output_tail(self) -> list[str]:
        return list(self._tail)

    def cancel(self) -> None:
        if self._reader.is_alive():
            self._process.terminate()


def launch_finetune(script_path: Path | str, tail_limit: int = DEFAULT_TAIL_LINES) -> TrainingJob:
    """Spawn an emitted training script as an external process."""
    script_path = Path(script_path)
    if not script_path.exists():
        raise SpawnFailureError(f"script not found: {script_path}")
    if not os.access(script_path, os.X_OK):
        raise SpawnFailureError(f"script is not executable: {script_path}")
    try:
        process = subprocess.Popen(
            [str(script_path)],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            text=True,
            cwd=script_path.parent,
        )
    except OSError as exc:
        raise SpawnFailureError(f"cannot spawn {script_path}: {exc}") from exc
    return TrainingJob(process, tail_limit)
