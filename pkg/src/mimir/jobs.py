"""On-disk job records with an enforced state machine.

Each job lives in its own directory: ``state.json`` is the current
snapshot, ``events.log`` the append-only transition history, and
``out/`` holds artifacts. Terminal states are absorbing; every illegal
transition raises instead of being papered over.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IllegalTransitionError, InvalidConfigError, JobNotFoundError

JOB_KINDS = ("generate_dialogue", "generate_trajectory", "verify", "finetune")
JOB_STATES = ("queued", "running", "succeeded", "failed", "canceled")
TERMINAL_STATES = frozenset({"succeeded", "failed", "canceled"})

LEGAL_TRANSITIONS = frozenset(
    {
        ("queued", "running"),
        ("queued", "canceled"),
        ("running", "succeeded"),
        ("running", "failed"),
        ("running", "canceled"),
    }
)


@dataclass
class Job:
    id: str
    kind: str
    state: str = "queued"
    progress_done: int = 0
    progress_total: int = 0
    config: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    error: str | None = None
    created_at: float = 0.0

    def to_view(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "state": self.state,
            "progress": {"done": self.progress_done, "total": self.progress_total},
            "config": dict(self.config),
            "artifacts": list(self.artifacts),
            "error": self.error,
            "created_at": self.created_at,
        }

    @classmethod
    def from_view(cls, data: dict) -> "Job":
        return cls(
            id=data["id"],
            kind=data["kind"],
            state=data["state"],
            progress_done=data["progress"]["done"],
            progress_total=data["progress"]["total"],
            config=dict(data.get("config", {})),
            artifacts=list(data.get("artifacts", [])),
            error=data.get("error"),
            created_at=data.get("created_at", 0.0),
        )


def replay_transitions(events: list[dict]) -> str:
    """Replay an event history, raising if any step was illegal.

    Returns the final state; a fresh job with no events is "queued".
    """
    state = "queued"
    for event in events:
        step = (event["from"], event["to"])
        if event["from"] != state or step not in LEGAL_TRANSITIONS:
            raise IllegalTransitionError(f"illegal transition {step} from state {state!r}")
        state = event["to"]
    return state


class JobStore:
    """Directory-backed job persistence; single writer, snapshot reads."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _job_dir(self, job_id: str) -> Path:
        return self.root / job_id

    def _state_path(self, job_id: str) -> Path:
        return self._job_dir(job_id) / "state.json"

    def _events_path(self, job_id: str) -> Path:
        return self._job_dir(job_id) / "events.log"

    def out_dir(self, job_id: str) -> Path:
        path = self._job_dir(job_id) / "out"
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _write(self, job: Job) -> None:
        path = self._state_path(job.id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(job.to_view(), indent=2), encoding="utf-8")
        tmp.replace(path)

    def _append_event(self, job_id: str, old: str, new: str, error: str | None) -> None:
        event = {"ts": time.time(), "from": old, "to": new}
        if error:
            event["error"] = error
        with self._events_path(job_id).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def create(self, kind: str, config: dict) -> Job:
        if kind not in JOB_KINDS:
            raise InvalidConfigError("kind", f"must be one of {JOB_KINDS}")
        job = Job(
            id=uuid.uuid4().hex[:12],
            kind=kind,
            config=dict(config),
            created_at=time.time(),
        )
        with self._lock:
            self._job_dir(job.id).mkdir(parents=True)
            self._write(job)
        return job

    def get(self, job_id: str) -> Job:
        path = self._state_path(job_id)
        if not path.exists():
            raise JobNotFoundError(f"no job {job_id!r}")
        return Job.from_view(json.loads(path.read_text(encoding="utf-8")))

    def list(self) -> list[Job]:
        jobs = []
        for entry in sorted(self.root.iterdir()):
            if (entry / "state.json").exists():
                jobs.append(self.get(entry.name))
        return sorted(jobs, key=lambda j: j.created_at)

    def events(self, job_id: str) -> list[dict]:
        path = self._events_path(job_id)
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]

    def transition(self, job_id: str, new_state: str, error: str | None = None) -> Job:
        """Move a job to ``new_state``; illegal moves raise and change nothing."""
        with self._lock:
            job = self.get(job_id)
            if (job.state, new_state) not in LEGAL_TRANSITIONS:
                raise IllegalTransitionError(
                    f"job {job_id}: cannot go {job.state!r} -> {new_state!r}"
                )
            old = job.state
            job.state = new_state
            if error is not None:
                job.error = error
            self._append_event(job_id, old, new_state, error)
            self._write(job)
            return job

    def update_progress(self, job_id: str, done: int, total: int) -> Job:
        with self._lock:
            job = self.get(job_id)
            done = max(done, job.progress_done)  # progress never moves backwards
            if done > total:
                raise InvalidConfigError("progress", f"done {done} exceeds total {total}")
            job.progress_done = done
            job.progress_total = total
            self._write(job)
            return job

    def add_artifact(self, job_id: str, artifact_path: Path | str) -> Job:
        with self._lock:
            job = self.get(job_id)
            path = str(artifact_path)
            if path not in job.artifacts:
                job.artifacts.append(path)
            self._write(job)
            return job

    def recover(self) -> list[Job]:
        """Startup pass: queued jobs survive, running jobs are marked
        failed ("interrupted") rather than silently resumed."""
        interrupted = []
        for job in self.list():
            if job.state == "running":
                interrupted.append(self.transition(job.id, "failed", error="interrupted"))
        return interrupted
