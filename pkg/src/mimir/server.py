"""HTTP job service and background runner: the integration surface the
operator UI and scripts drive.

All state lives under one data directory: ``registry/`` (datasets),
``topics.json`` (uploaded topics), and ``jobs/`` (job records and
artifacts). Validation rules for job configs come from a shared schema
file so the UI can enforce the same rules client-side; the server stays
authoritative.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import Body, FastAPI, Query
from fastapi.responses import JSONResponse

from .core import GenerationConfig, Topic, validate_topic
from .errors import (
    EmptyTopicError,
    InvalidConfigError,
    JobNotFoundError,
    MalformedKeywordError,
    MimirError,
    UnknownDomainError,
)
from .ingest import DatasetRegistry, build_data_pool
from .jobs import Job, JobStore
from .provider import Provider, resolve_provider
from .roleplay import generate_dialogue, load_roles
from .trajectory import contextualize_text, run_cot, run_react, run_reflexion
from .tuning import (
    CONFIG_NAME,
    FineTuneConfig,
    emit_finetune_script,
    export_dataset,
    launch_finetune,
    load_dialogue_samples,
)
from .verify import aggregate_hallucination, extract_qa_pairs, verify_pair, write_report

_SCHEMA_PATH = Path(__file__).parent / "data" / "validation_schema.json"

DEFAULT_MAX_JOBS = 2


class ValidationFailure(MimirError):
    """One or more config fields failed validation."""

    def __init__(self, errors: list[dict]):
        super().__init__("; ".join(f"{e['field']}: {e['message']}" for e in errors))
        self.errors = errors


def load_validation_schema() -> dict:
    return json.loads(_SCHEMA_PATH.read_text(encoding="utf-8"))


def validate_fields(section: str, payload: dict) -> dict:
    """Check ``payload`` against one schema section.

    Returns the cleaned config with defaults filled in; raises
    ValidationFailure carrying field-level messages. Unknown fields pass
    through untouched (kind-specific extras are checked by the
    submitters).
    """
    schema = load_validation_schema()[section]
    errors: list[dict] = []
    clean = dict(payload)
    for field_name, rule in schema.items():
        if payload.get(field_name) is None:
            if rule.get("required"):
                errors.append({"field": field_name, "message": "is required"})
            elif "default" in rule:
                clean[field_name] = rule["default"]
            continue
        value = payload[field_name]
        kind = rule["type"]
        if kind == "integer":
            valid_type = isinstance(value, int) and not isinstance(value, bool)
        elif kind == "number":
            valid_type = isinstance(value, (int, float)) and not isinstance(value, bool)
        else:
            valid_type = isinstance(value, str)
        if not valid_type:
            errors.append({"field": field_name, "message": f"must be a {kind}"})
            continue
        if "enum" in rule and value not in rule["enum"]:
            errors.append({"field": field_name, "message": f"must be one of {rule['enum']}"})
        if "min" in rule and value < rule["min"]:
            errors.append({"field": field_name, "message": f"must be >= {rule['min']}"})
        if "max" in rule and value > rule["max"]:
            errors.append({"field": field_name, "message": f"must be <= {rule['max']}"})
        if "min_exclusive" in rule and value <= rule["min_exclusive"]:
            errors.append({"field": field_name, "message": f"must be > {rule['min_exclusive']}"})
        if "max_exclusive" in rule and value >= rule["max_exclusive"]:
            errors.append({"field": field_name, "message": f"must be < {rule['max_exclusive']}"})
        if "min_length" in rule and len(value) < rule["min_length"]:
            errors.append({"field": field_name, "message": "must be non-empty"})
    if errors:
        raise ValidationFailure(errors)
    return clean


class TopicStore:
    """Uploaded topics, persisted as one JSON file, deduped by id."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._lock = threading.Lock()

    def list(self) -> list[Topic]:
        if not self.path.exists():
            return []
        raw = json.loads(self.path.read_text(encoding="utf-8"))
        return [Topic(id=t["id"], kind=t["kind"], text=t["text"], source=t["source"]) for t in raw]

    def add(self, topics: list[Topic]) -> int:
        with self._lock:
            existing = self.list()
            known = {t.id for t in existing}
            added = []
            for topic in topics:
                if topic.id not in known:
                    known.add(topic.id)
                    added.append(topic)
            merged = existing + added
            self.path.parent.mkdir(parents=True, exist_ok=True)
            tmp = self.path.with_suffix(".json.tmp")
            tmp.write_text(
                json.dumps(
                    [{"id": t.id, "kind": t.kind, "text": t.text, "source": t.source} for t in merged],
                    ensure_ascii=False,
                    indent=2,
                ),
                encoding="utf-8",
            )
            tmp.replace(self.path)
            return len(added)


# --- job executors ---

@dataclass
class ExecutorContext:
    job: Job
    store: JobStore
    registry: DatasetRegistry
    topics: TopicStore
    provider_factory: "ProviderFactory"
    cancel_event: threading.Event
    roles_dir: Path | None = None

    @property
    def out_dir(self) -> Path:
        return self.store.out_dir(self.job.id)

    def report(self, done: int, total: int) -> None:
        self.store.update_progress(self.job.id, done, total)

    def cancelled(self) -> bool:
        return self.cancel_event.is_set()

    def add_artifact(self, path: Path | str) -> None:
        self.store.add_artifact(self.job.id, path)


def _generation_config(cfg: dict) -> GenerationConfig:
    return GenerationConfig(
        rounds=cfg["rounds"],
        temperature=cfg["temperature"],
        max_tokens=cfg["max_tokens"],
        framework=cfg.get("framework", "react"),
        picked_roles=tuple(cfg.get("roles", [])),
        tools=tuple(cfg.get("tools", [])),
        rng_seed=cfg.get("rng_seed", 0),
        max_steps=cfg.get("max_steps", 8),
        max_attempts=cfg.get("max_attempts", 2),
    )


def _pool_entries(ctx: ExecutorContext, cfg: dict):
    topics = ctx.topics.list() if cfg.get("include_topics", True) else []
    pool = build_data_pool(
        topics,
        cfg.get("datasets", []),
        ctx.registry,
        per_dataset_cap=cfg.get("per_dataset_cap"),
        rng_seed=cfg.get("rng_seed", 0),
    )
    entries = list(pool.entries)
    limit = cfg.get("limit")
    if limit is not None:
        entries = entries[: int(limit)]
    if not entries:
        raise MimirError("data pool is empty: upload topics or select datasets")
    return entries


def run_dialogue_job(ctx: ExecutorContext) -> None:
    cfg = ctx.job.config
    entries = _pool_entries(ctx, cfg)
    gen_config = _generation_config(cfg)
    roles = []
    picked = list(cfg.get("roles", []))
    if picked:
        catalogue = {r.name: r for r in load_roles(cfg.get("domain", "medical"), ctx.roles_dir)}
        missing = [name for name in picked if name not in catalogue]
        if missing:
            raise InvalidConfigError("roles", f"unknown roles {missing}")
        roles = [catalogue[name] for name in picked]
    provider = ctx.provider_factory.get("generate")

    samples = []
    ctx.report(0, len(entries))
    for i, entry in enumerate(entries):
        if ctx.cancelled():
            return
        sample_config = replace(gen_config, rng_seed=gen_config.rng_seed + i)
        samples.append(generate_dialogue(entry, roles, sample_config, provider))
        ctx.report(i + 1, len(entries))
    destination = ctx.out_dir / "dialogues.jsonl"
    export_dataset(samples, "dialogue", destination)
    ctx.add_artifact(destination)


def run_trajectory_job(ctx: ExecutorContext) -> None:
    cfg = ctx.job.config
    entries = _pool_entries(ctx, cfg)
    gen_config = _generation_config(cfg)
    provider = ctx.provider_factory.get("generate")
    tools = list(cfg.get("tools", ["mock_search"]))

    trajectories = []
    ctx.report(0, len(entries))
    for i, entry in enumerate(entries):
        if ctx.cancelled():
            return
        sample_config = replace(gen_config, rng_seed=gen_config.rng_seed + i)
        question = entry.seed_text
        if entry.provenance[0] == "record:raw":
            question = contextualize_text(question, provider, sample_config)
        framework = gen_config.framework
        if framework == "cot":
            trajectory = run_cot(
                question,
                provider,
                sample_config,
                template_text=cfg.get("cot_template"),
                demonstrations=cfg.get("demonstrations"),
            )
        elif framework == "reflexion":
            trajectory = run_reflexion(
                question, tools, provider, sample_config,
                max_trials=int(cfg.get("max_trials", 2)),
            )
        else:
            trajectory = run_react(question, tools, provider, sample_config)
        trajectories.append(trajectory)
        ctx.report(i + 1, len(entries))
    destination = ctx.out_dir / "trajectories.jsonl"
    export_dataset(
        trajectories, "trajectory", destination,
        include_incomplete=bool(cfg.get("include_incomplete", False)),
    )
    ctx.add_artifact(destination)


def run_verify_job(ctx: ExecutorContext) -> None:
    cfg = ctx.job.config
    source = ctx.store.get(cfg["job_id"])
    jsonl_artifacts = [a for a in source.artifacts if a.endswith(".jsonl")]
    if not jsonl_artifacts:
        raise MimirError(f"job {source.id} has no sample artifact to verify")
    samples = load_dialogue_samples(jsonl_artifacts[0])
    provider = ctx.provider_factory.get("verify")
    selection = cfg.get("turns", "all")

    verdicts = []
    turn_counts: dict[str, int] = {}
    ctx.report(0, len(samples))
    for i, sample in enumerate(samples):
        if ctx.cancelled():
            return
        for pair in extract_qa_pairs(sample, selection):
            verdicts.append(verify_pair(pair, provider))
        turn_counts[sample.id] = sample.rounds
        ctx.report(i + 1, len(samples))

    report = aggregate_hallucination(verdicts, turn_counts)
    report_path = ctx.out_dir / "report.json"
    write_report(report, report_path)
    verdict_path = ctx.out_dir / "verdicts.jsonl"
    with verdict_path.open("w", encoding="utf-8") as fh:
        for verdict in verdicts:
            fh.write(json.dumps(verdict.__dict__, ensure_ascii=False) + "\n")
    ctx.add_artifact(report_path)
    ctx.add_artifact(report_path.with_suffix(".png"))
    ctx.add_artifact(verdict_path)


def run_finetune_job(ctx: ExecutorContext) -> None:
    config = FineTuneConfig.from_dict(ctx.job.config)
    script = emit_finetune_script(config, ctx.out_dir)
    ctx.add_artifact(ctx.out_dir / CONFIG_NAME)
    ctx.add_artifact(script)
    ctx.report(0, 1)

    training = launch_finetune(script)
    while True:
        if ctx.cancelled():
            training.cancel()
            return
        try:
            exit_code = training.wait(timeout=0.1)
            break
        except TimeoutError:
            continue
    log_path = ctx.out_dir / "trainer_output.log"
    log_path.write_text("\n".join(training.output_tail()) + "\n", encoding="utf-8")
    ctx.add_artifact(log_path)
    if exit_code != 0:
        raise MimirError(f"trainer exited with code {exit_code}")
    ctx.report(1, 1)


EXECUTORS = {
    "generate_dialogue": run_dialogue_job,
    "generate_trajectory": run_trajectory_job,
    "verify": run_verify_job,
    "finetune": run_finetune_job,
}


class ProviderFactory:
    """Resolves providers per purpose ("generate" / "verify")."""

    def __init__(self, factory=None):
        self._factory = factory

    def get(self, purpose: str) -> Provider:
        if self._factory is not None:
            return self._factory(purpose)
        return resolve_provider()


class JobRunner:
    """Background dispatcher: picks up queued jobs FIFO and runs each on
    its own worker thread, at most ``max_jobs`` at a time."""

    def __init__(
        self,
        store: JobStore,
        registry: DatasetRegistry,
        topics: TopicStore,
        provider_factory: ProviderFactory,
        max_jobs: int = DEFAULT_MAX_JOBS,
        roles_dir: Path | None = None,
        poll_interval: float = 0.02,
    ):
        self.store = store
        self.registry = registry
        self.topics = topics
        self.provider_factory = provider_factory
        self.max_jobs = max_jobs
        self.roles_dir = roles_dir
        self.poll_interval = poll_interval
        self._cancel_events: dict[str, threading.Event] = {}
        self._workers: dict[str, threading.Thread] = {}
        self._claimed: set[str] = set()
        self._stop = threading.Event()
        self._dispatcher: threading.Thread | None = None

    def start(self) -> None:
        self.store.recover()
        self._dispatcher = threading.Thread(target=self._dispatch_loop, daemon=True)
        self._dispatcher.start()

    def stop(self) -> None:
        self._stop.set()
        if self._dispatcher is not None:
            self._dispatcher.join(timeout=5)
        for worker in list(self._workers.values()):
            worker.join(timeout=5)

    def submit(self, kind: str, config: dict) -> Job:
        clean = self.validate(kind, config)
        return self.store.create(kind, clean)

    def validate(self, kind: str, config: dict) -> dict:
        if kind in ("generate_dialogue", "generate_trajectory"):
            clean = validate_fields("generation", config)
            for list_field in ("roles", "tools", "datasets"):
                value = clean.get(list_field, [])
                if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                    raise ValidationFailure(
                        [{"field": list_field, "message": "must be a list of strings"}]
                    )
            for dataset_id in clean.get("datasets", []):
                self.registry.get(dataset_id)
            _generation_config(clean)  # final authority on value ranges
            return clean
        if kind == "verify":
            job_id = config.get("job_id")
            if not job_id:
                raise ValidationFailure([{"field": "job_id", "message": "is required"}])
            source = self.store.get(job_id)
            if source.kind != "generate_dialogue":
                raise ValidationFailure(
                    [{"field": "job_id", "message": "must reference a dialogue-generation job"}]
                )
            turns = config.get("turns", "all")
            if turns != "all" and not (
                isinstance(turns, list) and all(isinstance(t, int) for t in turns)
            ):
                raise ValidationFailure(
                    [{"field": "turns", "message": 'must be "all" or a list of turn indices'}]
                )
            return dict(config, turns=turns)
        if kind == "finetune":
            clean = validate_fields("finetune", config)
            if not Path(clean["dataset_path"]).exists():
                raise ValidationFailure(
                    [{"field": "dataset_path", "message": "file does not exist"}]
                )
            FineTuneConfig.from_dict(clean)
            return clean
        raise ValidationFailure([{"field": "kind", "message": f"unknown job kind {kind!r}"}])

    def cancel(self, job_id: str) -> Job:
        job = self.store.get(job_id)
        if job.state == "queued":
            return self.store.transition(job_id, "canceled")
        if job.state == "running":
            event = self._cancel_events.setdefault(job_id, threading.Event())
            event.set()
            return self.store.transition(job_id, "canceled")
        return job  # terminal states are absorbing

    def _dispatch_loop(self) -> None:
        while not self._stop.is_set():
            self._workers = {jid: t for jid, t in self._workers.items() if t.is_alive()}
            if len(self._workers) < self.max_jobs:
                for job in self.store.list():
                    if job.state == "queued" and job.id not in self._claimed:
                        self._claimed.add(job.id)
                        self.store.transition(job.id, "running")
                        worker = threading.Thread(target=self._run_job, args=(job.id,), daemon=True)
                        self._workers[job.id] = worker
                        worker.start()
                        break
            self._stop.wait(self.poll_interval)

    def _run_job(self, job_id: str) -> None:
        job = self.store.get(job_id)
        event = self._cancel_events.setdefault(job_id, threading.Event())
        ctx = ExecutorContext(
            job=job,
            store=self.store,
            registry=self.registry,
            topics=self.topics,
            provider_factory=self.provider_factory,
            cancel_event=event,
            roles_dir=self.roles_dir,
        )
        error: str | None = None
        try:
            EXECUTORS[job.kind](ctx)
            final = "succeeded"
        except Exception as exc:
            final, error = "failed", str(exc)
        if event.is_set():
            return  # cancellation already moved the job to its terminal state
        try:
            self.store.transition(job_id, final, error=error)
        except MimirError:
            pass  # a racing cancel won; terminal states are absorbing


# --- HTTP surface ---

class ServerState:
    def __init__(
        self,
        data_dir: Path | str,
        provider_factory=None,
        max_jobs: int = DEFAULT_MAX_JOBS,
        roles_dir: Path | None = None,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.registry = DatasetRegistry(self.data_dir / "registry")
        self.topics = TopicStore(self.data_dir / "topics.json")
        self.store = JobStore(self.data_dir / "jobs")
        self.runner = JobRunner(
            self.store,
            self.registry,
            self.topics,
            ProviderFactory(provider_factory),
            max_jobs=max_jobs,
            roles_dir=roles_dir,
        )


def create_app(
    data_dir: Path | str,
    provider_factory=None,
    max_jobs: int = DEFAULT_MAX_JOBS,
    roles_dir: Path | None = None,
    start_runner: bool = True,
    ui_dir: Path | str | None = None,
) -> FastAPI:
    state = ServerState(data_dir, provider_factory, max_jobs, roles_dir)
    if start_runner:
        state.runner.start()

    app = FastAPI(title="mimir")
    app.state.mimir = state

    @app.exception_handler(ValidationFailure)
    def _validation_failure(_request, exc: ValidationFailure):
        return JSONResponse(status_code=400, content={"error": str(exc), "errors": exc.errors})

    @app.exception_handler(InvalidConfigError)
    def _invalid_config(_request, exc: InvalidConfigError):
        return JSONResponse(
            status_code=400,
            content={"error": str(exc), "errors": [{"field": exc.field, "message": str(exc)}]},
        )

    @app.exception_handler(JobNotFoundError)
    def _job_not_found(_request, exc):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(UnknownDomainError)
    def _unknown_domain(_request, exc):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(MimirError)
    def _mimir_error(_request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/api/datasets")
    def list_datasets(q: str = Query(default="")):
        return [d.to_dict() for d in state.registry.search(q)]

    @app.post("/api/topics")
    def upload_topics(payload: dict = Body(...)):
        kind = payload.get("kind")
        lines = payload.get("lines")
        if kind not in ("keyword", "sentence"):
            raise ValidationFailure([{"field": "kind", "message": "must be 'keyword' or 'sentence'"}])
        if not isinstance(lines, list) or not all(isinstance(x, str) for x in lines):
            raise ValidationFailure([{"field": "lines", "message": "must be a list of strings"}])
        topics = []
        for i, line in enumerate(lines, start=1):
            try:
                topics.append(validate_topic(line, kind))
            except (EmptyTopicError, MalformedKeywordError) as exc:
                raise ValidationFailure(
                    [{"field": "lines", "message": f"line {i}: {exc}"}]
                ) from exc
        return {"added": state.topics.add(topics)}

    @app.get("/api/roles")
    def get_roles(domain: str = Query(default="medical")):
        roles = load_roles(domain, roles_dir)
        return [{"name": r.name, "role_prompt": r.role_prompt} for r in roles]

    @app.get("/api/schema")
    def get_schema():
        return load_validation_schema()

    @app.post("/api/jobs")
    def submit_job(payload: dict = Body(...)):
        kind = payload.get("kind")
        config = payload.get("config") or {}
        job = state.runner.submit(kind, config)
        return {"id": job.id}

    @app.get("/api/jobs")
    def list_jobs():
        return [j.to_view() for j in state.store.list()]

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        return state.store.get(job_id).to_view()

    @app.post("/api/jobs/{job_id}/cancel")
    def cancel_job(job_id: str):
        return state.runner.cancel(job_id).to_view()

    @app.get("/api/jobs/{job_id}/samples")
    def job_samples(job_id: str, offset: int = Query(default=0, ge=0),
                    limit: int = Query(default=20, ge=1, le=500)):
        job = state.store.get(job_id)
        jsonl_artifacts = [a for a in job.artifacts if a.endswith(".jsonl")]
        if not jsonl_artifacts:
            return {"items": [], "total": 0, "offset": offset, "limit": limit}
        lines = Path(jsonl_artifacts[0]).read_text(encoding="utf-8").splitlines()
        items = [json.loads(line) for line in lines[offset : offset + limit] if line.strip()]
        return {"items": items, "total": len(lines), "offset": offset, "limit": limit}

    @app.post("/api/verify")
    def submit_verify(payload: dict = Body(...)):
        job = state.runner.submit("verify", payload)
        return {"id": job.id}

    @app.post("/api/finetune")
    def submit_finetune(payload: dict = Body(...)):
        job = state.runner.submit("finetune", payload)
        return {"id": job.id}

    if ui_dir is not None:
        # mounted last so /api routes keep precedence
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def wait_for_job(store: JobStore, job_id: str, timeout: float = 30.0) -> Job:
    """Poll until a job reaches a terminal state; test/CLI helper."""
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = store.get(job_id)
        if job.state in ("succeeded", "failed", "canceled"):
            return job
        time.sleep(0.02)
    raise TimeoutError(f"job {job_id} still {store.get(job_id).state} after {timeout}s")
