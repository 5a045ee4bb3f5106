import json
import os
import random
import shlex
import string

import pytest

from mimir.errors import (
    EmptyInputError,
    MissingDatasetError,
    SchemaViolationError,
    SpawnFailureError,
)
from mimir.roleplay import DialogueTurn, InstructionSample
from mimir.trajectory import ReasoningStep, Trajectory
from mimir.tuning import (
    FineTuneConfig,
    emit_finetune_script,
    export_dataset,
    launch_finetune,
    load_dialogue_samples,
    load_trajectories,
)


def random_sample(rng: random.Random, index: int) -> InstructionSample:
    rounds = rng.randint(1, 4)
    turns = []
    for i in range(2 * rounds):
        text = "".join(rng.choices(string.ascii_letters + " .,'", k=rng.randint(1, 60))) or "x"
        turns.append(DialogueTurn(
            index=i + 1,
            speaker="human" if i % 2 == 0 else "assistant",
            text=text.strip() or "x",
        ))
    return InstructionSample(
        id=f"sample{index:04d}",
        seed="seed text",
        roles=rng.sample(["Doctor", "Nurse", "Pharmacist"], k=rng.randint(0, 2)),
        turns=turns,
        meta={"model": "mock", "temperature": 0.1, "max_tokens": 1000, "rng_seed": index},
    )


def complete_trajectory(index=0) -> Trajectory:
    steps = [
        ReasoningStep(index=1, thought="look", action=("mock_search", "q"),
                      observation="found it"),
        ReasoningStep(index=2, thought="done", final_answer="the answer"),
    ]
    return Trajectory(
        id=f"traj{index:03d}", question="why?", steps=steps, final_answer="the answer",
        meta={"framework": "react", "incomplete": False},
    )


def incomplete_trajectory(index=0) -> Trajectory:
    steps = [ReasoningStep(index=1, thought="look", action=("mock_search", "q"),
                           observation="hmm")]
    return Trajectory(
        id=f"inc{index:03d}", question="why?", steps=steps, final_answer=None,
        meta={"framework": "react", "incomplete": True},
    )


class TestExport:
    def test_dialogue_round_trip(self, tmp_path, three_round_sample):
        path = tmp_path / "out.jsonl"
        summary = export_dataset([three_round_sample], "dialogue", path)
        assert summary.count == 1
        assert load_dialogue_samples(path) == [three_round_sample]

    def test_trajectory_round_trip(self, tmp_path):
        path = tmp_path / "out.jsonl"
        trajectories = [complete_trajectory(i) for i in range(3)]
        export_dataset(trajectories, "trajectory", path)
        assert load_trajectories(path) == trajectories

    def test_round_trip_on_random_samples(self, tmp_path):
        rng = random.Random(42)
        samples = [random_sample(rng, i) for i in range(100)]
        path = tmp_path / "big.jsonl"
        export_dataset(samples, "dialogue", path)
        assert load_dialogue_samples(path) == samples

    def test_reexport_has_identical_digest(self, tmp_path, three_round_sample):
        first = export_dataset([three_round_sample], "dialogue", tmp_path / "a.jsonl")
        second = export_dataset([three_round_sample], "dialogue", tmp_path / "b.jsonl")
        assert first.digest == second.digest
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_non_alternating_sample_refused(self, tmp_path):
        broken = InstructionSample(
            id="bad", seed="s", roles=[],
            turns=[
                DialogueTurn(index=1, speaker="human", text="hi"),
                DialogueTurn(index=2, speaker="human", text="hi again"),
            ],
        )
        with pytest.raises(SchemaViolationError):
            export_dataset([broken], "dialogue", tmp_path / "x.jsonl")
        assert not (tmp_path / "x.jsonl").exists()

    def test_kind_mismatch_refused(self, tmp_path, three_round_sample):
        with pytest.raises(SchemaViolationError):
            export_dataset([three_round_sample], "trajectory", tmp_path / "x.jsonl")

    def test_incomplete_trajectories_excluded_by_default(self, tmp_path):
        path = tmp_path / "t.jsonl"
        export_dataset([complete_trajectory(), incomplete_trajectory()], "trajectory", path)
        assert len(load_trajectories(path)) == 1

    def test_incomplete_trajectories_included_on_request(self, tmp_path):
        path = tmp_path / "t.jsonl"
        export_dataset([complete_trajectory(), incomplete_trajectory()], "trajectory", path,
                       include_incomplete=True)
        loaded = load_trajectories(path)
        assert len(loaded) == 2
        assert loaded[1].final_answer is None

    def test_all_incomplete_is_an_error(self, tmp_path):
        with pytest.raises(EmptyInputError):
            export_dataset([incomplete_trajectory()], "trajectory", tmp_path / "t.jsonl")

    def test_empty_input(self, tmp_path):
        with pytest.raises(EmptyInputError):
            export_dataset([], "dialogue", tmp_path / "x.jsonl")

    def test_line_schema(self, tmp_path, three_round_sample):
        path = tmp_path / "out.jsonl"
        export_dataset([three_round_sample], "dialogue", path)
        line = json.loads(path.read_text().splitlines()[0])
        assert set(line) == {"id", "seed", "roles", "turns", "meta"}
        assert set(line["turns"][0]) == {"speaker", "text"}
        assert set(line["meta"]) == {"model", "temperature", "max_tokens", "rng_seed"}


@pytest.fixture
def dataset_file(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text('{"id": "x"}\n')
    return path


def script_flags(script_text: str) -> dict[str, str]:
    tokens = shlex.split(script_text.split("exec", 1)[1].replace("\\\n", " "))
    flags = {}
    for i, token in enumerate(tokens):
        if token.startswith("--"):
            flags[token] = tokens[i + 1]
    return flags


class TestEmitScript:
    def config(self, dataset_file, tmp_path, **overrides):
        defaults = dict(
            base_model="llama-7b",
            dataset_path=str(dataset_file),
            output_dir=str(tmp_path / "model_out"),
        )
        defaults.update(overrides)
        return FineTuneConfig(**defaults)

    def test_lora_flags_echo_config(self, dataset_file, tmp_path):
        config = self.config(dataset_file, tmp_path, method="lora", lora_rank=8)
        script = emit_finetune_script(config, tmp_path / "emit")
        flags = script_flags(script.read_text())
        assert flags["--lora-rank"] == "8"
        assert flags["--lora-alpha"] == "16"
        assert flags["--lora-dropout"] == "0.05"
        assert flags["--base-model"] == "llama-7b"
        assert flags["--dataset"] == str(dataset_file)
        assert flags["--lr"] == str(config.learning_rate)
        assert flags["--epochs"] == "3"
        assert flags["--batch-size"] == "8"

    def test_full_method_has_no_lora_flags(self, dataset_file, tmp_path):
        config = self.config(dataset_file, tmp_path, method="full")
        script = emit_finetune_script(config, tmp_path / "emit")
        assert "--lora" not in script.read_text()

    def test_config_round_trip(self, dataset_file, tmp_path):
        config = self.config(dataset_file, tmp_path, epochs=5, learning_rate=1e-4)
        emit_finetune_script(config, tmp_path / "emit")
        stored = json.loads((tmp_path / "emit" / "train_config.json").read_text())
        assert FineTuneConfig.from_dict(stored) == config

    def test_emission_is_pure(self, dataset_file, tmp_path):
        config = self.config(dataset_file, tmp_path)
        emit_finetune_script(config, tmp_path / "one")
        emit_finetune_script(config, tmp_path / "two")
        assert (tmp_path / "one" / "train.sh").read_bytes() == \
            (tmp_path / "two" / "train.sh").read_bytes()
        assert (tmp_path / "one" / "train_config.json").read_bytes() == \
            (tmp_path / "two" / "train_config.json").read_bytes()

    def test_missing_dataset(self, tmp_path):
        config = FineTuneConfig(base_model="m", dataset_path=str(tmp_path / "ghost.jsonl"),
                                output_dir="out")
        with pytest.raises(MissingDatasetError):
            emit_finetune_script(config, tmp_path / "emit")

    def test_script_is_executable(self, dataset_file, tmp_path):
        script = emit_finetune_script(self.config(dataset_file, tmp_path), tmp_path / "emit")
        assert os.access(script, os.X_OK)


def stub_script(tmp_path, body: str) -> "Path":
    path = tmp_path / "stub.sh"
    path.write_text(f"#!/bin/sh\n{body}\n")
    path.chmod(0o755)
    return path


class TestLaunch:
    def test_exit_zero_succeeds(self, tmp_path):
        job = launch_finetune(stub_script(tmp_path, "echo training\nexit 0"))
        assert job.wait(timeout=10) == 0
        assert job.state == "succeeded"
        assert "training" in job.output_tail()

    def test_nonzero_exit_fails_with_code(self, tmp_path):
        job = launch_finetune(stub_script(tmp_path, "exit 3"))
        assert job.wait(timeout=10) == 3
        assert job.state == "failed"
        assert job.exit_code == 3

    def test_tail_policy_keeps_last_lines(self, tmp_path):
        # oracle: a plain line counter over the stub's output
        total, keep = 10_000, 200
        job = launch_finetune(
            stub_script(tmp_path, f'i=1\nwhile [ $i -le {total} ]; do echo "line $i"; i=$((i+1)); done'),
            tail_limit=keep,
        )
        job.wait(timeout=30)
        tail = job.output_tail()
        assert len(tail) == keep
        assert tail == [f"line {i}" for i in range(total - keep + 1, total + 1)]

    def test_missing_script(self, tmp_path):
        with pytest.raises(SpawnFailureError):
            launch_finetune(tmp_path / "ghost.sh")

    def test_non_executable_script(self, tmp_path):
        path = tmp_path / "noexec.sh"
        path.write_text("#!/bin/sh\nexit 0\n")
        path.chmod(0o644)
        with pytest.raises(SpawnFailureError):
            launch_finetune(path)

    def test_emitted_script_runs_trainer_command(self, tmp_path, monkeypatch):
        dataset = tmp_path / "d.jsonl"
        dataset.write_text("{}\n")
        trainer = tmp_path / "trainer.sh"
        trainer.write_text('#!/bin/sh\necho "trainer got: $@"\nexit 0\n')
        trainer.chmod(0o755)
        monkeypatch.setenv("MIMIR_TRAINER_CMD", str(trainer))
        config = FineTuneConfig(base_model="m", dataset_path=str(dataset),
                                output_dir=str(tmp_path / "out"))
        script = emit_finetune_script(config, tmp_path / "emit")
        job = launch_finetune(script)
        assert job.wait(timeout=10) == 0
        output = "\n".join(job.output_tail())
        assert "--base-model m" in output
        assert "--lora-rank 8" in output
