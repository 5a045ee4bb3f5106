import json

import pytest

from mimir.core import GenerationConfig
from mimir.errors import (
    EmptyResultsError,
    EmptySeedError,
    MissingPlaceholderError,
    ToolUnavailableError,
    UnparseableStepError,
)
from mimir.ingest import DatasetRecord
from mimir.provider import script_mock
from mimir.trajectory import (
    MockSearchTool,
    SearchResult,
    ToolRegistry,
    execute_search,
    load_tool_registry,
    observation_for,
    render_cot_prompt,
    run_cot,
    run_react,
    run_reflexion,
    synthesize_seed_instruction,
)


def config(**kwargs):
    kwargs.setdefault("rounds", 1)
    return GenerationConfig(**kwargs)


def result(rank=1, title="Title", snippet="Snippet text.", highlighted=(), url="https://x.invalid"):
    return SearchResult(rank=rank, title=title, snippet=snippet, highlighted=highlighted, url=url)


class TestSynthesizeSeed:
    def test_instruction_record_passes_through_verbatim(self):
        record = DatasetRecord(dataset_id="d", record_id="1",
                               question="What is the capital of France?", answer="Paris")
        mock = script_mock([])  # any call would blow up the empty script
        assert synthesize_seed_instruction(record, mock, config()) == "What is the capital of France?"
        assert mock.call_count == 0

    def test_raw_record_is_contextualized(self):
        record = DatasetRecord(dataset_id="d", record_id="1",
                               text="headaches, sore throat, dry heaves")
        rewrite = (
            "Recently, I've been experiencing headaches and a sore throat. In the mornings, "
            "I feel nauseous, especially when brushing my teeth, accompanied by dry heaves. "
            "What should I do?"
        )
        mock = script_mock([("headaches, sore throat, dry heaves", rewrite)])
        assert synthesize_seed_instruction(record, mock, config()) == rewrite
        assert mock.call_count == 1

    def test_empty_raw_text_rejected(self):
        record = DatasetRecord(dataset_id="d", record_id="1", text="x")
        object.__setattr__(record, "text", "   ")
        with pytest.raises(EmptySeedError):
            synthesize_seed_instruction(record, script_mock([]), config())


class TestExecuteSearch:
    def registry_with(self, query, results):
        return ToolRegistry({"mock_search": MockSearchTool(fixtures={query: results})})

    def test_highlights_take_priority(self):
        registry = self.registry_with(
            "cataract", [result(highlighted=("cataract", "surgery"))]
        )
        results, observation = execute_search("mock_search", "cataract", registry)
        assert observation == "cataract surgery"
        assert results[0].rank == 1

    def test_snippet_fallback(self):
        registry = self.registry_with("cataract", [result(snippet="Lens clouding is gradual.")])
        _, observation = execute_search("mock_search", "cataract", registry)
        assert observation == "Lens clouding is gradual."

    def test_title_fallback(self):
        registry = self.registry_with("cataract", [result(snippet="", title="Cataract")])
        _, observation = execute_search("mock_search", "cataract", registry)
        assert observation == "Cataract"

    def test_empty_results(self):
        registry = self.registry_with("nothing", [])
        with pytest.raises(EmptyResultsError) as excinfo:
            execute_search("mock_search", "nothing", registry)
        assert excinfo.value.observation == "No results found."

    def test_unknown_tool(self):
        with pytest.raises(ToolUnavailableError):
            execute_search("warp_drive", "q", ToolRegistry())

    def test_rank_two_never_consulted(self):
        registry = self.registry_with(
            "q", [result(snippet="first"), result(rank=2, snippet="second", highlighted=("x",))]
        )
        _, observation = execute_search("mock_search", "q", registry)
        assert observation == "first"

    def test_exhaustive_fallback_chain(self):
        # DERIVED oracle: first non-empty of [joined highlights, snippet, title]
        cases = [
            (("h1", "h2"), "snip", "title"),
            ((), "snip", "title"),
            ((), "", "title"),
            (("h1",), "", ""),
            ((), "snip", ""),
        ]
        for highlighted, snippet, title in cases:
            expected = " ".join(highlighted) or snippet or title
            observed = observation_for(
                [result(highlighted=highlighted, snippet=snippet, title=title)]
            )
            assert observed == expected

    def test_tools_json_registry(self, tmp_path):
        path = tmp_path / "tools.json"
        path.write_text(json.dumps([
            {"name": "offline", "kind": "mock"},
            {"name": "google_search", "kind": "serp"},
        ]))
        registry = load_tool_registry(path)
        results, _ = execute_search("offline", "anything", registry)
        assert results[0].rank == 1
        # serp without a key is registered but unavailable at call time
        with pytest.raises(ToolUnavailableError):
            execute_search("google_search", "q", registry)


def react_registry():
    return ToolRegistry({
        "mock_search": MockSearchTool(fixtures={
            "cataract": [result(title="Cataract", snippet="Lens clouding.",
                                highlighted=("cataract", "surgery"))],
        })
    })


class TestRunReact:
    def test_two_step_fixture(self):
        mock = script_mock([
            "Thought: need facts\nAction: mock_search[cataract]",
            "Thought: enough\nFinal Answer: Surgery replaces the lens.",
        ])
        trajectory = run_react("How are cataracts treated?", ["mock_search"], mock,
                               config(), registry=react_registry())
        assert len(trajectory.steps) == 2
        step1, step2 = trajectory.steps
        assert step1.thought == "need facts"
        assert step1.action == ("mock_search", "cataract")
        assert step1.observation == "cataract surgery"
        assert step2.final_answer == "Surgery replaces the lens."
        assert trajectory.final_answer == "Surgery replaces the lens."
        assert len(trajectory.tool_transcript) == 1
        assert trajectory.complete
        assert mock.call_count == 2

    def test_always_acting_mock_hits_max_steps(self):
        max_steps = 4
        mock = script_mock(
            [f"Thought: step {i}\nAction: mock_search[cataract]" for i in range(max_steps)]
        )
        trajectory = run_react("q?", ["mock_search"], mock, config(max_steps=max_steps),
                               registry=react_registry())
        assert len(trajectory.steps) == max_steps
        assert trajectory.final_answer is None
        assert not trajectory.complete
        assert trajectory.meta["incomplete"] is True
        assert mock.call_count == max_steps
        assert mock.call_count <= 2 * max_steps

    def test_immediate_final_answer(self):
        mock = script_mock(["Thought: trivial\nFinal Answer: X"])
        trajectory = run_react("q?", ["mock_search"], mock, config(),
                               registry=react_registry())
        assert len(trajectory.steps) == 1
        assert trajectory.tool_transcript == []
        assert trajectory.final_answer == "X"

    def test_reprompt_recovers_from_bad_format(self):
        mock = script_mock([
            "I think the answer is probably surgery",  # unparseable
            "Thought: fine\nFinal Answer: Surgery.",
        ])
        trajectory = run_react("q?", ["mock_search"], mock, config(),
                               registry=react_registry())
        assert trajectory.final_answer == "Surgery."
        assert mock.call_count == 2
        reprompt = mock.calls[1].prompt
        assert "did not follow the required format" in reprompt

    def test_two_bad_replies_raise(self):
        mock = script_mock(["gibberish", "more gibberish"])
        with pytest.raises(UnparseableStepError):
            run_react("q?", ["mock_search"], mock, config(), registry=react_registry())

    def test_tool_error_becomes_observation(self):
        mock = script_mock([
            "Thought: search\nAction: missing_tool[q]",
            "Thought: ok\nFinal Answer: done",
        ])
        trajectory = run_react("q?", ["missing_tool"], mock, config(),
                               registry=react_registry())
        assert trajectory.steps[0].observation.startswith("Tool error:")
        assert trajectory.final_answer == "done"

    def test_no_results_observation(self):
        registry = ToolRegistry({"mock_search": MockSearchTool(fixtures={"void": []})})
        mock = script_mock([
            "Thought: search\nAction: mock_search[void]",
            "Thought: ok\nFinal Answer: unknown",
        ])
        trajectory = run_react("q?", ["mock_search"], mock, config(), registry=registry)
        assert trajectory.steps[0].observation == "No results found."

    def test_observation_fed_back_into_prompt(self):
        mock = script_mock([
            "Thought: need facts\nAction: mock_search[cataract]",
            "Thought: enough\nFinal Answer: done",
        ])
        run_react("q?", ["mock_search"], mock, config(), registry=react_registry())
        assert "Observation: cataract surgery" in mock.calls[1].prompt

    def test_deterministic_replay(self):
        script = [
            "Thought: need facts\nAction: mock_search[cataract]",
            "Thought: enough\nFinal Answer: Surgery.",
        ]
        dumps = []
        for _ in range(2):
            trajectory = run_react("q?", ["mock_search"], script_mock(list(script)),
                                   config(rng_seed=5), registry=react_registry())
            dumps.append(json.dumps(trajectory.to_dict(), sort_keys=True))
        assert dumps[0] == dumps[1]


class TestRenderCot:
    def test_direct_substitution(self):
        template = "Q: {question}\nA: Let's think step by step."
        assert render_cot_prompt(template, "Why?") == "Q: Why?\nA: Let's think step by step."

    def test_missing_placeholder(self):
        with pytest.raises(MissingPlaceholderError):
            render_cot_prompt("no slot here", "Why?")

    def test_demonstrations_joined_by_blank_lines(self):
        # DERIVED oracle: plain string assembly
        template = "{demonstrations}\n\nQ: {question}\nA:"
        demos = ["Q: a\nA: 1", "Q: b\nA: 2"]
        expected = "Q: a\nA: 1\n\nQ: b\nA: 2\n\nQ: Why?\nA:"
        assert render_cot_prompt(template, "Why?", demos) == expected

    def test_other_braces_untouched(self):
        template = "{not_a_slot} Q: {question}"
        assert render_cot_prompt(template, "x") == "{not_a_slot} Q: x"

    def test_run_cot_single_step(self):
        mock = script_mock(["Step one. Step two. Answer: 42"])
        trajectory = run_cot("What is six times seven?", mock, config())
        assert trajectory.complete
        assert trajectory.final_answer == "42"
        assert len(trajectory.steps) == 1
        assert trajectory.meta["framework"] == "cot"


class TestRunReflexion:
    INCOMPLETE = "Thought: hmm\nAction: mock_search[cataract]"

    def test_second_trial_completes_with_one_reflection(self):
        max_steps = 2
        mock = script_mock([
            self.INCOMPLETE, self.INCOMPLETE,          # trial 1 burns max_steps
            ("Failed attempt", "Reflection: search differently."),
            "Thought: retry\nFinal Answer: Surgery.",  # trial 2
        ])
        trajectory = run_reflexion("q?", ["mock_search"], mock, config(max_steps=max_steps),
                                   max_trials=2, registry=react_registry())
        assert trajectory.complete
        assert trajectory.meta["trials"] == 2
        assert trajectory.meta["reflections"] == ["Reflection: search differently."]

    def test_first_trial_success_means_no_reflection_calls(self):
        mock = script_mock(["Thought: easy\nFinal Answer: done"])
        trajectory = run_reflexion("q?", ["mock_search"], mock, config(), max_trials=3,
                                   registry=react_registry())
        assert trajectory.complete
        assert trajectory.meta["reflections"] == []
        assert mock.call_count == 1

    def test_all_trials_incomplete(self):
        max_steps, max_trials = 1, 3
        script = []
        for trial in range(max_trials):
            script.append(self.INCOMPLETE)
            if trial < max_trials - 1:
                script.append(("Failed attempt", f"reflection {trial + 1}"))
        mock = script_mock(script)
        trajectory = run_reflexion("q?", ["mock_search"], mock, config(max_steps=max_steps),
                                   max_trials=max_trials, registry=react_registry())
        assert not trajectory.complete
        assert len(trajectory.meta["reflections"]) == max_trials - 1

    def test_reflections_prepended_to_next_scaffold(self):
        mock = script_mock([
            self.INCOMPLETE,
            ("Failed attempt", "try the snippet"),
            "Thought: ok\nFinal Answer: done",
        ])
        run_reflexion("q?", ["mock_search"], mock, config(max_steps=1), max_trials=2,
                      registry=react_registry())
        trial2_prompt = mock.calls[2].prompt
        assert "try the snippet" in trial2_prompt
