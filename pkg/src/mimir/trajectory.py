"""Agent-tuning trajectories: seed-instruction synthesis, the
thought/action/observation loop, CoT template rendering, Reflexion
retries, and the search-tool registry.

The action grammar is fixed as ``Action: <tool>[<input>]`` on one line;
a step either acts or finishes with ``Final Answer:``.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .core import GenerationConfig
from .errors import (
    EmptyResultsError,
    EmptySeedError,
    InvalidConfigError,
    MissingPlaceholderError,
    SchemaViolationError,
    ToolUnavailableError,
    UnparseableStepError,
)
from .ingest import DatasetRecord
from .provider import CompletionRequest, Provider

ENV_SERP_KEY = "MIMIR_SERP_API_KEY"
ENV_TAVILY_KEY = "MIMIR_TAVILY_API_KEY"

NO_RESULTS_OBSERVATION = "No results found."


@dataclass(frozen=True)
class SearchResult:
    rank: int
    title: str
    snippet: str
    highlighted: tuple[str, ...] = ()
    url: str = ""

    def __post_init__(self):
        if self.rank < 1:
            raise InvalidConfigError("rank", "ranks are 1-based")
        object.__setattr__(self, "highlighted", tuple(self.highlighted))

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "title": self.title,
            "snippet": self.snippet,
            "highlighted": list(self.highlighted),
            "url": self.url,
        }


@dataclass(frozen=True)
class ReasoningStep:
    index: int
    thought: str
    action: tuple[str, str] | None = None
    observation: str | None = None
    final_answer: str | None = None

    def __post_init__(self):
        if (self.action is None) != (self.observation is None):
            raise SchemaViolationError("a step carries an action and observation together or neither")
        if self.final_answer is not None and self.action is not None:
            raise SchemaViolationError("a final-answer step cannot also act")


@dataclass
class Trajectory:
    """One question's full reasoning record.

    ``tool_transcript`` is a generation-time artifact (raw tool traffic)
    and is not part of the exported sample, so it is excluded from
    value equality.
    """

    id: str
    question: str
    steps: list[ReasoningStep]
    final_answer: str | None = None
    tool_transcript: list[tuple[str, str, object]] = field(default_factory=list, compare=False)
    meta: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.final_answer is not None

    def validate(self) -> None:
        if not self.steps:
            raise SchemaViolationError("trajectory has no steps")
        for position, step in enumerate(self.steps, start=1):
            if step.index != position:
                raise SchemaViolationError(
                    f"step indices must run 1..{len(self.steps)}, got {step.index} at {position}"
                )
            if step.final_answer is not None and position != len(self.steps):
                raise SchemaViolationError("only the last step may carry a final answer")
        last_final = self.steps[-1].final_answer
        if last_final != self.final_answer:
            raise SchemaViolationError("trajectory final answer must match its last step")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "question": self.question,
            "steps": [
                {
                    "thought": s.thought,
                    "action": {"tool": s.action[0], "input": s.action[1]} if s.action else None,
                    "observation": s.observation,
                }
                for s in self.steps
            ],
            "final_answer": self.final_answer,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        steps = []
        raw_steps = data["steps"]
        for i, raw in enumerate(raw_steps, start=1):
            action = raw.get("action")
            steps.append(
                ReasoningStep(
                    index=i,
                    thought=raw.get("thought", ""),
                    action=(action["tool"], action["input"]) if action else None,
                    observation=raw.get("observation"),
                    final_answer=data.get("final_answer") if i == len(raw_steps) else None,
                )
            )
        return cls(
            id=data["id"],
            question=data["question"],
            steps=steps,
            final_answer=data.get("final_answer"),
            meta=dict(data.get("meta", {})),
        )


# --- search tools ---

def observation_for(results: list[SearchResult]) -> str:
    """The observation a loop records for a result list.

    From the rank-1 result: the joined highlighted terms when present,
    else the snippet, else the title.
    """
    first = results[0]
    if first.highlighted:
        return " ".join(first.highlighted)
    if first.snippet:
        return first.snippet
    return first.title


class SearchTool:
    name = "search"

    def search(self, query: str) -> list[SearchResult]:
        raise NotImplementedError


class MockSearchTool(SearchTool):
    """Offline search: canned fixtures by exact query, or a synthesized
    deterministic result for anything else."""

    name = "mock_search"

    def __init__(self, fixtures: dict[str, list[SearchResult]] | None = None):
        self.fixtures = dict(fixtures or {})

    def search(self, query: str) -> list[SearchResult]:
        if query in self.fixtures:
            return list(self.fixtures[query])
        return [
            SearchResult(
                rank=1,
                title=f"Reference entry: {query}",
                snippet=f"Background summary about {query}.",
                highlighted=(),
                url=f"https://search.invalid/?q={query.replace(' ', '+')}",
            )
        ]


class SerpSearchTool(SearchTool):
    """Google search via SerpAPI.

    The "highlight words" come from the configurable
    ``highlight_field`` of each organic result (default
    ``snippet_highlighted_words``).
    """

    name = "google_search"

    def __init__(
        self,
        api_key: str | None = None,
        endpoint: str = "https://serpapi.com/search",
        highlight_field: str = "snippet_highlighted_words",
        session: requests.Session | None = None,
    ):
        self.api_key = api_key
        self.endpoint = endpoint
        self.highlight_field = highlight_field
        self._session = session or requests.Session()

    def search(self, query: str) -> list[SearchResult]:
        key = self.api_key or os.environ.get(ENV_SERP_KEY)
        if not key:
            raise ToolUnavailableError(f"{self.name}: {ENV_SERP_KEY} is not set")
        try:
            response = self._session.get(
                self.endpoint,
                params={"q": query, "api_key": key, "engine": "google"},
                timeout=30,
            )
            response.raise_for_status()
            data = response.json()
        except requests.RequestException as exc:
            raise ToolUnavailableError(f"{self.name}: {exc}") from exc
        if "error" in data:
            raise ToolUnavailableError(f"{self.name}: {data['error']}")
        results = []
        for i, item in enumerate(data.get("organic_results", []), start=1):
            results.append(
                SearchResult(
                    rank=i,
                    title=item.get("title", ""),
                    snippet=item.get("snippet", ""),
                    highlighted=tuple(item.get(self.highlight_field, []) or ()),
                    url=item.get("link", ""),
                )
            )
        return results


class TavilySearchTool(SearchTool):
    """Tavily search; its per-result content maps to the snippet and a
    top-level answer, when returned, becomes the rank-1 highlight."""

    name = "tavily_search"

    def __init__(
        self,
        api_key: str | None = None,
        endpoint: str = "https://api.tavily.com/search",
        session: requests.Session | None = None,
    ):
        self.api_key = api_key
        self.endpoint = endpoint
        self._session = session or requests.Session()

    def search(self, query: str) -> list[SearchResult]:
        key = self.api_key or os.environ.get(ENV_TAVILY_KEY)
        if not key:
            raise ToolUnavailableError(f"{self.name}: {ENV_TAVILY_KEY} is not set")
        try:
            response = self._session.post(
                self.endpoint,
                json={"api_key": key, "query": query, "include_answer": True},
                timeout=30,
            )
            response.raise_for_status()
            data = response.json()
        except requests.RequestException as exc:
            raise ToolUnavailableError(f"{self.name}: {exc}") from exc
        answer = data.get("answer") or ""
        results = []
        for i, item in enumerate(data.get("results", []), start=1):
            results.append(
                SearchResult(
                    rank=i,
                    title=item.get("title", ""),
                    snippet=item.get("content", ""),
                    highlighted=(answer,) if i == 1 and answer else (),
                    url=item.get("url", ""),
                )
            )
        return results


class ToolRegistry:
    def __init__(self, tools: dict[str, SearchTool] | None = None):
        self.tools = dict(tools or {})

    def add(self, tool: SearchTool) -> None:
        self.tools[tool.name] = tool

    def get(self, name: str) -> SearchTool:
        if name not in self.tools:
            raise ToolUnavailableError(f"no tool named {name!r} is registered")
        return self.tools[name]


def default_tool_registry() -> ToolRegistry:
    registry = ToolRegistry()
    registry.add(MockSearchTool())
    registry.add(SerpSearchTool())
    registry.add(TavilySearchTool())
    return registry


def load_tool_registry(config_path: Path | str) -> ToolRegistry:
    """Build a registry from a ``tools.json`` config file.

    The file is an array of {name, kind, endpoint} objects; kind is one
    of "serp", "tavily" or "mock". Endpoint overrides are optional.
    """
    registry = ToolRegistry()
    raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
    for item in raw:
        kind = item["kind"]
        if kind == "mock":
            tool = MockSearchTool()
        elif kind == "serp":
            tool = SerpSearchTool(endpoint=item.get("endpoint", "https://serpapi.com/search"))
        elif kind == "tavily":
            tool = TavilySearchTool(endpoint=item.get("endpoint", "https://api.tavily.com/search"))
        else:
            raise InvalidConfigError("kind", f"unknown tool kind {kind!r}")
        tool.name = item["name"]
        registry.add(tool)
    return registry


def execute_search(
    tool_name: str, query: str, registry: ToolRegistry | None = None
) -> tuple[list[SearchResult], str]:
    """Run a registered search tool and derive the loop observation.

    Raises ToolUnavailableError for unknown tools and transport/auth
    failures; raises EmptyResultsError (whose ``observation`` is the
    literal "No results found.") when the tool returns nothing.
    """
    registry = registry or default_tool_registry()
    results = registry.get(tool_name).search(query)
    if not results:
        raise EmptyResultsError(f"{tool_name} returned no results for {query!r}")
    return results, observation_for(results)


# --- seed instructions ---

_CONTEXTUALIZE_PROMPT = (
    "Rewrite the following fragmentary notes as a single natural, first-person "
    "question or request from a person seeking help. Keep every stated detail.\n"
    "Notes: {text}\n"
    "Write only the rewritten question."
)


def contextualize_text(text: str, provider: Provider, config: GenerationConfig) -> str:
    """Rewrite fragmentary raw text into a natural seed question."""
    if not text.strip():
        raise EmptySeedError("no text to contextualize")
    prompt = _CONTEXTUALIZE_PROMPT.replace("{text}", text)
    request = CompletionRequest(
        prompt=prompt, temperature=config.temperature, max_tokens=config.max_tokens
    )
    return provider.complete(request).text.strip()


def synthesize_seed_instruction(
    record: DatasetRecord, provider: Provider, config: GenerationConfig
) -> str:
    """Turn a dataset record into an initial trajectory question.

    Instruction-format records pass through verbatim with no provider
    call; raw-format records are contextualized by the provider.
    """
    if record.format == "instruction":
        return record.question
    if not record.text or not record.text.strip():
        raise EmptySeedError("raw record has no text")
    return contextualize_text(record.text, provider, config)


# --- the ReAct loop ---

_ACTION_RE = re.compile(r"^\s*Action:\s*([^\[\n]+?)\s*\[(.*)\]\s*$", re.MULTILINE)
_FINAL_RE = re.compile(r"Final Answer:\s*(.*)", re.DOTALL)
_THOUGHT_RE = re.compile(r"Thought:\s*(.*?)(?=\n\s*(?:Action:|Final Answer:)|\Z)", re.DOTALL)

_FORMAT_REMINDER = (
    "Your previous reply did not follow the required format. Answer again using "
    "exactly one 'Thought:' line followed by either 'Action: <tool>[<input>]' or "
    "'Final Answer: <text>'."
)

_SCAFFOLD = """You answer questions by reasoning in steps, using search tools when you need facts.

Available tools:
{tools}

Use exactly this format for each step:
Thought: <what you are considering>
Action: <tool>[<input>]

After every Action you will be shown an Observation. When you know the answer, finish with:
Thought: <what you concluded>
Final Answer: <the answer>

Question: {question}
"""


def _parse_step(text: str) -> tuple[str, tuple[str, str] | None, str | None]:
    """Split a provider reply into (thought, action, final_answer).

    Exactly one of action/final_answer is returned; an unusable reply
    raises UnparseableStepError.
    """
    action_match = _ACTION_RE.search(text)
    final_match = _FINAL_RE.search(text)
    if action_match and final_match and final_match.start() < action_match.start():
        action_match = None
    elif action_match:
        final_match = None
    if action_match is None and final_match is None:
        raise UnparseableStepError(f"no action or final answer in: {text[:120]!r}")
    thought_match = _THOUGHT_RE.search(text)
    thought = thought_match.group(1).strip() if thought_match else ""
    if action_match:
        return thought, (action_match.group(1), action_match.group(2)), None
    return thought, None, final_match.group(1).strip()


def _trajectory_id(question: str, meta: dict, step_texts: list[str]) -> str:
    blob = json.dumps([question, meta.get("rng_seed"), step_texts], ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def run_react(
    question: str,
    tools: list[str],
    provider: Provider,
    config: GenerationConfig,
    registry: ToolRegistry | None = None,
    reflections: list[str] | None = None,
) -> Trajectory:
    """Drive the thought/action/observation loop until a final answer or
    config.max_steps is reached.

    Each step costs one completion plus at most one format-reminder
    reprompt. Tool failures become observations ("Tool error: ...") so
    the loop keeps going; an unparseable reply after the reprompt is a
    hard error because salvaging it would corrupt training data.
    """
    if not question.strip():
        raise InvalidConfigError("question", "must be non-empty")
    registry = registry or default_tool_registry()
    tool_names = list(tools)
    tools_block = "\n".join(f"- {name}" for name in tool_names) or "(none; answer directly)"
    scaffold = _SCAFFOLD.format(tools=tools_block, question=question)
    if reflections:
        notes = "\n".join(f"- {r}" for r in reflections)
        scaffold = f"Reflections from previous failed attempts:\n{notes}\n\n{scaffold}"

    steps: list[ReasoningStep] = []
    transcript_parts: list[str] = []
    tool_transcript: list[tuple[str, str, object]] = []
    final_answer: str | None = None

    def ask(prompt: str) -> str:
        request = CompletionRequest(
            prompt=prompt, temperature=config.temperature, max_tokens=config.max_tokens
        )
        return provider.complete(request).text

    while len(steps) < config.max_steps:
        prompt = scaffold + "".join(transcript_parts)
        reply = ask(prompt)
        try:
            thought, action, final = _parse_step(reply)
        except UnparseableStepError:
            reply = ask(prompt + "\n" + _FORMAT_REMINDER)
            thought, action, final = _parse_step(reply)

        index = len(steps) + 1
        if final is not None:
            steps.append(ReasoningStep(index=index, thought=thought, final_answer=final))
            final_answer = final
            transcript_parts.append(f"Thought: {thought}\nFinal Answer: {final}\n")
            break

        tool_name, tool_input = action
        try:
            results, observation = execute_search(tool_name, tool_input, registry)
            raw: object = [r.to_dict() for r in results]
        except EmptyResultsError as exc:
            observation, raw = exc.observation, NO_RESULTS_OBSERVATION
        except ToolUnavailableError as exc:
            observation, raw = f"Tool error: {exc}", f"error: {exc}"
        tool_transcript.append((tool_name, tool_input, raw))
        steps.append(
            ReasoningStep(index=index, thought=thought, action=action, observation=observation)
        )
        transcript_parts.append(
            f"Thought: {thought}\nAction: {tool_name}[{tool_input}]\nObservation: {observation}\n"
        )

    meta = {
        "framework": "react",
        "model": getattr(provider, "name", "unknown"),
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
        "rng_seed": config.rng_seed,
        "max_steps": config.max_steps,
        "incomplete": final_answer is None,
    }
    trajectory = Trajectory(
        id=_trajectory_id(question, meta, [s.thought for s in steps]),
        question=question,
        steps=steps,
        final_answer=final_answer,
        tool_transcript=tool_transcript,
        meta=meta,
    )
    trajectory.validate()
    return trajectory


# --- CoT ---

def render_cot_prompt(
    template_text: str, question: str, demonstrations: list[str] | None = None
) -> str:
    """Substitute {question} and optional {demonstrations} into a
    user-supplied template; nothing else in the template is altered.

    Demonstrations are joined by blank lines.
    """
    if "{question}" not in template_text:
        raise MissingPlaceholderError("CoT template must contain a {question} placeholder")
    joined = "\n\n".join(demonstrations or [])
    return template_text.replace("{question}", question).replace("{demonstrations}", joined)


def run_cot(
    question: str,
    provider: Provider,
    config: GenerationConfig,
    template_text: str | None = None,
    demonstrations: list[str] | None = None,
) -> Trajectory:
    """One-shot rationale generation from a CoT template.

    The whole completion is kept as the reasoning; when the reply
    contains an "Answer:" marker the trailing part becomes the final
    answer, otherwise the full reply does.
    """
    if template_text is None:
        template_text = (Path(__file__).parent / "data" / "prompts" / "cot.txt").read_text(
            encoding="utf-8"
        )
    prompt = render_cot_prompt(template_text, question, demonstrations)
    request = CompletionRequest(
        prompt=prompt, temperature=config.temperature, max_tokens=config.max_tokens
    )
    text = provider.complete(request).text.strip()
    marker = text.rfind("Answer:")
    if marker >= 0:
        thought, answer = text[:marker].strip(), text[marker + len("Answer:"):].strip()
    else:
        thought, answer = text, text
    meta = {
        "framework": "cot",
        "model": getattr(provider, "name", "unknown"),
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
        "rng_seed": config.rng_seed,
        "incomplete": False,
    }
    trajectory = Trajectory(
        id=_trajectory_id(question, meta, [thought]),
        question=question,
        steps=[ReasoningStep(index=1, thought=thought, final_answer=answer)],
        final_answer=answer,
        meta=meta,
    )
    trajectory.validate()
    return trajectory


# --- Reflexion ---

_REFLECTION_PROMPT = """You attempted the question below but did not reach a final answer within the step limit.

Question: {question}

Failed attempt:
{transcript}

In two sentences or fewer, state what went wrong and what to try differently next time."""


def run_reflexion(
    question: str,
    tools: list[str],
    provider: Provider,
    config: GenerationConfig,
    max_trials: int = 2,
    registry: ToolRegistry | None = None,
) -> Trajectory:
    """Retry incomplete trajectories with self-critique.

    Each failed trial generates one reflection that is prepended to the
    next trial's scaffold. Returns the first complete trajectory, or the
    last incomplete one; either way the reflections made so far ride
    along in ``meta``.
    """
    if max_trials < 1:
        raise InvalidConfigError("max_trials", "must be >= 1")
    reflections: list[str] = []
    trajectory: Trajectory | None = None
    for trial in range(1, max_trials + 1):
        trajectory = run_react(
            question, tools, provider, config, registry=registry, reflections=reflections
        )
        trajectory.meta["framework"] = "reflexion"
        trajectory.meta["trials"] = trial
        trajectory.meta["reflections"] = list(reflections)
        if trajectory.complete:
            return trajectory
        if trial < max_trials:
            transcript = "\n".join(
                f"Thought: {s.thought}" + (f"\nAction: {s.action[0]}[{s.action[1]}]\nObservation: {s.observation}" if s.action else "")
                for s in trajectory.steps
            )
            prompt = _REFLECTION_PROMPT.format(question=question, transcript=transcript)
            request = CompletionRequest(
                prompt=prompt, temperature=config.temperature, max_tokens=config.max_tokens
            )
            reflections.append(provider.complete(request).text.strip())
            trajectory.meta["reflections"] = list(reflections)
    return trajectory
