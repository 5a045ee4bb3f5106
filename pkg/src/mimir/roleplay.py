"""Chat-room role play: idea seeding, memory rating, and the multi-turn
dialogue generator that turns pool seeds into instruction samples.

Prompt templates are plain text files with ``{placeholder}`` slots so
users can tailor them; the packaged defaults live under
``mimir/data/prompts``.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .core import DataPoolEntry, GenerationConfig, Role
from .errors import (
    DialogueGenerationError,
    IdeaGenerationError,
    InvalidConfigError,
    MemoryRatingError,
    ProviderError,
    SchemaViolationError,
    UnknownDomainError,
)
from .provider import CompletionRequest, Provider

_DATA_DIR = Path(__file__).parent / "data"

RATING_MIN, RATING_MAX = 0, 5

GENERIC_ASSISTANT = Role(
    name="assistant",
    role_prompt="You are a helpful, knowledgeable assistant.",
)


@dataclass(frozen=True)
class MemoryItem:
    """Something a role has observed, optionally scored for relevance."""

    owner_role: str
    content: str
    rating: int | None = None

    def __post_init__(self):
        if self.rating is not None and not RATING_MIN <= self.rating <= RATING_MAX:
            raise InvalidConfigError("rating", f"must be in [{RATING_MIN}, {RATING_MAX}]")


@dataclass(frozen=True)
class DialogueTurn:
    index: int
    speaker: str
    text: str

    def __post_init__(self):
        if self.index < 1:
            raise InvalidConfigError("index", "turn indices are 1-based")
        if not self.text.strip():
            raise InvalidConfigError("text", "turn text must be non-empty")


@dataclass
class InstructionSample:
    """A finished multi-turn dialogue plus its generation metadata."""

    id: str
    seed: str
    roles: list[str]
    turns: list[DialogueTurn]
    meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        """Check the alternation invariants; raise SchemaViolationError."""
        if not self.turns or len(self.turns) % 2 != 0:
            raise SchemaViolationError("dialogue needs an even, non-zero turn count")
        for position, turn in enumerate(self.turns, start=1):
            if turn.index != position:
                raise SchemaViolationError(
                    f"turn indices must run 1..{len(self.turns)}, got {turn.index} at {position}"
                )
            expected = "human" if position % 2 == 1 else "assistant"
            if turn.speaker != expected:
                raise SchemaViolationError(
                    f"turn {position} should be {expected}, got {turn.speaker!r}"
                )

    @property
    def rounds(self) -> int:
        return len(self.turns) // 2

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "roles": list(self.roles),
            "turns": [{"speaker": t.speaker, "text": t.text} for t in self.turns],
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InstructionSample":
        turns = [
            DialogueTurn(index=i, speaker=t["speaker"], text=t["text"])
            for i, t in enumerate(data["turns"], start=1)
        ]
        return cls(
            id=data["id"],
            seed=data["seed"],
            roles=list(data["roles"]),
            turns=turns,
            meta=dict(data.get("meta", {})),
        )


class PromptLibrary:
    """Named prompt templates, resolved from an override directory first.

    Rendering is a literal ``{key}`` substitution for exactly the fields
    given, so template text may contain any other characters (including
    stray braces) untouched.
    """

    def __init__(self, override_dir: Path | str | None = None):
        self.override_dir = Path(override_dir) if override_dir else None

    def text(self, template_name: str) -> str:
        filename = f"{template_name}.txt"
        if self.override_dir is not None:
            candidate = self.override_dir / filename
            if candidate.exists():
                return candidate.read_text(encoding="utf-8")
        packaged = _DATA_DIR / "prompts" / filename
        if not packaged.exists():
            raise FileNotFoundError(f"no prompt template named {template_name!r}")
        return packaged.read_text(encoding="utf-8")

    def render(self, template_name: str, **fields: str) -> str:
        rendered = self.text(template_name)
        for key, value in fields.items():
            rendered = rendered.replace("{" + key + "}", value)
        return rendered.strip("\n")


_DEFAULT_LIBRARY = PromptLibrary()


def load_roles(domain: str, roles_dir: Path | str | None = None) -> list[Role]:
    """Load the role catalogue for a domain, in file order.

    Catalogues are ``roles/<domain>.json`` files holding an array of
    ``{name, role_prompt}`` objects; the packaged medical catalogue
    ships 14 roles.
    """
    search_dirs = []
    if roles_dir is not None:
        search_dirs.append(Path(roles_dir))
    search_dirs.append(_DATA_DIR / "roles")
    for directory in search_dirs:
        path = directory / f"{domain}.json"
        if path.exists():
            raw = json.loads(path.read_text(encoding="utf-8"))
            roles = [Role(name=r["name"], role_prompt=r["role_prompt"], domain=domain) for r in raw]
            names = [r.name for r in roles]
            if len(set(names)) != len(names):
                raise InvalidConfigError("roles", f"duplicate role names in {path}")
            return roles
    raise UnknownDomainError(f"no role catalogue for domain {domain!r}")


def _complete(provider: Provider, prompt: str, config: GenerationConfig) -> str:
    request = CompletionRequest(
        prompt=prompt, temperature=config.temperature, max_tokens=config.max_tokens
    )
    return provider.complete(request).text


def seed_ideas(
    picked_roles: list[Role],
    query: str,
    provider: Provider,
    config: GenerationConfig,
    templates: PromptLibrary | None = None,
) -> dict[str, str]:
    """Ask each picked role for its main point on the query.

    One completion per role, in order. On a provider failure the error
    names the failing role and carries the ideas collected so far.
    """
    if not picked_roles:
        raise InvalidConfigError("picked_roles", "must be non-empty")
    lib = templates or _DEFAULT_LIBRARY
    joined_names = ", ".join(role.name for role in picked_roles)
    ideas: dict[str, str] = {}
    for role in picked_roles:
        prompt = lib.render(
            "idea",
            name=role.name,
            role_prompt=role.role_prompt,
            query=query,
            roles=joined_names,
        )
        try:
            ideas[role.name] = _complete(provider, prompt, config)
        except ProviderError as exc:
            raise IdeaGenerationError(role.name, dict(ideas), exc) from exc
    return ideas


_DIGIT_RUN = re.compile(r"\d+", re.ASCII)


def extract_rating(text: str) -> int | None:
    """The minimum of all decimal digit runs in ``text``, or None.

    "I would rate this 4 out of 5." yields 4; text with no digits yields
    None. The minimum rule means "Between 1 and 5, I say 5." yields 1.
    """
    runs = _DIGIT_RUN.findall(text)
    if not runs:
        return None
    return min(int(run) for run in runs)


def rate_memories(
    role: Role,
    idea: str,
    query: str,
    memories: list[MemoryItem],
    provider: Provider,
    config: GenerationConfig,
    templates: PromptLibrary | None = None,
) -> list[MemoryItem]:
    """Score each memory 0-5 for how much the role cares about it.

    A response with no parseable rating is regenerated up to
    config.max_attempts extra times; if still unreadable the rating
    falls back to 0. Parsed values above 5 clamp to 5. Output preserves
    input length and order.
    """
    lib = templates or _DEFAULT_LIBRARY
    rated: list[MemoryItem] = []
    for index, memory in enumerate(memories):
        if memory.owner_role != role.name:
            raise ValueError(
                f"memory {index} belongs to {memory.owner_role!r}, not {role.name!r}"
            )
        prompt = lib.render(
            "rate", name=role.name, idea=idea, query=query, memory=memory.content
        )
        rating: int | None = None
        for _attempt in range(1 + config.max_attempts):
            try:
                response = _complete(provider, prompt, config)
            except ProviderError as exc:
                raise MemoryRatingError(index, exc) from exc
            rating = extract_rating(response)
            if rating is not None:
                break
        if rating is None:
            rating = 0
        rated.append(
            MemoryItem(owner_role=memory.owner_role, content=memory.content,
                       rating=min(rating, RATING_MAX))
        )
    return rated


def filter_memories(memories: list[MemoryItem], threshold: int = 0) -> list[MemoryItem]:
    """Drop memories rated below the threshold; unrated count as 0."""
    return [m for m in memories if (m.rating or 0) >= threshold]


def format_transcript(turns: list[DialogueTurn]) -> str:
    if not turns:
        return "(no messages yet)"
    labels = {"human": "Human", "assistant": "Assistant"}
    return "\n".join(f"{labels.get(t.speaker, t.speaker)}: {t.text}" for t in turns)


def _sample_id(seed: str, role_names: list[str], rng_seed: int, texts: list[str]) -> str:
    blob = json.dumps([seed, role_names, rng_seed, texts], ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def generate_dialogue(
    seed: DataPoolEntry,
    roles: list[Role],
    config: GenerationConfig,
    provider: Provider,
    templates: PromptLibrary | None = None,
) -> InstructionSample:
    """Self-chat a dialogue of exactly config.rounds human/assistant pairs.

    Both sides are played by the provider: the human side continues the
    conversation as an inquirer about the seed, the assistant side
    answers as one selected role (or a generic assistant when none are
    picked). Every prompt embeds the transcript so far. When the seed is
    an instruction-format record, its text opens the dialogue verbatim
    and no human-side completion is made for round 1.
    """
    lib = templates or _DEFAULT_LIBRARY
    rng = random.Random(config.rng_seed)
    speaker_role = roles[rng.randrange(len(roles))] if roles else GENERIC_ASSISTANT

    turns: list[DialogueTurn] = []

    def take_turn(round_no: int, side: str, prompt: str) -> str:
        try:
            text = _complete(provider, prompt, config).strip()
        except ProviderError as exc:
            raise DialogueGenerationError(round_no, side, exc) from exc
        if not text:
            raise DialogueGenerationError(round_no, side, "provider returned empty text")
        return text

    for round_no in range(1, config.rounds + 1):
        if round_no == 1 and seed.is_instruction:
            human_text = seed.seed_text
        else:
            human_prompt = lib.render(
                "human_side", query=seed.seed_text, transcript=format_transcript(turns)
            )
            human_text = take_turn(round_no, "human", human_prompt)
        turns.append(DialogueTurn(index=len(turns) + 1, speaker="human", text=human_text))

        assistant_prompt = lib.render(
            "assistant_side",
            name=speaker_role.name,
            role_prompt=speaker_role.role_prompt,
            transcript=format_transcript(turns),
        )
        assistant_text = take_turn(round_no, "assistant", assistant_prompt)
        turns.append(DialogueTurn(index=len(turns) + 1, speaker="assistant", text=assistant_text))

    role_names = [r.name for r in roles]
    sample = InstructionSample(
        id=_sample_id(seed.seed_text, role_names, config.rng_seed, [t.text for t in turns]),
        seed=seed.seed_text,
        roles=role_names,
        turns=turns,
        meta={
            "model": getattr(provider, "name", "unknown"),
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
            "rng_seed": config.rng_seed,
        },
    )
    sample.validate()
    return sample
