"""Knowledge verification: extract QA pairs from generated dialogues,
judge each with a verifier model, and aggregate hallucination ratios.

The verifier is just another completion provider, so the judging model
can differ from the generating one.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .errors import (
    EmptyInputError,
    InvalidTurnIndexError,
    UnknownSampleError,
)
from .provider import CompletionRequest, Provider
from .roleplay import InstructionSample

VERDICTS = ("supported", "hallucinated", "unknown")

_VERDICT_RE = re.compile(r"\b(SUPPORTED|HALLUCINATED|UNKNOWN)\b", re.IGNORECASE)

_VERIFY_PROMPT = """You are a careful domain fact-checker. Judge whether the answer below is factually supported.

Question: {question}
Answer: {answer}

Reply with exactly one of the words SUPPORTED, HALLUCINATED or UNKNOWN, followed by a one-line rationale."""


@dataclass(frozen=True)
class QAPair:
    sample_id: str
    turn_index: int
    question: str
    answer: str


@dataclass(frozen=True)
class VerificationVerdict:
    sample_id: str
    turn_index: int
    question: str
    answer: str
    verdict: str
    rationale: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}")


@dataclass(frozen=True)
class HallucinationReport:
    """Hallucination ratio percentages, grouped by conversation turn count."""

    per_turn: dict[int, float]
    overall: float

    def to_dict(self) -> dict:
        return {
            "per_turn": {str(k): v for k, v in sorted(self.per_turn.items())},
            "overall": self.overall,
        }


def extract_qa_pairs(
    sample: InstructionSample, turn_selection: list[int] | str = "all"
) -> list[QAPair]:
    """Pair each selected assistant turn with its preceding human turn.

    ``turn_selection`` is "all" or a list of 1-based assistant turn
    indices (the even positions of an alternating dialogue).
    """
    sample.validate()
    assistant_indices = [t.index for t in sample.turns if t.speaker == "assistant"]
    if turn_selection == "all":
        selected = assistant_indices
    else:
        selected = list(turn_selection)
        for index in selected:
            if index not in assistant_indices:
                raise InvalidTurnIndexError(
                    f"turn {index} is not an assistant turn of sample {sample.id}"
                )
    pairs = []
    for index in selected:
        pairs.append(
            QAPair(
                sample_id=sample.id,
                turn_index=index,
                question=sample.turns[index - 2].text,
                answer=sample.turns[index - 1].text,
            )
        )
    return pairs


def verify_pair(pair: QAPair, provider: Provider, *, temperature: float = 0.0,
                max_tokens: int = 200) -> VerificationVerdict:
    """Ask the verifier model for a judgment on one QA pair.

    The first SUPPORTED/HALLUCINATED/UNKNOWN keyword in the reply
    decides the verdict; a reply with none maps to unknown.
    """
    prompt = _VERIFY_PROMPT.format(question=pair.question, answer=pair.answer)
    request = CompletionRequest(prompt=prompt, temperature=temperature, max_tokens=max_tokens)
    reply = provider.complete(request).text
    match = _VERDICT_RE.search(reply)
    if match:
        verdict = match.group(1).lower()
        rationale = reply[match.end():].lstrip(" \t:;,.–—-").strip()
    else:
        verdict = "unknown"
        rationale = reply.strip()
    return VerificationVerdict(
        sample_id=pair.sample_id,
        turn_index=pair.turn_index,
        question=pair.question,
        answer=pair.answer,
        verdict=verdict,
        rationale=rationale,
    )


def _round2(value: Decimal) -> float:
    return float(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def aggregate_hallucination(
    verdicts: list[VerificationVerdict],
    sample_turn_counts: dict[str, int],
) -> HallucinationReport:
    """Hallucination ratios per conversation turn count plus their mean.

    Per group: 100 x hallucinated / all verdicts in the group, rounded
    half-up to 2 decimals; "unknown" counts in the denominator only.
    The overall figure is the arithmetic mean of the group ratios.
    """
    if not verdicts:
        raise EmptyInputError("no verdicts to aggregate")
    groups: dict[int, list[VerificationVerdict]] = {}
    for verdict in verdicts:
        if verdict.sample_id not in sample_turn_counts:
            raise UnknownSampleError(f"no turn count for sample {verdict.sample_id!r}")
        groups.setdefault(sample_turn_counts[verdict.sample_id], []).append(verdict)

    per_turn: dict[int, float] = {}
    ratios: list[Decimal] = []
    for turn_count in sorted(groups):
        group = groups[turn_count]
        hallucinated = sum(1 for v in group if v.verdict == "hallucinated")
        ratio = Decimal(100 * hallucinated) / Decimal(len(group))
        rounded = ratio.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
        per_turn[turn_count] = float(rounded)
        ratios.append(rounded)
    overall = _round2(sum(ratios) / Decimal(len(ratios)))
    return HallucinationReport(per_turn=per_turn, overall=overall)


def write_report(report: HallucinationReport, path: Path | str, figure: bool = True) -> Path:
    """Write ``report.json`` and, by default, a bar-chart figure of the
    per-turn ratios next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    if figure:
        render_report_figure(report, path.with_suffix(".png"))
    return path


def render_report_figure(report: HallucinationReport, path: Path | str) -> Path:
    """Render the per-turn hallucination ratios as a bar chart PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    turns = sorted(report.per_turn)
    values = [report.per_turn[t] for t in turns]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([str(t) for t in turns], values, color="#4c72b0")
    ax.axhline(report.overall, color="#c44e52", linestyle="--", linewidth=1,
               label=f"overall {report.overall:.2f}%")
    ax.set_xlabel("Conversation rounds")
    ax.set_ylabel("Hallucination ratio (%)")
    ax.set_title("Hallucination ratio by conversation length")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
