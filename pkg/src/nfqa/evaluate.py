"""Listwise answer evaluation and rank aggregation.

A scorer LLM places each candidate answer inside a quality-descending
reference list; the resulting ranks aggregate to Mean Reciprocal Rank and
Mean Percentile Rank. Ranks are clamped to [1, list size]: the ranking
prompt instructs the scorer that a candidate inferior to every reference
still takes the last in-list position.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .core import InputError, InternalError, NfqaError, NfqType, ParseError, Question
from .llm import LlmRole
from .prompts import PromptLibrary, format_reference_answers

log = logging.getLogger(__name__)

_BRACKET_RX = re.compile(r"\[\[\s*(\d+)\s*\]\]")
_INT_RX = re.compile(r"(?<!\d)(\d+)(?!\d)")

# A run aborts when more than this fraction of cases fail (a single failing
# case is always tolerated so tiny runs are not killed by one straggler).
MAX_CASE_FAILURE_RATE = 0.20


def _too_many_failures(failures: int, total: int) -> bool:
    return failures > max(1, int(MAX_CASE_FAILURE_RATE * total))


@dataclass(frozen=True)
class ReferenceList:
    """Reference answers for one question, best first, with quality labels 0-3."""

    question_id: str
    answers: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "answers", tuple((t, int(q)) for t, q in self.answers))
        if len(self.answers) < 2:
            raise InputError("a reference list needs at least two answers")
        qualities = [q for _, q in self.answers]
        if any(not 0 <= q <= 3 for q in qualities):
            raise InputError("reference quality labels must be integers in [0, 3]")
        if any(a < b for a, b in zip(qualities, qualities[1:])):
            raise InputError("reference answers must be sorted by non-increasing quality")

    def texts(self) -> list[str]:
        return [t for t, _ in self.answers]

    def __len__(self) -> int:
        return len(self.answers)

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "answers": [{"text": t, "quality": q} for t, q in self.answers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceList":
        return cls(
            question_id=d["question_id"],
            answers=tuple((a["text"], a["quality"]) for a in d["answers"]),
        )


@dataclass(frozen=True)
class EvalCase:
    question: Question
    candidate: str
    references: ReferenceList

    def __post_init__(self) -> None:
        if not self.candidate:
            raise InputError(f"case {self.question.id!r} has an empty candidate answer")


@dataclass(frozen=True)
class RankResult:
    case_id: str
    rank: int
    list_size: int
    raw_output: str = ""

    def __post_init__(self) -> None:
        if not 1 <= self.rank <= self.list_size:
            raise InputError(f"rank {self.rank} outside [1, {self.list_size}]")


@dataclass(frozen=True)
class EvalSummary:
    n: int
    mrr: float
    mpr: float
    per_case: tuple[RankResult, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_case", tuple(self.per_case))
        if self.n != len(self.per_case):
            raise InternalError("summary size does not match its per-case results")

    @classmethod
    def from_results(cls, results: Sequence[RankResult]) -> "EvalSummary":
        return cls(n=len(results), mrr=mrr(results), mpr=mpr(results), per_case=tuple(results))


def build_linkage_prompt(case: EvalCase, prompts: Optional[PromptLibrary] = None) -> str:
    """Render the listwise ranking prompt with references numbered best-first."""
    prompts = prompts or PromptLibrary()
    return prompts.render(
        "linkage_rank",
        question=case.question.text,
        reference_answers=format_reference_answers(case.references.texts()),
        candidate_answer=case.candidate,
    )


def parse_rank(raw: str, list_size: int) -> int:
    """Extract the rank from scorer output.

    The first [[k]] wins, clamped into [1, list_size]. Without brackets, the
    first standalone integer already inside the range is accepted.
    """
    if list_size < 1:
        raise InputError("list_size must be at least 1")
    m = _BRACKET_RX.search(raw)
    if m:
        return min(max(int(m.group(1)), 1), list_size)
    for m in _INT_RX.finditer(raw):
        value = int(m.group(1))
        if 1 <= value <= list_size:
            log.warning("rank parsed without brackets from %r", raw[:80])
            return value
    raise ParseError(f"no rank found in scorer output: {raw[:120]!r}")


def score_candidate(
    case: EvalCase, scorer: LlmRole, prompts: Optional[PromptLibrary] = None
) -> RankResult:
    """One LINKAGE call; the identical prompt is retried once on a parse failure."""
    prompt = build_linkage_prompt(case, prompts)
    raw = scorer.complete_text(prompt)
    try:
        rank = parse_rank(raw, len(case.references))
    except ParseError:
        raw = scorer.complete_text(prompt)
        rank = parse_rank(raw, len(case.references))
    return RankResult(case_id=case.question.id, rank=rank, list_size=len(case.references), raw_output=raw)


def mrr(ranks: Sequence[RankResult]) -> float:
    """Mean reciprocal rank: the average of 1/rank."""
    if not ranks:
        raise InputError("cannot aggregate an empty rank list")
    return sum(1.0 / r.rank for r in ranks) / len(ranks)


def mpr(ranks: Sequence[RankResult]) -> float:
    """Mean percentile rank: the average of (1 - (rank-1)/list_size) * 100."""
    if not ranks:
        raise InputError("cannot aggregate an empty rank list")
    return sum((1.0 - (r.rank - 1) / r.list_size) * 100.0 for r in ranks) / len(ranks)


@dataclass(frozen=True)
class EvalReport:
    method: str
    dataset: str
    overall: EvalSummary
    subsets: dict[str, EvalSummary]
    by_type: dict[str, EvalSummary]
    warning_count: int

    def to_dict(self) -> dict:
        def _summary(s: EvalSummary) -> dict:
            return {"n": s.n, "mrr": s.mrr, "mpr": s.mpr}

        return {
            "method": self.method,
            "dataset": self.dataset,
            "n": self.overall.n,
            "mrr": self.overall.mrr,
            "mpr": self.overall.mpr,
            "warnings": self.warning_count,
            "subsets": {k: _summary(v) for k, v in sorted(self.subsets.items())},
            "by_type": {k: _summary(v) for k, v in sorted(self.by_type.items())},
            "per_case": [
                {"case_id": r.case_id, "rank": r.rank, "list_size": r.list_size}
                for r in self.overall.per_case
            ],
        }

    def table(self) -> str:
        """Per-subset metric table with 4-decimal metrics."""
        rows = [("subset", "n", "MRR", "MPR")]
        for name, summ in sorted(self.subsets.items()):
            rows.append((name, str(summ.n), f"{summ.mrr:.4f}", f"{summ.mpr:.4f}"))
        rows.append(("overall", str(self.overall.n), f"{self.overall.mrr:.4f}", f"{self.overall.mpr:.4f}"))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def load_eval_cases(dataset_path: str | Path) -> list[tuple[Question, str, ReferenceList]]:
    """Read dataset records: (question, gold answer text, references) per line."""
    path = Path(dataset_path)
    if not path.exists():
        raise InputError(f"dataset file not found: {path}")
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                question = Question(
                    id=str(d["id"]),
                    text=d["question"],
                    source=d.get("source"),
                    nfq_type=None if d.get("nfq_type") is None else NfqType.parse(d["nfq_type"]),
                )
                refs = ReferenceList(
                    question_id=str(d["id"]),
                    answers=tuple((a["text"], a["quality"]) for a in d["references"]),
                )
                gold = d.get("gold_answer", "")
                if isinstance(gold, list):
                    gold = "; ".join(gold)
            except (ValueError, KeyError, TypeError) as err:
                raise InputError(f"{path}:{lineno}: bad dataset record: {err}") from err
            out.append((question, gold, refs))
    if not out:
        raise InputError(f"dataset {path} contains no records")
    return out


def run_eval(
    dataset_path: str | Path,
    method: str,
    answer_fn: Callable[[Question], str],
    scorer: LlmRole,
    prompts: Optional[PromptLibrary] = None,
    max_workers: int = 8,
) -> EvalReport:
    """Generate a candidate per question, rank it, and aggregate.

    Failing cases are excluded from the aggregates with a warning count; the
    whole run fails only when more than MAX_CASE_FAILURE_RATE of cases error.
    """
    entries = load_eval_cases(dataset_path)

    def _one(entry) -> RankResult:
        question, _gold, refs = entry
        candidate = answer_fn(question)
        case = EvalCase(question=question, candidate=candidate, references=refs)
        return score_candidate(case, scorer, prompts)

    results: list[Optional[RankResult]] = [None] * len(entries)
    failures = 0
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(_one, e) for e in entries]
        for i, fut in enumerate(futures):
            try:
                results[i] = fut.result()
            except NfqaError as err:
                failures += 1
                log.warning("case %s failed: %s", entries[i][0].id, err)

    if _too_many_failures(failures, len(entries)):
        raise InternalError(f"{failures}/{len(entries)} evaluation cases failed")
    kept = [r for r in results if r is not None]
    if not kept:
        raise InternalError("every evaluation case failed")

    by_subset: dict[str, list[RankResult]] = {}
    by_type: dict[str, list[RankResult]] = {}
    for entry, result in zip(entries, results):
        if result is None:
            continue
        question = entry[0]
        by_subset.setdefault(question.source or "default", []).append(result)
        if question.nfq_type is not None:
            by_type.setdefault(question.nfq_type.value, []).append(result)

    return EvalReport(
        method=method,
        dataset=str(dataset_path),
        overall=EvalSummary.from_results(kept),
        subsets={k: EvalSummary.from_results(v) for k, v in by_subset.items()},
        by_type={k: EvalSummary.from_results(v) for k, v in by_type.items()},
        warning_count=failures,
    )
