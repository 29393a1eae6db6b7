"""Benchmark construction for non-factoid QA.

Pipeline: filter non-factoid questions out of source QA files, generate a
pool of reference answers spanning quality levels (several writer models
plus one stronger model for the top answer), annotate each candidate's
quality with a cold-sampled annotator, and assemble quality-descending
reference lists.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

from .classify import HeuristicClassifier, passes_nfq_filter
from .core import InputError, NfqaError, NfqType, ParseError, Question
from .evaluate import ReferenceList
from .llm import ANNOTATION_TEMPERATURE, ChatRequest, LlmRole
from .prompts import PromptLibrary, format_candidate_answers

log = logging.getLogger(__name__)

# Canonical column order for known source datasets; customs follow alphabetically.
SOURCE_ORDER = ("NQ", "SQD", "TQA", "2WMH", "HQA", "MSQ")

FULL_REFERENCE_COUNT = 10
MAX_RECORD_FAILURE_RATE = 0.20

_TIER_LABEL_RX = re.compile(r"Answer\s*([123])\s*:", re.IGNORECASE)
_ANNOTATION_RX = re.compile(r"Answer\s*(\d+)\s*:\s*\[\[\s*(\d+)\s*\]\]")

_ID_KEYS = ("id", "_id", "qid", "question_id")
_QUESTION_KEYS = ("question", "query", "question_text")
_ANSWER_KEYS = ("gold_answer", "answer", "answers", "golden_answers", "gold")


@dataclass(frozen=True)
class SourceRecord:
    id: str
    question: str
    gold_answer: Union[str, tuple[str, ...]]
    source: str

    def __post_init__(self) -> None:
        if isinstance(self.gold_answer, list):
            object.__setattr__(self, "gold_answer", tuple(self.gold_answer))
        if not self.question.strip():
            raise InputError(f"source record {self.id!r} has an empty question")
        if not self.gold_text().strip():
            raise InputError(f"source record {self.id!r} has an empty gold answer")

    def gold_text(self) -> str:
        """Multi-answer golds join with '; ' for prompt slots."""
        if isinstance(self.gold_answer, tuple):
            return "; ".join(self.gold_answer)
        return self.gold_answer


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    question: str
    nfq_type: NfqType
    gold_answer: Union[str, tuple[str, ...]]
    references: ReferenceList
    source: str
    partial: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.gold_answer, list):
            object.__setattr__(self, "gold_answer", tuple(self.gold_answer))
        if not self.partial and len(self.references) != FULL_REFERENCE_COUNT:
            raise InputError(
                f"record {self.id!r} has {len(self.references)} references, expected {FULL_REFERENCE_COUNT}"
            )

    def to_dict(self) -> dict:
        gold = list(self.gold_answer) if isinstance(self.gold_answer, tuple) else self.gold_answer
        d = {
            "id": self.id,
            "question": self.question,
            "nfq_type": self.nfq_type.value,
            "gold_answer": gold,
            "references": [{"text": t, "quality": q} for t, q in self.references.answers],
            "source": self.source,
        }
        if self.partial:
            d["partial"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetRecord":
        return cls(
            id=str(d["id"]),
            question=d["question"],
            nfq_type=NfqType.parse(d["nfq_type"]),
            gold_answer=tuple(d["gold_answer"]) if isinstance(d["gold_answer"], list) else d["gold_answer"],
            references=ReferenceList(
                question_id=str(d["id"]),
                answers=tuple((a["text"], a["quality"]) for a in d["references"]),
            ),
            source=d["source"],
            partial=bool(d.get("partial", False)),
        )


def read_source_records(path: str | Path, source: str) -> Iterator[SourceRecord]:
    """Read one source QA file (JSONL) with tolerant field naming."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"source file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except ValueError as err:
                raise InputError(f"{path}:{lineno}: not valid JSON: {err}") from None
            try:
                rid = str(_first_key(d, _ID_KEYS, default=f"{source}-{lineno}"))
                question = str(_first_key(d, _QUESTION_KEYS))
                answer = _first_key(d, _ANSWER_KEYS)
            except KeyError as err:
                raise InputError(f"{path}:{lineno}: no recognizable {err} field") from None
            if isinstance(answer, list):
                answer = tuple(str(a) for a in answer)
            else:
                answer = str(answer)
            yield SourceRecord(id=rid, question=question, gold_answer=answer, source=source)


def _first_key(d: dict, keys: Sequence[str], default=None):
    for key in keys:
        if key in d:
            return d[key]
    if default is not None:
        return default
    raise KeyError("/".join(keys))


def filter_nfq(
    records: Iterable[SourceRecord],
    classifier,
    heuristic: Optional[HeuristicClassifier] = None,
) -> Iterator[tuple[SourceRecord, NfqType]]:
    """Drop factoid questions, classify survivors, apply the pattern post-filter.

    Per-record classifier errors are logged and skipped rather than aborting
    the stream.
    """
    heuristic = heuristic or HeuristicClassifier()
    seen: set[str] = set()
    for record in records:
        if record.id in seen:
            continue
        seen.add(record.id)
        question = Question(id=record.id, text=record.question, source=record.source)
        try:
            if classifier.is_factoid(question):
                continue
            nfq_type = classifier.classify(question)
            if not passes_nfq_filter(question, heuristic):
                continue
        except NfqaError as err:
            log.warning("skipping record %s: %s", record.id, err)
            continue
        yield record, nfq_type


def parse_tier_answers(raw: str) -> list[str]:
    """Split a graded-answers response into [best, middle, worst] texts."""
    matches = list(_TIER_LABEL_RX.finditer(raw))
    labels = [int(m.group(1)) for m in matches]
    if sorted(labels) != [1, 2, 3]:
        raise ParseError(f"expected exactly Answer 1/2/3 labels, found {labels}")
    by_label: dict[int, str] = {}
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(raw)
        text = raw[m.end() : end].strip()
        if not text:
            raise ParseError(f"Answer {labels[i]} has empty text")
        by_label[labels[i]] = text
    return [by_label[1], by_label[2], by_label[3]]


def generate_reference_candidates(
    record: SourceRecord,
    writer_roles: Sequence[LlmRole],
    strong_role: LlmRole,
    prompts: Optional[PromptLibrary] = None,
    include_rewrite: bool = True,
) -> list[tuple[str, int]]:
    """Produce (text, provisional tier) reference candidates for one question.

    The strong model contributes the single top answer (listed first). Each
    writer contributes three: by default its own knowledge-grounded rewrite
    plus the two best graded answers; with include_rewrite=False, the three
    graded answers instead. Provisional tiers only hint at provenance; the
    annotation labels decide the final ordering.
    """
    if not writer_roles:
        raise InputError("at least one writer client is required")
    prompts = prompts or PromptLibrary()
    rewrite_prompt = prompts.render(
        "reference_rewrite", question=record.question, ground_truth=record.gold_text()
    )
    tiers_prompt = prompts.render(
        "reference_tiers", question=record.question, ground_truth=record.gold_text()
    )
    candidates: list[tuple[str, int]] = [(strong_role.complete_text(rewrite_prompt), 3)]
    for writer in writer_roles:
        graded = parse_tier_answers(writer.complete_text(tiers_prompt))
        if include_rewrite:
            candidates.append((writer.complete_text(rewrite_prompt), 3))
            candidates.extend([(graded[0], 2), (graded[1], 1)])
        else:
            candidates.extend([(graded[0], 2), (graded[1], 1), (graded[2], 0)])
    return candidates


def annotate_quality(
    question: str,
    candidates: Sequence[str],
    annotator: LlmRole,
    prompts: Optional[PromptLibrary] = None,
) -> list[int]:
    """Label every candidate 0-3 via one cold-sampled annotation call."""
    if not candidates:
        raise InputError("nothing to annotate")
    prompts = prompts or PromptLibrary()
    request = ChatRequest(
        model=annotator.defaults.model,
        user_prompt=prompts.render(
            "annotate_input",
            question=question,
            reference_answers=format_candidate_answers(candidates),
        ),
        system_prompt=prompts.text("annotate_system"),
        temperature=ANNOTATION_TEMPERATURE,
        top_p=annotator.defaults.top_p,
        max_tokens=annotator.defaults.max_tokens,
        seed=annotator.defaults.seed,
    )
    raw = annotator.client.complete(request).text
    found: dict[int, int] = {}
    for m in _ANNOTATION_RX.finditer(raw):
        x, y = int(m.group(1)), int(m.group(2))
        if x in found:
            raise ParseError(f"duplicate annotation for Answer {x}")
        found[x] = y
    expected = set(range(1, len(candidates) + 1))
    if set(found) != expected:
        missing = sorted(expected - set(found))
        extra = sorted(set(found) - expected)
        raise ParseError(f"annotation coverage mismatch (missing {missing}, extra {extra})")
    labels = [found[i] for i in range(1, len(candidates) + 1)]
    if any(not 0 <= y <= 3 for y in labels):
        raise ParseError(f"annotation labels outside [0, 3]: {labels}")
    return labels


def assemble_record(
    record: SourceRecord,
    nfq_type: NfqType,
    candidates: Sequence[str],
    labels: Sequence[int],
) -> DatasetRecord:
    """Pair candidates with labels and stable-sort best-first into a record."""
    if len(candidates) != len(labels):
        raise InputError(f"{len(candidates)} candidates but {len(labels)} labels")
    ordered = sorted(zip(candidates, labels), key=lambda pair: -pair[1])
    references = ReferenceList(question_id=record.id, answers=tuple(ordered))
    return DatasetRecord(
        id=record.id,
        question=record.question,
        nfq_type=nfq_type,
        gold_answer=record.gold_answer,
        references=references,
        source=record.source,
        partial=len(references) != FULL_REFERENCE_COUNT,
    )


def build_dataset(
    typed_records: Sequence[tuple[SourceRecord, NfqType]],
    writer_roles: Sequence[LlmRole],
    strong_role: LlmRole,
    annotator: LlmRole,
    prompts: Optional[PromptLibrary] = None,
    include_rewrite: bool = True,
    max_workers: int = 4,
) -> tuple[list[DatasetRecord], int]:
    """Generate, annotate, and assemble records; returns (records, failure count).

    Records are processed concurrently but returned in input order. Fails
    outright when more than MAX_RECORD_FAILURE_RATE of records error.
    """
    if not typed_records:
        return [], 0

    def _one(item: tuple[SourceRecord, NfqType]) -> DatasetRecord:
        record, nfq_type = item
        candidates = generate_reference_candidates(
            record, writer_roles, strong_role, prompts, include_rewrite
        )
        labels = annotate_quality(record.question, [t for t, _ in candidates], annotator, prompts)
        return assemble_record(record, nfq_type, [t for t, _ in candidates], labels)

    results: list[Optional[DatasetRecord]] = [None] * len(typed_records)
    failures = 0
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(_one, item) for item in typed_records]
        for i, fut in enumerate(futures):
            try:
                results[i] = fut.result()
            except NfqaError as err:
                failures += 1
                log.warning("record %s failed: %s", typed_records[i][0].id, err)
    if failures > max(1, int(MAX_RECORD_FAILURE_RATE * len(typed_records))):
        raise InputError(f"{failures}/{len(typed_records)} records failed during construction")
    return [r for r in results if r is not None], failures


def write_dataset(records: Sequence[DatasetRecord], out_path: str | Path) -> None:
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict()) + "\n")


@dataclass(frozen=True)
class DatasetStats:
    counts: dict[tuple[str, str], int]  # (nfq_type, source) -> count
    sources: tuple[str, ...]

    @property
    def grand_total(self) -> int:
        return sum(self.counts.values())

    def type_total(self, nfq_type: str) -> int:
        return sum(n for (t, _), n in self.counts.items() if t == nfq_type)

    def source_total(self, source: str) -> int:
        return sum(n for (_, s), n in self.counts.items() if s == source)

    def type_percent(self, nfq_type: str) -> float:
        if self.grand_total == 0:
            return 0.0
        return round(100.0 * self.type_total(nfq_type) / self.grand_total, 2)

    def markdown_table(self) -> str:
        """Counts by type and source with per-type share of the grand total."""
        header = ["NFQ Type", *self.sources, "Total"]
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join("---" for _ in header) + "|",
        ]
        for nfq_type in NfqType:
            row = [nfq_type.value]
            row.extend(str(self.counts.get((nfq_type.value, s), 0)) for s in self.sources)
            row.append(f"{self.type_total(nfq_type.value)} ({self.type_percent(nfq_type.value):.2f}%)")
            lines.append("| " + " | ".join(row) + " |")
        totals = ["Total", *(str(self.source_total(s)) for s in self.sources), str(self.grand_total)]
        lines.append("| " + " | ".join(totals) + " |")
        return "\n".join(lines)


def compute_stats(dataset_path: str | Path) -> DatasetStats:
    """Tabulate a dataset file by question type and source."""
    path = Path(dataset_path)
    if not path.exists():
        raise InputError(f"dataset file not found: {path}")
    counts: dict[tuple[str, str], int] = {}
    seen_sources: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                nfq_type = NfqType.parse(d["nfq_type"]).value
                source = str(d.get("source", "default"))
            except (ValueError, KeyError, InputError) as err:
                raise InputError(f"{path}:{lineno}: bad record: {err}") from None
            seen_sources.add(source)
            counts[(nfq_type, source)] = counts.get((nfq_type, source), 0) + 1
    known = [s for s in SOURCE_ORDER if s in seen_sources]
    custom = sorted(seen_sources - set(SOURCE_ORDER))
    return DatasetStats(counts=counts, sources=tuple(known + custom))
