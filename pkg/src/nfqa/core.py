"""Shared domain types and the error taxonomy used by every other module.

All types here are immutable after construction and JSON-serializable via
``to_dict`` / ``from_dict``. No behavior, no I/O.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional


class NfqaError(Exception):
    """Base class; the CLI maps each concrete category to a distinct exit code."""

    exit_code = 1


class InputError(NfqaError):
    """Bad user-supplied data (empty question, malformed record, bad bounds)."""

    exit_code = 2


class ParseError(NfqaError):
    """An LLM response could not be parsed into the expected structure."""

    exit_code = 3


class TransportError(NfqaError):
    """Retriever or LLM endpoint failure, including exhausted retries."""

    exit_code = 4


class ConfigError(NfqaError):
    """Invalid or missing configuration."""

    exit_code = 5


class InternalError(NfqaError):
    """A contract violation inside the artifact itself."""

    exit_code = 1


class NfqType(enum.Enum):
    """Six-way non-factoid question type driving pipeline dispatch.

    String values are the exact forms used in dataset files.
    """

    EVIDENCE_BASED = "evidence-based"
    COMPARISON = "comparison"
    EXPERIENCE = "experience"
    REASON = "reason"
    INSTRUCTION = "instruction"
    DEBATE = "debate"

    @classmethod
    def parse(cls, label: str) -> "NfqType":
        try:
            return cls(label)
        except ValueError:
            raise InputError(f"unknown question type label: {label!r}") from None

    def render(self) -> str:
        return self.value


class AnswerMethod(enum.Enum):
    """Answering strategy tag: the two baselines plus the typed pipeline."""

    LLM_ONLY = "llm_only"
    VANILLA_RAG = "vanilla_rag"
    TYPED_RAG = "typed_rag"


# Step names a pipeline trace may contain.
TRACE_STEP_NAMES = frozenset(
    {"classify", "decompose", "retrieve", "dedup", "rerank", "generate", "aggregate", "mediate"}
)


@dataclass(frozen=True)
class TraceStep:
    """One recorded pipeline step: a known step name plus a JSON-safe detail."""

    name: str
    detail: Any = None

    def __post_init__(self) -> None:
        if self.name not in TRACE_STEP_NAMES:
            raise InternalError(f"unknown trace step name: {self.name!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "detail": self.detail}

    @classmethod
    def from_dict(cls, d: dict) -> "TraceStep":
        return cls(name=d["name"], detail=d.get("detail"))


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    source: Optional[str] = None
    nfq_type: Optional[NfqType] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise InputError(f"question {self.id!r} has empty text")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "source": self.source,
            "nfq_type": self.nfq_type.value if self.nfq_type else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Question":
        raw_type = d.get("nfq_type")
        return cls(
            id=d["id"],
            text=d["text"],
            source=d.get("source"),
            nfq_type=NfqType.parse(raw_type) if raw_type else None,
        )


@dataclass(frozen=True)
class Passage:
    """Retrievable text unit; id must be unique within one corpus."""

    id: str
    title: str
    text: str
    score: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.text:
            raise InputError(f"passage {self.id!r} has empty text")

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "text": self.text, "score": self.score}

    @classmethod
    def from_dict(cls, d: dict) -> "Passage":
        return cls(id=d["id"], title=d.get("title", ""), text=d["text"], score=d.get("score"))


@dataclass(frozen=True)
class Answer:
    question_id: str
    text: str
    method: AnswerMethod
    trace: tuple[TraceStep, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "trace", tuple(self.trace))
        if self.method is AnswerMethod.TYPED_RAG and not self.trace:
            raise InternalError("typed answers must carry a non-empty trace")

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "text": self.text,
            "method": self.method.value,
            "trace": [s.to_dict() for s in self.trace],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Answer":
        return cls(
            question_id=d["question_id"],
            text=d["text"],
            method=AnswerMethod(d["method"]),
            trace=tuple(TraceStep.from_dict(s) for s in d.get("trace", [])),
        )


@dataclass(frozen=True)
class QaPair:
    """A sub-query and its generated answer, consumed by the aggregation stage."""

    question: str
    answer: str

    def __post_init__(self) -> None:
        if not self.question or not self.answer:
            raise InputError("question-answer pairs must be non-empty")

    def to_dict(self) -> dict:
        return {"question": self.question, "answer": self.answer}

    @classmethod
    def from_dict(cls, d: dict) -> "QaPair":
        return cls(question=d["question"], answer=d["answer"])
