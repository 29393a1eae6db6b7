"""Multi-aspect decomposition of non-factoid questions.

Each question type gets its own LLM-driven extraction: comparison structure,
experience keywords, single-aspect sub-queries, or a debate plan. Parsing is
lenient about surrounding chat filler but strict about schema: the first
balanced JSON region must carry the expected keys. Every operation retries
the identical prompt once when parsing fails before surfacing ParseError.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .core import InputError, NfqType, ParseError, Question
from .llm import LlmRole
from .prompts import PromptLibrary

SUBQUERY_MIN = 2
SUBQUERY_MAX = 5


class CompareType(enum.Enum):
    DIFFERENCE = "differences"
    SIMILARITY = "similarities"
    SUPERIORITY = "superiority"


# Accepted spellings seen in model output for each comparison purpose.
_COMPARE_SYNONYMS = {
    CompareType.DIFFERENCE: re.compile(r"^differences?$", re.IGNORECASE),
    CompareType.SIMILARITY: re.compile(r"^similarit(y|ies)$", re.IGNORECASE),
    CompareType.SUPERIORITY: re.compile(r"^superior(ity)?$", re.IGNORECASE),
}


def parse_compare_type(label: str) -> CompareType:
    label = label.strip()
    for compare_type, rx in _COMPARE_SYNONYMS.items():
        if rx.match(label):
            return compare_type
    raise ParseError(f"unrecognized comparison type: {label!r}")


@dataclass(frozen=True)
class CompareAnalysis:
    is_compare: bool
    compare_type: Optional[CompareType] = None
    keywords: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "keywords", tuple(self.keywords))
        if self.is_compare:
            if self.compare_type is None:
                raise InputError("comparison analysis lacks a comparison type")
            if len(self.keywords) < 2:
                raise InputError("comparison needs at least two compared items")

    def to_output_json(self) -> str:
        return json.dumps(
            {
                "is_compare": self.is_compare,
                "compare_type": self.compare_type.value if self.compare_type else "",
                "keywords_list": list(self.keywords),
            }
        )


@dataclass(frozen=True)
class ExperienceKeywords:
    keywords: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "keywords", tuple(self.keywords))
        if not self.keywords:
            raise InputError("keyword extraction produced no keywords")
        lowered = [k.lower() for k in self.keywords]
        if len(set(lowered)) != len(lowered):
            raise InputError("keywords must be unique (case-insensitive)")

    def joined(self) -> str:
        return " ".join(self.keywords)

    def to_output_json(self) -> str:
        return json.dumps(list(self.keywords))


@dataclass(frozen=True)
class SubQuerySet:
    origin_type: NfqType
    queries: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "queries", tuple(self.queries))
        if self.origin_type not in (NfqType.REASON, NfqType.INSTRUCTION):
            raise InputError(f"sub-query sets only exist for reason/instruction, got {self.origin_type}")
        if not SUBQUERY_MIN <= len(self.queries) <= SUBQUERY_MAX:
            raise InputError(f"sub-query count {len(self.queries)} outside [{SUBQUERY_MIN}, {SUBQUERY_MAX}]")

    def to_output_json(self) -> str:
        return json.dumps(list(self.queries))


@dataclass(frozen=True)
class DebatePlan:
    debate_topic: str
    opinions: tuple[str, ...]
    sub_queries: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "opinions", tuple(self.opinions))
        if not self.debate_topic:
            raise InputError("debate plan lacks a topic")
        if not SUBQUERY_MIN <= len(self.opinions) <= SUBQUERY_MAX:
            raise InputError(f"opinion count {len(self.opinions)} outside [{SUBQUERY_MIN}, {SUBQUERY_MAX}]")
        if set(self.sub_queries) != set(self.opinions) or len(self.opinions) != len(set(self.opinions)):
            raise InputError("every opinion needs exactly one sub-query")
        if any(not q for q in self.sub_queries.values()):
            raise InputError("debate sub-queries must be non-empty")

    def to_output_json(self) -> str:
        return json.dumps(
            {
                "debate_topic": self.debate_topic,
                "dist_opinion": list(self.opinions),
                "sub-queries": {op: self.sub_queries[op] for op in self.opinions},
            }
        )


def extract_first_json(text: str) -> Any:
    """Parse the first balanced {...} or [...] region in free-form model output.

    Fenced code blocks need no special casing: scanning the raw text walks
    straight through them. Regions that balance but fail to parse are skipped
    in favor of later candidates.
    """
    openers = {"{": "}", "[": "]"}
    i = 0
    while i < len(text):
        ch = text[i]
        if ch not in openers:
            i += 1
            continue
        region = _balanced_region(text, i, ch, openers[ch])
        if region is not None:
            try:
                return json.loads(region)
            except ValueError:
                pass
        i += 1
    raise ParseError(f"no parsable JSON region in model output: {text[:120]!r}")


def _balanced_region(text: str, start: int, opener: str, closer: str) -> Optional[str]:
    depth = 0
    in_string = False
    escaped = False
    for j in range(start, len(text)):
        ch = text[j]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == opener:
            depth += 1
        elif ch == closer:
            depth -= 1
            if depth == 0:
                return text[start : j + 1]
    return None


def _ask(role: LlmRole, prompt: str, parse: Callable[[str], Any]) -> Any:
    """Call the decomposer role and parse; retry the same prompt once on ParseError."""
    try:
        return parse(role.complete_text(prompt))
    except ParseError:
        return parse(role.complete_text(prompt))


class Decomposer:
    def __init__(self, role: LlmRole, prompts: Optional[PromptLibrary] = None):
        self.role = role
        self.prompts = prompts or PromptLibrary()

    def analyze_comparison(self, question: Question) -> CompareAnalysis:
        prompt = self.prompts.render("compare_analyze", query=question.text)
        return _ask(self.role, prompt, self._parse_comparison)

    @staticmethod
    def _parse_comparison(raw: str) -> CompareAnalysis:
        obj = extract_first_json(raw)
        if not isinstance(obj, dict):
            raise ParseError("comparison analysis must be a JSON object")
        missing = {"is_compare", "compare_type", "keywords_list"} - set(obj)
        if missing:
            raise ParseError(f"comparison analysis missing keys: {sorted(missing)}")
        if not obj["is_compare"]:
            return CompareAnalysis(is_compare=False)
        keywords = _string_list(obj["keywords_list"], "keywords_list")
        return CompareAnalysis(
            is_compare=True,
            compare_type=parse_compare_type(str(obj["compare_type"])),
            keywords=tuple(keywords),
        )

    def extract_experience_keywords(self, question: Question) -> ExperienceKeywords:
        prompt = self.prompts.render("experience_keywords", question=question.text)
        return _ask(self.role, prompt, self._parse_keywords)

    @staticmethod
    def _parse_keywords(raw: str) -> ExperienceKeywords:
        items = _string_list(extract_first_json(raw), "keyword list")
        deduped: list[str] = []
        seen: set[str] = set()
        for item in items:
            if item.lower() not in seen:
                seen.add(item.lower())
                deduped.append(item)
        if not deduped:
            raise InputError("keyword extraction returned an empty list")
        return ExperienceKeywords(tuple(deduped))

    def generate_subqueries(self, question: Question, nfq_type: NfqType) -> SubQuerySet:
        if nfq_type not in (NfqType.REASON, NfqType.INSTRUCTION):
            raise InputError(f"sub-query generation is for reason/instruction, got {nfq_type.value}")
        template = "reason_subqueries" if nfq_type is NfqType.REASON else "instruction_subqueries"
        prompt = self.prompts.render(template, query=question.text)
        queries = _ask(self.role, prompt, lambda raw: _string_list(extract_first_json(raw), "sub-queries"))
        if len(queries) < SUBQUERY_MIN:
            raise InputError(f"model produced {len(queries)} sub-queries, need at least {SUBQUERY_MIN}")
        return SubQuerySet(origin_type=nfq_type, queries=tuple(queries[:SUBQUERY_MAX]))

    def decompose_debate(self, question: Question) -> DebatePlan:
        prompt = self.prompts.render("debate_decompose", query=question.text)
        return _ask(self.role, prompt, self._parse_debate)

    @staticmethod
    def _parse_debate(raw: str) -> DebatePlan:
        obj = extract_first_json(raw)
        if not isinstance(obj, dict):
            raise ParseError("debate plan must be a JSON object")
        missing = {"debate_topic", "dist_opinion", "sub-queries"} - set(obj)
        if missing:
            raise ParseError(f"debate plan missing keys: {sorted(missing)}")
        topic = str(obj["debate_topic"]).strip()
        opinions = _string_list(obj["dist_opinion"], "dist_opinion")
        sub_queries = obj["sub-queries"]
        if not isinstance(sub_queries, dict):
            raise ParseError("sub-queries must be an object keyed by opinion")
        if len(opinions) > SUBQUERY_MAX:
            opinions = opinions[:SUBQUERY_MAX]
            sub_queries = {k: v for k, v in sub_queries.items() if k in opinions}
        return DebatePlan(
            debate_topic=topic,
            opinions=tuple(opinions),
            sub_queries={str(k): str(v) for k, v in sub_queries.items()},
        )


def _string_list(value: Any, what: str) -> list[str]:
    if not isinstance(value, list) or any(not isinstance(x, str) for x in value):
        raise ParseError(f"{what} must be a JSON list of strings")
    items = [x.strip() for x in value]
    if any(not x for x in items):
        raise ParseError(f"{what} contains empty entries")
    return items
