"""Question-type assignment.

Two modes: a remote pre-trained classifier service, and a deterministic
heuristic fallback built from prioritized patterns over the question text.
The heuristic rules are an implementation choice, not a learned model; they
are tuned to reproduce the documented example questions per type and can be
replaced wholesale from a JSON rules file.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import requests

from .core import ConfigError, InputError, NfqType, Question, TransportError
from .llm import EndpointConfig


@dataclass(frozen=True)
class PatternRule:
    """One heuristic rule: a case-insensitive regex, anchored iff it starts with ^."""

    nfq_type: NfqType
    pattern: str
    priority: int

    def compiled(self) -> re.Pattern:
        return re.compile(self.pattern, re.IGNORECASE)


# Evaluated in ascending priority; first match wins; no match means evidence-based.
DEFAULT_RULES: tuple[PatternRule, ...] = (
    PatternRule(NfqType.COMPARISON, r"difference between", 10),
    PatternRule(NfqType.COMPARISON, r"similarities", 11),
    PatternRule(NfqType.COMPARISON, r"\bor\b.*\b(better|worse|more|less)\b", 12),
    PatternRule(NfqType.COMPARISON, r"\b(better|worse|more|less)\b.*\bor\b", 13),
    PatternRule(NfqType.DEBATE, r"^should\b", 20),
    PatternRule(NfqType.DEBATE, r"\bis\b.*\b(good|bad)\b", 21),
    PatternRule(NfqType.DEBATE, r"do you agree", 22),
    PatternRule(NfqType.DEBATE, r"what kind of", 23),
    PatternRule(NfqType.INSTRUCTION, r"how can you", 30),
    PatternRule(NfqType.INSTRUCTION, r"how do i\b", 31),
    PatternRule(NfqType.INSTRUCTION, r"how to\b", 32),
    PatternRule(NfqType.INSTRUCTION, r"steps to\b", 33),
    PatternRule(NfqType.REASON, r"\bwhy\b", 40),
    PatternRule(NfqType.REASON, r"for what reason", 41),
    PatternRule(NfqType.REASON, r"what reason", 42),
    PatternRule(NfqType.REASON, r"cause of", 43),
    PatternRule(NfqType.EXPERIENCE, r"\bbest\b", 50),
    PatternRule(NfqType.EXPERIENCE, r"recommend", 51),
    PatternRule(NfqType.EXPERIENCE, r"what are some", 52),
)

# Leading interrogatives that mark single-fact lookups; a question is factoid
# only when one of these fires and no typed pattern above matched.
FACTOID_PATTERNS: tuple[str, ...] = (
    r"^who\s+(is|was|are|were|did|does|do)\b",
    r"^when\s+(is|was|are|were|did|does|do)\b",
    r"^where\s+(is|was|are|were|did|does|do)\b",
    r"^which\s+(is|was|are|were|did|does|do)\b",
)


@dataclass(frozen=True)
class ClassifierConfig:
    mode: str = "heuristic"  # "heuristic" | "remote"
    endpoint: Optional[EndpointConfig] = None
    rules_file: Optional[str] = None

    def __post_init__(self) -> None:
        if self.mode not in ("heuristic", "remote"):
            raise ConfigError(f"unknown classifier mode: {self.mode!r}")
        if self.mode == "remote" and self.endpoint is None:
            raise ConfigError("remote classifier mode requires an endpoint")


def load_rules(path: str | Path) -> tuple[PatternRule, ...]:
    """Load a rule set from JSON: a list of {type, pattern, priority} objects."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as err:
        raise ConfigError(f"cannot load rules file {path}: {err}") from err
    rules = tuple(
        PatternRule(NfqType.parse(r["type"]), r["pattern"], int(r["priority"])) for r in raw
    )
    _check_priorities(rules)
    return rules


def _check_priorities(rules: Sequence[PatternRule]) -> None:
    seen = set()
    for rule in rules:
        if rule.priority in seen:
            raise ConfigError(f"duplicate rule priority {rule.priority}")
        seen.add(rule.priority)


class HeuristicClassifier:
    """Pattern-rule classifier; pure function of (rules, question text)."""

    def __init__(self, rules: Sequence[PatternRule] = DEFAULT_RULES):
        _check_priorities(rules)
        self._rules = sorted(rules, key=lambda r: r.priority)
        self._compiled = [(r.nfq_type, r.compiled()) for r in self._rules]
        self._factoid = [re.compile(p, re.IGNORECASE) for p in FACTOID_PATTERNS]

    def classify(self, question: Question) -> NfqType:
        text = _require_text(question)
        for nfq_type, regex in self._compiled:
            if regex.search(text):
                return nfq_type
        return NfqType.EVIDENCE_BASED

    def is_factoid(self, question: Question) -> bool:
        text = _require_text(question)
        if not any(rx.search(text) for rx in self._factoid):
            return False
        # A typed pattern (comparative, causal, procedural, ...) overrides the
        # factoid-looking opener.
        return all(not regex.search(text) for _, regex in self._compiled)


class RemoteClassifier:
    """Thin client for a classification service; labels are the six type strings
    plus "factoid"."""

    def __init__(self, endpoint: EndpointConfig, session: Optional[requests.Session] = None):
        self.endpoint = endpoint
        self._session = session or requests.Session()

    def _label(self, text: str) -> str:
        url = self.endpoint.base_url.rstrip("/") + "/classify"
        try:
            resp = self._session.post(url, json={"text": text}, timeout=self.endpoint.timeout)
        except requests.RequestException as err:
            raise TransportError(f"classifier request failed: {err}") from err
        if resp.status_code != 200:
            raise TransportError(f"classifier returned HTTP {resp.status_code}")
        try:
            return resp.json()["label"]
        except (ValueError, KeyError) as err:
            raise TransportError(f"malformed classifier reply: {err}") from err

    def classify(self, question: Question) -> NfqType:
        label = self._label(_require_text(question))
        if label == "factoid":
            # The service has no non-factoid opinion; treat as the default type.
            return NfqType.EVIDENCE_BASED
        return NfqType.parse(label)

    def is_factoid(self, question: Question) -> bool:
        return self._label(_require_text(question)) == "factoid"


def _require_text(question: Question) -> str:
    text = question.text.strip()
    if not text:
        raise InputError("question text is empty")
    return text


# Questions shorter than this are rejected by the curation post-filter.
MIN_FILTER_TOKENS = 3


def passes_nfq_filter(question: Question, heuristic: Optional[HeuristicClassifier] = None) -> bool:
    """Pattern post-filter applied after classification during dataset curation.

    Rejects questions that still look like single-fact lookups under the
    heuristic rule set, and degenerate very-short questions.
    """
    heuristic = heuristic or HeuristicClassifier()
    if len(question.text.split()) < MIN_FILTER_TOKENS:
        return False
    return not heuristic.is_factoid(question)


def build_classifier(config: ClassifierConfig):
    if config.mode == "remote":
        return RemoteClassifier(config.endpoint)
    rules = load_rules(config.rules_file) if config.rules_file else DEFAULT_RULES
    return HeuristicClassifier(rules)
