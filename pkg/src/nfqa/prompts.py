"""Prompt template assets and rendering.

Templates are shipped as plain-text package data and rendered by literal
placeholder substitution only: ``{name}`` is replaced for the slots a caller
provides, every other brace in a template (JSON examples, format docs) is
left untouched. A directory override lets deployments swap individual
templates without touching the package.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .core import ConfigError, Passage, QaPair

TEMPLATE_NAMES = (
    "llm_answer",
    "rag_answer",
    "compare_analyze",
    "compare_answer",
    "experience_keywords",
    "reason_subqueries",
    "instruction_subqueries",
    "aggregate_answers",
    "debate_decompose",
    "debate_mediator",
    "linkage_rank",
    "reference_rewrite",
    "reference_tiers",
    "annotate_system",
    "annotate_input",
)


def render(template: str, **slots: str) -> str:
    """Substitute ``{key}`` for each provided slot, longest key first."""
    out = template
    for key in sorted(slots, key=len, reverse=True):
        out = out.replace("{" + key + "}", slots[key])
    return out


class PromptLibrary:
    """Loads templates from an optional override directory, else package data."""

    def __init__(self, prompt_dir: Optional[str | Path] = None):
        self.prompt_dir = Path(prompt_dir) if prompt_dir else None
        self._cache: dict[str, str] = {}

    def text(self, name: str) -> str:
        if name not in TEMPLATE_NAMES:
            raise ConfigError(f"unknown prompt template: {name!r}")
        if name in self._cache:
            return self._cache[name]
        if self.prompt_dir is not None:
            override = self.prompt_dir / f"{name}.txt"
            if override.exists():
                text = override.read_text(encoding="utf-8")
                self._cache[name] = text
                return text
        text = resources.files("nfqa").joinpath(f"prompts/{name}.txt").read_text(encoding="utf-8")
        self._cache[name] = text
        return text

    def render(self, name: str, **slots: str) -> str:
        return render(self.text(name), **slots)


def format_passages(passages: Sequence[Passage]) -> str:
    """References block for generation prompts, one line per passage in rank order."""
    if not passages:
        return "(no references found)"
    return "\n".join(f"Doc {i} (Title: {p.title}): {p.text}" for i, p in enumerate(passages, 1))


def format_reference_answers(texts: Iterable[str]) -> str:
    """Numbered, quality-descending reference list for the ranking prompt."""
    return "\n" + "\n".join(f"{i}. {t}" for i, t in enumerate(texts, 1))


def format_candidate_answers(texts: Iterable[str]) -> str:
    """Candidate list for the annotation prompt, matching its Answer X reply format."""
    return "\n".join(f"Answer {i}: {t}" for i, t in enumerate(texts, 1))


def format_qa_pairs(pairs: Sequence[QaPair]) -> str:
    lines = []
    for i, pair in enumerate(pairs, 1):
        lines.append(f"Q{i}: {pair.question}")
        lines.append(f"A{i}: {pair.answer}")
    return "\n".join(lines)


def format_debate_responses(responses: Sequence[tuple[str, str]]) -> str:
    """(answer text, perspective) pairs as the mediator prompt's response list."""
    return "\n" + "\n".join(
        f'- Response {i}: "{text}" (Perspective: {perspective})'
        for i, (text, perspective) in enumerate(responses, 1)
    )
