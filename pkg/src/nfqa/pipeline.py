"""Type-aware answer orchestration.

One strategy per question type: plain retrieve-then-generate for
evidence-based questions; keyword-driven retrieval with reranking for
comparison and experience; sub-query fan-out with aggregation for reason and
instruction; per-opinion fan-out with a mediator persona for debate. The two
baselines (LLM-only and vanilla RAG) live here too so every method shares
plumbing and trace conventions.

Every answer carries an ordered trace of the steps that produced it; traces
are deterministic under scripted clients because fan-out results are merged
in sub-query order, never completion order.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

from .core import (
    Answer,
    AnswerMethod,
    ConfigError,
    InputError,
    NfqaError,
    NfqType,
    Passage,
    QaPair,
    Question,
    TraceStep,
)
from .decompose import Decomposer
from .llm import LlmRole
from .prompts import (
    PromptLibrary,
    format_debate_responses,
    format_passages,
    format_qa_pairs,
)
from .retrieve import CorpusIndex, RerankRequest, dedup, rerank, search

log = logging.getLogger(__name__)

# Aggregation needs at least this many surviving sub-answers.
MIN_SUB_ANSWERS = 2


@dataclass(frozen=True)
class PipelineConfig:
    k_final: int = 5
    k_per_keyword: int = 5
    k_per_subquery: int = 5
    prompt_dir: Optional[str] = None

    def __post_init__(self) -> None:
        for name in ("k_final", "k_per_keyword", "k_per_subquery"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def _wrap_step(step: str, fn: Callable, *args, **kwargs):
    """Run one stage, tagging any artifact error with the step it failed in."""
    try:
        return fn(*args, **kwargs)
    except NfqaError as err:
        raise type(err)(f"step {step}: {err}") from err


class Pipeline:
    def __init__(
        self,
        index: CorpusIndex,
        classifier,
        decomposer_role: LlmRole,
        generator_role: LlmRole,
        reranker,
        config: PipelineConfig = PipelineConfig(),
    ):
        self.index = index
        self.classifier = classifier
        self.generator = generator_role
        self.reranker = reranker
        self.config = config
        self.prompts = PromptLibrary(config.prompt_dir)
        self.decomposer = Decomposer(decomposer_role, self.prompts)

    # -- entry points ------------------------------------------------------

    def answer(self, question: Question) -> Answer:
        """Classify (unless preset) and run the matching per-type strategy."""
        trace: list[TraceStep] = []
        if question.nfq_type is not None:
            nfq_type = question.nfq_type
        else:
            nfq_type = _wrap_step("classify", self.classifier.classify, question)
            trace.append(TraceStep("classify", {"nfq_type": nfq_type.value}))
        strategies = {
            NfqType.EVIDENCE_BASED: self._run_evidence_based,
            NfqType.COMPARISON: self._run_comparison,
            NfqType.EXPERIENCE: self._run_experience,
            NfqType.REASON: self._run_multi,
            NfqType.INSTRUCTION: self._run_multi,
            NfqType.DEBATE: self._run_debate,
        }
        text = strategies[nfq_type](question, nfq_type, trace)
        return Answer(question.id, text, AnswerMethod.TYPED_RAG, tuple(trace))

    def answer_evidence_based(self, question: Question) -> Answer:
        trace: list[TraceStep] = []
        text = self._run_evidence_based(question, NfqType.EVIDENCE_BASED, trace)
        return Answer(question.id, text, AnswerMethod.TYPED_RAG, tuple(trace))

    def answer_comparison(self, question: Question) -> Answer:
        trace: list[TraceStep] = []
        text = self._run_comparison(question, NfqType.COMPARISON, trace)
        return Answer(question.id, text, AnswerMethod.TYPED_RAG, tuple(trace))

    def answer_experience(self, question: Question) -> Answer:
        trace: list[TraceStep] = []
        text = self._run_experience(question, NfqType.EXPERIENCE, trace)
        return Answer(question.id, text, AnswerMethod.TYPED_RAG, tuple(trace))

    def answer_multi(self, question: Question, nfq_type: NfqType) -> Answer:
        trace: list[TraceStep] = []
        text = self._run_multi(question, nfq_type, trace)
        return Answer(question.id, text, AnswerMethod.TYPED_RAG, tuple(trace))

    def answer_debate(self, question: Question) -> Answer:
        trace: list[TraceStep] = []
        text = self._run_debate(question, NfqType.DEBATE, trace)
        return Answer(question.id, text, AnswerMethod.TYPED_RAG, tuple(trace))

    def answer_llm_only(self, question: Question) -> Answer:
        trace: list[TraceStep] = []
        prompt = self.prompts.render("llm_answer", question=question.text)
        text = self._generate(prompt, trace)
        return Answer(question.id, text, AnswerMethod.LLM_ONLY, tuple(trace))

    def answer_vanilla_rag(self, question: Question) -> Answer:
        """The RAG baseline: original question in, no classification, no decomposition."""
        trace: list[TraceStep] = []
        passages = self._retrieve(question.text, self.config.k_final, trace)
        prompt = self.prompts.render(
            "rag_answer",
            reference_passages=format_passages(passages[: self.config.k_final]),
            question=question.text,
        )
        text = self._generate(prompt, trace)
        return Answer(question.id, text, AnswerMethod.VANILLA_RAG, tuple(trace))

    # -- shared stages -----------------------------------------------------

    def _retrieve(self, query: str, k: int, trace: list[TraceStep]) -> list[Passage]:
        hits = _wrap_step("retrieve", search, self.index, query, k)
        trace.append(TraceStep("retrieve", {"query": query, "k": k, "ids": [p.id for p in hits]}))
        return hits

    def _generate(self, prompt: str, trace: list[TraceStep], step: str = "generate") -> str:
        text = _wrap_step(step, self.generator.complete_text, prompt)
        trace.append(TraceStep(step, {"prompt_digest": _digest(prompt), "output_digest": _digest(text)}))
        return text

    def _dedup(self, pool: list[Passage], trace: list[TraceStep]) -> list[Passage]:
        unique = dedup(pool)
        trace.append(TraceStep("dedup", {"before": len(pool), "after": len(unique)}))
        return unique

    def _rerank(self, query: str, passages: list[Passage], trace: list[TraceStep]) -> list[Passage]:
        if passages:
            ranked = _wrap_step("rerank", rerank, RerankRequest(query, tuple(passages)), self.reranker)
        else:
            ranked = []
        trace.append(TraceStep("rerank", {"query": query, "ids": [p.id for p in ranked]}))
        return ranked

    def _rag_generate(self, question_text: str, passages: list[Passage], trace: list[TraceStep]) -> str:
        prompt = self.prompts.render(
            "rag_answer",
            reference_passages=format_passages(passages[: self.config.k_final]),
            question=question_text,
        )
        return self._generate(prompt, trace)

    # -- per-type strategies -------------------------------------------------

    def _run_evidence_based(self, question: Question, _t: NfqType, trace: list[TraceStep]) -> str:
        passages = self._retrieve(question.text, self.config.k_final, trace)
        return self._rag_generate(question.text, passages, trace)

    def _run_comparison(self, question: Question, _t: NfqType, trace: list[TraceStep]) -> str:
        analysis = _wrap_step("decompose", self.decomposer.analyze_comparison, question)
        trace.append(TraceStep("decompose", {"kind": "comparison", "plan": analysis.to_output_json()}))
        if not analysis.is_compare:
            # The extractor disagrees with the classifier; degrade to the
            # single-aspect strategy.
            return self._run_evidence_based(question, NfqType.EVIDENCE_BASED, trace)
        pool: list[Passage] = []
        for keyword in analysis.keywords:
            pool.extend(self._retrieve(keyword, self.config.k_per_keyword, trace))
        unique = self._dedup(pool, trace)
        ranked = self._rerank(question.text, unique, trace)
        top = ranked[: self.config.k_final]
        prompt = self.prompts.render(
            "compare_answer",
            question=question.text,
            comparison_type=analysis.compare_type.value,
            keywords=", ".join(analysis.keywords),
            reference_passages=format_passages(top),
        )
        return self._generate(prompt, trace)

    def _run_experience(self, question: Question, _t: NfqType, trace: list[TraceStep]) -> str:
        keywords = _wrap_step("decompose", self.decomposer.extract_experience_keywords, question)
        trace.append(TraceStep("decompose", {"kind": "experience", "keywords": list(keywords.keywords)}))
        pool = self._retrieve(question.text, self.config.k_per_keyword, trace)
        pool = pool + self._retrieve(keywords.joined(), self.config.k_per_keyword, trace)
        unique = self._dedup(pool, trace)
        ranked = self._rerank(keywords.joined(), unique, trace)
        return self._rag_generate(question.text, ranked[: self.config.k_final], trace)

    def _run_multi(self, question: Question, nfq_type: NfqType, trace: list[TraceStep]) -> str:
        subqueries = _wrap_step("decompose", self.decomposer.generate_subqueries, question, nfq_type)
        trace.append(
            TraceStep("decompose", {"kind": nfq_type.value, "sub_queries": list(subqueries.queries)})
        )
        outcomes = self._fan_out(list(subqueries.queries), trace)
        pairs = [QaPair(question=q, answer=text) for _, q, text in outcomes]
        prompt = self.prompts.render(
            "aggregate_answers",
            original_question=question.text,
            qa_pairs_text=format_qa_pairs(pairs),
        )
        return self._generate(prompt, trace, step="aggregate")

    def _run_debate(self, question: Question, _t: NfqType, trace: list[TraceStep]) -> str:
        plan = _wrap_step("decompose", self.decomposer.decompose_debate, question)
        trace.append(TraceStep("decompose", {"kind": "debate", "plan": plan.to_output_json()}))
        queries = [plan.sub_queries[op] for op in plan.opinions]
        outcomes = self._fan_out(queries, trace)
        responses = [(text, plan.opinions[i]) for i, _q, text in outcomes]
        prompt = self.prompts.render(
            "debate_mediator",
            debate_topic=plan.debate_topic,
            responses=format_debate_responses(responses),
        )
        return self._generate(prompt, trace, step="mediate")

    def _fan_out(self, queries: list[str], trace: list[TraceStep]) -> list[tuple[int, str, str]]:
        """Retrieve and generate per sub-query concurrently.

        Results and trace steps are merged in sub-query order, so output is
        independent of completion order. A failed sub-query is dropped as
        long as MIN_SUB_ANSWERS answers survive.
        """

        def _one(query: str) -> tuple[list[TraceStep], Optional[str], Optional[NfqaError]]:
            local: list[TraceStep] = []
            try:
                hits = self._retrieve(query, self.config.k_per_subquery, local)
                text = self._rag_generate(query, hits, local)
                return local, text, None
            except NfqaError as err:
                return local, None, err

        with ThreadPoolExecutor(max_workers=max(1, len(queries))) as pool:
            settled = list(pool.map(_one, queries))

        outcomes: list[tuple[int, str, str]] = []
        first_error: Optional[NfqaError] = None
        for i, (query, (local, text, err)) in enumerate(zip(queries, settled)):
            trace.extend(local)
            if err is not None:
                first_error = first_error or err
                log.warning("sub-query %r dropped: %s", query, err)
            else:
                outcomes.append((i, query, text))
        if len(outcomes) < MIN_SUB_ANSWERS:
            if first_error is not None:
                raise first_error
            raise InputError("not enough sub-queries to aggregate")
        return outcomes
