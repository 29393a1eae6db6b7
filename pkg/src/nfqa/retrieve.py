"""BM25 retrieval over a JSONL passage corpus, plus dedup and reranking.

Index layout on disk is a versioned directory: manifest.json (params and
corpus statistics), postings.json (term -> [[passage id, tf], ...]) and
store.jsonl (one passage per line). Scoring is Okapi BM25 with the
non-negative idf variant ln(1 + (N - df + 0.5)/(df + 0.5)); the tokenizer is
lowercase alphanumeric runs with no stemming or stopwords, chosen so an
independent brute-force scorer can reproduce results exactly.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import requests

from .core import ConfigError, InputError, Passage, TransportError
from .llm import EndpointConfig

INDEX_FORMAT_VERSION = 1
DEFAULT_K = 5
MAX_RERANK_PASSAGES = 100

_TOKEN_RX = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs; everything else is a separator."""
    return _TOKEN_RX.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ConfigError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ConfigError(f"b must be in [0, 1], got {self.b}")


@dataclass
class CorpusIndex:
    params: Bm25Params
    doc_count: int = 0
    avg_doc_len: float = 0.0
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)
    store: dict[str, Passage] = field(default_factory=dict)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            manifest = {
                "format_version": INDEX_FORMAT_VERSION,
                "k1": self.params.k1,
                "b": self.params.b,
                "doc_count": self.doc_count,
                "avg_doc_len": self.avg_doc_len,
            }
            (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
            (out / "postings.json").write_text(
                json.dumps({t: [[pid, tf] for pid, tf in plist] for t, plist in self.postings.items()}),
                encoding="utf-8",
            )
            with (out / "store.jsonl").open("w", encoding="utf-8") as fh:
                for pid in sorted(self.store):
                    p = self.store[pid]
                    fh.write(
                        json.dumps(
                            {"id": p.id, "title": p.title, "text": p.text, "len": self.doc_lengths[pid]}
                        )
                        + "\n"
                    )
        except OSError as err:
            raise ConfigError(f"cannot write index to {out}: {err}") from err

    @classmethod
    def load(cls, index_dir: str | Path) -> "CorpusIndex":
        path = Path(index_dir)
        try:
            manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
            if manifest.get("format_version") != INDEX_FORMAT_VERSION:
                raise ConfigError(f"unsupported index format: {manifest.get('format_version')}")
            postings_raw = json.loads((path / "postings.json").read_text(encoding="utf-8"))
            store: dict[str, Passage] = {}
            doc_lengths: dict[str, int] = {}
            with (path / "store.jsonl").open(encoding="utf-8") as fh:
                for line in fh:
                    d = json.loads(line)
                    store[d["id"]] = Passage(id=d["id"], title=d["title"], text=d["text"])
                    doc_lengths[d["id"]] = d["len"]
        except (OSError, ValueError, KeyError) as err:
            raise ConfigError(f"cannot load index from {path}: {err}") from err
        return cls(
            params=Bm25Params(k1=manifest["k1"], b=manifest["b"]),
            doc_count=manifest["doc_count"],
            avg_doc_len=manifest["avg_doc_len"],
            postings={t: [(pid, tf) for pid, tf in plist] for t, plist in postings_raw.items()},
            doc_lengths=doc_lengths,
            store=store,
        )


def build_index(
    corpus_path: str | Path,
    params: Bm25Params = Bm25Params(),
    out_dir: Optional[str | Path] = None,
) -> CorpusIndex:
    """Index a JSONL corpus of {id, title, text} objects; optionally persist."""
    index = CorpusIndex(params=params)
    path = Path(corpus_path)
    if not path.exists():
        raise InputError(f"corpus file not found: {path}")
    total_len = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError as err:
                raise InputError(f"{path}:{lineno}: not valid JSON: {err}") from None
            if not isinstance(record, dict):
                raise InputError(f"{path}:{lineno}: expected a JSON object")
            for key in ("id", "title", "text"):
                if key not in record:
                    raise InputError(f"{path}:{lineno}: missing field {key!r}")
            pid = str(record["id"])
            if pid in index.store:
                raise InputError(f"{path}:{lineno}: duplicate passage id {pid!r}")
            passage = Passage(id=pid, title=str(record["title"]), text=str(record["text"]))
            tokens = tokenize(passage.text)
            index.store[pid] = passage
            index.doc_lengths[pid] = len(tokens)
            total_len += len(tokens)
            counts: dict[str, int] = {}
            for tok in tokens:
                counts[tok] = counts.get(tok, 0) + 1
            for term, tf in counts.items():
                index.postings.setdefault(term, []).append((pid, tf))
    index.doc_count = len(index.store)
    index.avg_doc_len = total_len / index.doc_count if index.doc_count else 0.0
    if out_dir is not None:
        index.save(out_dir)
    return index


def search(index: CorpusIndex, query: str, k: int = DEFAULT_K) -> list[Passage]:
    """Top-k passages by BM25 score, ties broken by ascending passage id."""
    if k < 1:
        raise InputError(f"k must be at least 1, got {k}")
    terms = sorted(set(tokenize(query)))
    if not terms:
        raise InputError("query has no searchable tokens")
    if index.doc_count == 0:
        return []
    k1, b = index.params.k1, index.params.b
    scores: dict[str, float] = {}
    for term in terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for pid, tf in plist:
            norm = k1 * (1.0 - b + b * index.doc_lengths[pid] / index.avg_doc_len)
            scores[pid] = scores.get(pid, 0.0) + idf * tf * (k1 + 1.0) / (tf + norm)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
    return [
        Passage(id=pid, title=index.store[pid].title, text=index.store[pid].text, score=score)
        for pid, score in ranked
    ]


def dedup(passages: Sequence[Passage]) -> list[Passage]:
    """Drop passages whose id was already seen, keeping the first occurrence."""
    seen: set[str] = set()
    out: list[Passage] = []
    for p in passages:
        if p.id not in seen:
            seen.add(p.id)
            out.append(p)
    return out


@dataclass(frozen=True)
class RerankRequest:
    query: str
    passages: tuple[Passage, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "passages", tuple(self.passages))
        if not self.query:
            raise InputError("rerank query must be non-empty")
        if not self.passages:
            raise InputError("rerank needs at least one passage")
        if len(self.passages) > MAX_RERANK_PASSAGES:
            raise InputError(f"at most {MAX_RERANK_PASSAGES} passages per rerank request")


class LexicalReranker:
    """Deterministic fallback: token-overlap F1 between query and passage text."""

    def scores(self, request: RerankRequest) -> list[float]:
        query_counts = _counts(tokenize(request.query))
        return [_overlap_f1(query_counts, _counts(tokenize(p.text))) for p in request.passages]


class RemoteReranker:
    """Client for a cross-scoring service: one real score per (query, passage)."""

    def __init__(self, endpoint: EndpointConfig, session: Optional[requests.Session] = None):
        self.endpoint = endpoint
        self._session = session or requests.Session()

    def scores(self, request: RerankRequest) -> list[float]:
        url = self.endpoint.base_url.rstrip("/") + "/rerank"
        body = {
            "query": request.query,
            "passages": [{"id": p.id, "title": p.title, "text": p.text} for p in request.passages],
        }
        try:
            resp = self._session.post(url, json=body, timeout=self.endpoint.timeout)
        except requests.RequestException as err:
            raise TransportError(f"rerank request failed: {err}") from err
        if resp.status_code != 200:
            raise TransportError(f"reranker returned HTTP {resp.status_code}")
        try:
            scores = resp.json()["scores"]
        except (ValueError, KeyError) as err:
            raise TransportError(f"malformed reranker reply: {err}") from err
        if not isinstance(scores, list) or len(scores) != len(request.passages):
            raise TransportError("reranker returned a score list of the wrong length")
        return [float(s) for s in scores]


def rerank(request: RerankRequest, reranker) -> list[Passage]:
    """Rescore and sort descending; equal scores keep their input order."""
    scores = reranker.scores(request)
    rescored = [
        Passage(id=p.id, title=p.title, text=p.text, score=s)
        for p, s in zip(request.passages, scores)
    ]
    order = sorted(range(len(rescored)), key=lambda i: (-rescored[i].score, i))
    return [rescored[i] for i in order]


def _counts(tokens: list[str]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for tok in tokens:
        counts[tok] = counts.get(tok, 0) + 1
    return counts


def _overlap_f1(query_counts: dict[str, int], passage_counts: dict[str, int]) -> float:
    overlap = sum(min(n, passage_counts.get(t, 0)) for t, n in query_counts.items())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(passage_counts.values())
    recall = overlap / sum(query_counts.values())
    return 2.0 * precision * recall / (precision + recall)
