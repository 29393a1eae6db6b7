import json
import math
import os
import random
import re
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import write_corpus
from nfqa.core import ConfigError, InputError, Passage, TransportError
from nfqa.llm import EndpointConfig
from nfqa.retrieve import (
    Bm25Params,
    CorpusIndex,
    LexicalReranker,
    RemoteReranker,
    RerankRequest,
    build_index,
    dedup,
    rerank,
    search,
    tokenize,
)

# -- independent oracle --------------------------------------------------------
# Scores every document directly from the formula, no inverted index.


def oracle_tokenize(text):
    return re.findall(r"[^\W_]+", text.lower(), re.UNICODE)


def oracle_scores(docs, query, k1=0.9, b=0.4):
    """docs: {id: text}. Returns {id: score} for docs sharing a term with query."""
    tokenized = {pid: oracle_tokenize(text) for pid, text in docs.items()}
    n = len(docs)
    avg = sum(len(t) for t in tokenized.values()) / n if n else 0.0
    out = {}
    for pid, tokens in tokenized.items():
        score = 0.0
        matched = False
        for term in sorted(set(oracle_tokenize(query))):
            tf = tokens.count(term)
            if tf == 0:
                continue
            matched = True
            df = sum(1 for t in tokenized.values() if term in t)
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(tokens) / avg))
        if matched:
            out[pid] = score
    return out


def oracle_ranking(docs, query, **kw):
    scores = oracle_scores(docs, query, **kw)
    return sorted(scores.items(), key=lambda item: (-item[1], item[0]))


# -- tokenizer / params ----------------------------------------------------------


def test_tokenize_lowercases_and_splits_on_non_alphanumerics():
    assert tokenize("Hello, World! x2; foo_bar") == ["hello", "world", "x2", "foo", "bar"]
    assert tokenize("???") == []


def test_params_defaults_and_bounds():
    p = Bm25Params()
    assert (p.k1, p.b) == (0.9, 0.4)
    with pytest.raises(ConfigError):
        Bm25Params(k1=0)
    with pytest.raises(ConfigError):
        Bm25Params(b=1.5)


# -- build_index ------------------------------------------------------------------


def test_three_passage_fixture_statistics(tmp_path):
    # Hand-tokenized lengths: 4, 2, 3 -> mean 3.0
    records = [
        {"id": "p1", "title": "t", "text": "red wine from portugal"},
        {"id": "p2", "title": "t", "text": "white wine"},
        {"id": "p3", "title": "t", "text": "port is fortified"},
    ]
    index = build_index(write_corpus(tmp_path / "c.jsonl", records))
    assert index.doc_count == 3
    assert index.avg_doc_len == pytest.approx((4 + 2 + 3) / 3)


def test_empty_corpus_searches_empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    index = build_index(path)
    assert index.doc_count == 0
    assert search(index, "anything", 5) == []


def test_missing_text_field_names_the_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "title": "t", "text": "ok"}\n{"id": "b", "title": "t"}\n')
    with pytest.raises(InputError, match=":2"):
        build_index(path)


def test_malformed_json_names_the_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "title": "t", "text": "ok"}\nnot json\n')
    with pytest.raises(InputError, match=":2"):
        build_index(path)


def test_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "dup.jsonl"
    line = json.dumps({"id": "a", "title": "t", "text": "x"})
    path.write_text(line + "\n" + line + "\n")
    with pytest.raises(InputError):
        build_index(path)


def test_missing_corpus_is_input_error(tmp_path):
    with pytest.raises(InputError):
        build_index(tmp_path / "nope.jsonl")


def test_unwritable_out_dir_is_config_error(tmp_path):
    if os.geteuid() == 0:
        pytest.skip("running as root; directory permissions are not enforced")
    records = [{"id": "a", "title": "t", "text": "x"}]
    blocked = tmp_path / "blocked"
    blocked.mkdir()
    blocked.chmod(0o400)
    with pytest.raises(ConfigError):
        build_index(write_corpus(tmp_path / "c.jsonl", records), out_dir=blocked / "idx")


def test_save_refuses_path_through_a_file(tmp_path):
    records = [{"id": "a", "title": "t", "text": "x"}]
    not_a_dir = tmp_path / "file"
    not_a_dir.write_text("x")
    with pytest.raises(ConfigError):
        build_index(write_corpus(tmp_path / "c.jsonl", records), out_dir=not_a_dir / "idx")


# -- search ------------------------------------------------------------------------


def test_zero_overlap_query_returns_empty(tmp_path):
    records = [{"id": "a", "title": "t", "text": "alpha beta"}]
    index = build_index(write_corpus(tmp_path / "c.jsonl", records))
    assert search(index, "gamma delta", 5) == []


def test_empty_query_after_tokenization_rejected(tmp_path):
    records = [{"id": "a", "title": "t", "text": "alpha"}]
    index = build_index(write_corpus(tmp_path / "c.jsonl", records))
    with pytest.raises(InputError):
        search(index, "?!", 5)


def test_single_passage_score_matches_hand_formula(tmp_path):
    records = [{"id": "a", "title": "t", "text": "wine"}]
    index = build_index(write_corpus(tmp_path / "c.jsonl", records))
    (hit,) = search(index, "wine", 5)
    k1 = 0.9
    idf = math.log(1 + (1 - 1 + 0.5) / (1 + 0.5))
    expected = idf * 1 * (k1 + 1) / (1 + k1 * 1)  # len/avg == 1
    assert hit.id == "a"
    assert hit.score == pytest.approx(expected, abs=1e-12)


def test_five_passage_top3_matches_brute_force(tmp_path):
    docs = {
        "d1": "grape wine red",
        "d2": "wine wine cellar",
        "d3": "port wine barrel grape",
        "d4": "weather report sunny",
        "d5": "red grape juice",
    }
    records = [{"id": pid, "title": "t", "text": text} for pid, text in docs.items()]
    index = build_index(write_corpus(tmp_path / "c.jsonl", records))
    hits = search(index, "red wine grape", 3)
    expected = oracle_ranking(docs, "red wine grape")[:3]
    assert [h.id for h in hits] == [pid for pid, _ in expected]
    for hit, (_, score) in zip(hits, expected):
        assert hit.score == pytest.approx(score, abs=1e-9)


def test_ties_break_by_ascending_passage_id(tmp_path):
    records = [
        {"id": "z", "title": "t", "text": "wine"},
        {"id": "a", "title": "t", "text": "wine"},
    ]
    index = build_index(write_corpus(tmp_path / "c.jsonl", records))
    assert [h.id for h in search(index, "wine", 2)] == ["a", "z"]


def test_fewer_hits_than_k(tmp_path):
    records = [{"id": "a", "title": "t", "text": "wine"}]
    index = build_index(write_corpus(tmp_path / "c.jsonl", records))
    assert len(search(index, "wine", 10)) == 1


def test_scores_non_increasing_random_corpora(tmp_path):
    rng = random.Random(7)
    vocab = ["alpha", "beta", "gamma", "delta", "wine", "port", "red"]
    for trial in range(10):
        docs = {
            f"d{i}": " ".join(rng.choices(vocab, k=rng.randint(1, 12)))
            for i in range(rng.randint(2, 20))
        }
        records = [{"id": pid, "title": "t", "text": text} for pid, text in docs.items()]
        index = build_index(write_corpus(tmp_path / f"c{trial}.jsonl", records))
        hits = search(index, " ".join(rng.choices(vocab, k=3)), len(docs))
        scores = [h.score for h in hits]
        assert scores == sorted(scores, reverse=True)


def test_index_round_trip_preserves_search_results(tmp_path):
    docs = {
        "d1": "grape wine red", "d2": "wine cellar", "d3": "port wine barrel",
    }
    records = [{"id": pid, "title": f"T-{pid}", "text": text} for pid, text in docs.items()]
    index = build_index(write_corpus(tmp_path / "c.jsonl", records), out_dir=tmp_path / "idx")
    reloaded = CorpusIndex.load(tmp_path / "idx")
    for query in ("wine", "red grape", "port barrel wine"):
        original = [(h.id, h.score) for h in search(index, query, 3)]
        after = [(h.id, h.score) for h in search(reloaded, query, 3)]
        assert original == after


def test_load_rejects_missing_index(tmp_path):
    with pytest.raises(ConfigError):
        CorpusIndex.load(tmp_path / "missing")


# -- dedup ----------------------------------------------------------------------


def passage(pid, text="x", score=None):
    return Passage(id=pid, title=pid.upper(), text=text, score=score)


def test_dedup_keeps_first_occurrence():
    a, b = passage("a"), passage("b")
    assert dedup([a, b, passage("a", "later copy")]) == [a, b]


def test_dedup_empty_and_distinct():
    assert dedup([]) == []
    passages = [passage("a"), passage("b"), passage("c")]
    assert dedup(passages) == passages


@given(st.lists(st.sampled_from("abcde"), max_size=20))
def test_dedup_never_increases_length(ids):
    passages = [passage(i) for i in ids]
    result = dedup(passages)
    assert len(result) <= len(passages)
    assert [p.id for p in result] == sorted(set(ids), key=ids.index)


# -- rerank -------------------------------------------------------------------


class FixedScores:
    def __init__(self, scores):
        self._scores = scores

    def scores(self, request):
        return list(self._scores)


def test_rerank_sorts_by_given_scores():
    passages = (passage("p1"), passage("p2"), passage("p3"))
    result = rerank(RerankRequest("q", passages), FixedScores([0.1, 0.9, 0.5]))
    assert [p.id for p in result] == ["p2", "p3", "p1"]
    assert [p.score for p in result] == [0.9, 0.5, 0.1]


def test_rerank_equal_scores_keep_input_order():
    passages = (passage("x"), passage("y"))
    result = rerank(RerankRequest("q", passages), FixedScores([0.5, 0.5]))
    assert [p.id for p in result] == ["x", "y"]


def test_lexical_fallback_prefers_overlapping_passage():
    wines = passage("w", "portuguese wines list")
    weather = passage("o", "weather today")
    result = rerank(RerankRequest("portuguese wines", (weather, wines)), LexicalReranker())
    assert [p.id for p in result] == ["w", "o"]
    # query tokens {portuguese, wines}; passage tokens {portuguese, wines, list}:
    # precision 2/3, recall 2/2 -> F1 = 0.8; the weather passage shares nothing.
    assert result[0].score == pytest.approx(0.8)
    assert result[1].score == 0.0


def test_rerank_request_validation():
    with pytest.raises(InputError):
        RerankRequest("", (passage("a"),))
    with pytest.raises(InputError):
        RerankRequest("q", ())
    with pytest.raises(InputError):
        RerankRequest("q", tuple(passage(f"p{i}") for i in range(101)))


@given(st.lists(st.tuples(st.sampled_from("abcdef"), st.floats(0, 1)), min_size=1, max_size=10))
def test_rerank_is_a_permutation(items):
    passages = tuple(passage(f"{pid}{i}") for i, (pid, _) in enumerate(items))
    result = rerank(RerankRequest("q", passages), FixedScores([s for _, s in items]))
    assert sorted(p.id for p in result) == sorted(p.id for p in passages)


def test_remote_reranker_against_stub():
    from http.server import BaseHTTPRequestHandler, HTTPServer

    class Stub(BaseHTTPRequestHandler):
        def log_message(self, *a):
            pass

        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            assert self.path == "/rerank"
            reply = json.dumps({"scores": [float(len(p["text"])) for p in body["passages"]]}).encode()
            self.send_response(200)
            self.send_header("Content-Length", str(len(reply)))
            self.end_headers()
            self.wfile.write(reply)

    server = HTTPServer(("127.0.0.1", 0), Stub)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        remote = RemoteReranker(EndpointConfig(base_url=f"http://127.0.0.1:{server.server_port}"))
        passages = (passage("a", "xx"), passage("b", "xxxx"), passage("c", "x"))
        result = rerank(RerankRequest("q", passages), remote)
        assert [p.id for p in result] == ["b", "a", "c"]
    finally:
        server.shutdown()


def test_remote_reranker_unreachable_is_transport_error():
    remote = RemoteReranker(EndpointConfig(base_url="http://127.0.0.1:9", timeout=0.2))
    with pytest.raises(TransportError):
        remote.scores(RerankRequest("q", (passage("a"),)))


# -- oracle equivalence (module-scale; the acceptance suite runs 100 corpora) ----


def test_search_matches_oracle_on_random_corpora(tmp_path):
    rng = random.Random(42)
    vocab = [f"w{i}" for i in range(25)]
    for trial in range(15):
        n_docs = rng.randint(1, 50)
        docs = {
            f"d{i:02d}": " ".join(rng.choices(vocab, k=rng.randint(1, 30)))
            for i in range(n_docs)
        }
        records = [{"id": pid, "title": "t", "text": text} for pid, text in docs.items()]
        index = build_index(write_corpus(tmp_path / f"o{trial}.jsonl", records))
        query = " ".join(rng.choices(vocab, k=rng.randint(1, 8)))
        hits = search(index, query, n_docs)
        expected = oracle_ranking(docs, query)
        assert [h.id for h in hits] == [pid for pid, _ in expected]
        for hit, (_, score) in zip(hits, expected):
            assert abs(hit.score - score) < 1e-9
