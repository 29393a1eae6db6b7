import json

import pytest

from nfqa.llm import LlmRole, MockChatClient, RoleDefaults
from nfqa.retrieve import Bm25Params, build_index


def make_role(script, **kwargs):
    return LlmRole(MockChatClient(script, **kwargs), RoleDefaults(model="mock-model"))


def write_corpus(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


@pytest.fixture
def corpus_factory(tmp_path):
    def _build(records, name="corpus.jsonl", params=Bm25Params()):
        path = write_corpus(tmp_path / name, records)
        return build_index(path, params)

    return _build


@pytest.fixture
def ten_passage_index(corpus_factory):
    """Ten passages with controlled term overlap for pipeline trace tests.

    "alpha" occurs in exactly a1-a3 + s1-s2; "beta" in b1-b3 + s1-s2.
    """
    records = [
        {"id": "a1", "title": "A1", "text": "alpha facts about wine regions"},
        {"id": "a2", "title": "A2", "text": "alpha history of production"},
        {"id": "a3", "title": "A3", "text": "alpha climate and soil notes"},
        {"id": "b1", "title": "B1", "text": "beta facts about grape varieties"},
        {"id": "b2", "title": "B2", "text": "beta history of trade routes"},
        {"id": "b3", "title": "B3", "text": "beta climate influence studies"},
        {"id": "s1", "title": "S1", "text": "alpha beta shared comparison overview"},
        {"id": "s2", "title": "S2", "text": "alpha beta joint analysis summary"},
        {"id": "d1", "title": "D1", "text": "unrelated filler text about weather sterilisation money flow"},
        {"id": "d2", "title": "D2", "text": "another filler text mentioning lodges and membership"},
    ]
    return corpus_factory(records)
