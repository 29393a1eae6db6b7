import pytest
from hypothesis import given
from hypothesis import strategies as st

from nfqa.core import (
    Answer,
    AnswerMethod,
    InputError,
    InternalError,
    NfqType,
    Passage,
    QaPair,
    Question,
    TraceStep,
)

TYPE_LABELS = ["evidence-based", "comparison", "experience", "reason", "instruction", "debate"]


def test_nfq_type_has_exactly_six_variants():
    assert sorted(t.value for t in NfqType) == sorted(TYPE_LABELS)


@pytest.mark.parametrize("label", TYPE_LABELS)
def test_nfq_type_parse_render_identity(label):
    assert NfqType.parse(label).render() == label


@given(st.text(max_size=30))
def test_nfq_type_parse_rejects_everything_else(label):
    if label in TYPE_LABELS:
        return
    with pytest.raises(InputError):
        NfqType.parse(label)


def test_question_rejects_blank_text():
    with pytest.raises(InputError):
        Question(id="q", text="   ")


def test_passage_rejects_empty_text():
    with pytest.raises(InputError):
        Passage(id="p", title="t", text="")


def test_typed_answer_requires_trace():
    with pytest.raises(InternalError):
        Answer(question_id="q", text="a", method=AnswerMethod.TYPED_RAG, trace=())
    ok = Answer("q", "a", AnswerMethod.LLM_ONLY, (TraceStep("generate", {}),))
    assert ok.trace[0].name == "generate"


def test_trace_step_name_vocabulary_is_closed():
    with pytest.raises(InternalError):
        TraceStep("frobnicate", {})


def test_qa_pair_requires_both_sides():
    with pytest.raises(InputError):
        QaPair(question="q", answer="")


@given(
    st.text(min_size=1, max_size=40).filter(lambda s: s.strip()),
    st.sampled_from(TYPE_LABELS),
    st.one_of(st.none(), st.text(max_size=10)),
)
def test_question_round_trip(text, label, source):
    q = Question(id="q1", text=text, source=source, nfq_type=NfqType.parse(label))
    assert Question.from_dict(q.to_dict()) == q


@given(st.text(min_size=1, max_size=40), st.one_of(st.none(), st.floats(allow_nan=False)))
def test_passage_round_trip(text, score):
    p = Passage(id="p1", title="title", text=text, score=score)
    assert Passage.from_dict(p.to_dict()) == p


@given(st.sampled_from(list(AnswerMethod)), st.text(min_size=1, max_size=40))
def test_answer_round_trip(method, text):
    trace = (TraceStep("retrieve", {"ids": ["a"]}), TraceStep("generate", {"k": 1}))
    a = Answer(question_id="q", text=text, method=method, trace=trace)
    assert Answer.from_dict(a.to_dict()) == a


@given(st.text(min_size=1, max_size=20), st.text(min_size=1, max_size=20))
def test_qa_pair_round_trip(q, a):
    pair = QaPair(question=q, answer=a)
    assert QaPair.from_dict(pair.to_dict()) == pair
