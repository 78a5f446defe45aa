import json
import random
import re
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noteloop.core import Finish, Observation, ReasoningStep, Search, TokenLedger, TokenUsage, Trace
from noteloop.errors import ContractError, JudgeParseError, QualityParseError
from noteloop.evaluation import (
    ItemResult,
    Report,
    aggregate,
    item_result,
    judge_answer,
    judge_reasoning_quality,
    normalize_answer,
    parse_judge_output,
    parse_quality_output,
    repeat_summary,
    token_f1,
)

from cases import JUDGE_CASES, QUALITY_CASES
from support import entry, gateway, item


def oracle_normalize(s):
    s = s.lower()
    s = "".join(ch for ch in s if ch not in set(string.punctuation))
    s = re.sub(r"\b(a|an|the)\b", " ", s)
    return " ".join(s.split())


def oracle_f1(pred, gold):
    p, g = oracle_normalize(pred).split(), oracle_normalize(gold).split()
    if not p and not g:
        return 1.0
    remaining = list(g)
    overlap = 0
    for tok in p:
        if tok in remaining:
            remaining.remove(tok)
            overlap += 1
    if overlap == 0:
        return 0.0
    prec, rec = overlap / len(p), overlap / len(g)
    return 2 * prec * rec / (prec + rec)


VOCAB = ["the", "a", "Notre", "Dame", "law", "school", "Paris,", "paris", "an", "Warsaw.", "1983", "madrid"]


def random_pairs(n, seed=7):
    rnd = random.Random(seed)
    for _ in range(n):
        pred = " ".join(rnd.choices(VOCAB, k=rnd.randint(0, 6)))
        gold = " ".join(rnd.choices(VOCAB, k=rnd.randint(0, 6)))
        yield pred, gold


def test_f1_matches_oracle_on_random_pairs():
    for pred, gold in random_pairs(200):
        assert token_f1(pred, [gold]) == oracle_f1(pred, gold)


@pytest.mark.parametrize("pred,golds,want", [
    ("Warsaw", ["Warsaw"], 1.0),
    ("Paris", ["Warsaw"], 0.0),
    ("Notre Dame Law School", ["Notre Dame"], 2 / 3),
    ("Paris", ["Warsaw", "paris."], 1.0),
    ("", ["the"], 1.0),
    ("", ["Warsaw"], 0.0),
])
def test_f1_examples(pred, golds, want):
    assert token_f1(pred, golds) == pytest.approx(want, abs=1e-12)


def test_f1_needs_golds():
    with pytest.raises(ContractError):
        token_f1("x", [])


@pytest.mark.parametrize("text,want", [
    ("The Walls and Bridges", "walls and bridges"),
    ("Atlético Madrid.", "atlético madrid"),
    ("", ""),
])
def test_normalize_examples(text, want):
    assert normalize_answer(text) == want


words = st.lists(st.sampled_from(VOCAB), max_size=6).map(" ".join)


@given(words, words)
def test_f1_is_symmetric_and_bounded(a, b):
    f = token_f1(a, [b])
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(token_f1(b, [a]), abs=1e-12)
    same = sorted(normalize_answer(a).split()) == sorted(normalize_answer(b).split())
    assert (f == 1.0) == same


@given(st.text())
def test_normalize_is_idempotent(text):
    once = normalize_answer(text)
    assert normalize_answer(once) == once


@pytest.mark.parametrize("text,want", JUDGE_CASES)
def test_judge_parser(text, want):
    if want is None:
        with pytest.raises(JudgeParseError):
            parse_judge_output(text)
    else:
        assert parse_judge_output(text).correct is want


def test_judge_explanation_is_captured():
    v = parse_judge_output("Explanation: both name\nthe same school.\nDecision: TRUE")
    assert v.explanation == "both name\nthe same school."


@pytest.mark.parametrize("text,want", QUALITY_CASES)
def test_quality_parser(text, want):
    if want is None:
        with pytest.raises(QualityParseError):
            parse_quality_output(text)
    else:
        q = parse_quality_output(text)
        assert (q.efficiency, q.redundancy, q.coherence) == want


def test_judge_answer_fills_prompt():
    gw = gateway(entry("Explanation: ok\nDecision: TRUE", "Mr. Church / Church"))
    v = judge_answer("Which film?", "Mr Church", ["Mr. Church", "Church"], gw)
    assert v.correct
    req = gw.requests[0]
    assert req.model == "gpt-4o" and req.temperature == 0.0
    assert "Which film?" in req.prompt_text and "<<" not in req.prompt_text


def sample_trace():
    t = Trace("q1", "react", "notes")
    t.steps = [
        ReasoningStep(1, "raw", "look it up", "Diego Costa", Search("Diego Costa", "which club?"),
                      Observation(1, (), "(Result 1) Diego Costa - Atlético Madrid", False)),
        ReasoningStep(2, "raw", "done", action=Finish("Atlético Madrid")),
    ]
    t.final_answer = "Atlético Madrid"
    t.terminated_by = "finish_action"
    return t


def test_quality_prompt_holds_the_whole_chain():
    gw = gateway(entry('{"Criterion 1": 5, "Criterion 2": 4, "Criterion 3": 5}', "Question: Which club?"))
    q = judge_reasoning_quality(sample_trace(), "Which club?", gw)
    assert (q.efficiency, q.redundancy, q.coherence) == (5, 4, 5)
    prompt = gw.requests[0].prompt_text
    for part in ("Thought 1: look it up", "Action 1: search[Diego Costa; which club?]",
                 "Observation 1: (Result 1) Diego Costa - Atlético Madrid", "Action 2: finish[Atlético Madrid]"):
        assert part in prompt


def result(f1=1.0, judge=None, main=(0, 0), notes=(0, 0), steps=1, failed=False, **kw):
    return ItemResult(kw.pop("item_id", "x"), "p", f1, steps, TokenLedger(TokenUsage(*main), TokenUsage(*notes)),
                      judge_correct=judge, failed=failed, **kw)


def test_aggregate_examples():
    rows = aggregate([result(0.5, True, (100, 10)), result(1.0, False, (300, 30)), result(1.0)]).rows
    assert len(rows) == 1
    r = rows[0]
    assert r.f1_pct == pytest.approx(83.3) and r.judge_pct == 50.0
    assert (r.judged, r.unjudged) == (2, 1)
    assert r.main_in == pytest.approx(400 / 3)
    two = aggregate([result(0.5, main=(100, 10)), result(1.0, main=(300, 30))]).rows[0]
    assert two.f1_pct == 75.0 and two.main_in == 200 and two.judge_pct is None


def test_aggregate_groups_and_excludes_failures():
    rep = aggregate([
        result(1.0, dataset="frames"),
        result(0.0, dataset="frames", failed=True, main=(999, 9)),
        result(0.5, dataset="hotpotqa", mode="baseline"),
    ])
    keys = [(r.dataset, r.mode) for r in rep.rows]
    assert keys == [("frames", "notes"), ("hotpotqa", "baseline")]
    assert rep.rows[0].n == 1 and rep.rows[0].failed == 1 and rep.rows[0].main_in == 0
    with pytest.raises(ContractError):
        aggregate([])


def test_item_result_from_traces():
    r = item_result(sample_trace(), item())
    assert r.f1 == 1.0 and r.steps == 1 and not r.failed
    t = sample_trace()
    t.terminated_by, t.final_answer = "fatal_error", None
    assert item_result(t, item()).failed


def test_item_result_bounds():
    with pytest.raises(ContractError):
        result(1.5)
    with pytest.raises(ContractError):
        result(quality={"efficiency": 6, "redundancy": 0, "coherence": 0})


results_st = st.lists(
    st.builds(
        result,
        f1=st.floats(0, 1),
        judge=st.sampled_from([None, True, False]),
        main=st.tuples(st.integers(0, 10**6), st.integers(0, 10**4)),
        notes=st.tuples(st.integers(0, 10**6), st.integers(0, 10**4)),
        steps=st.integers(0, 10),
        failed=st.booleans(),
        dataset=st.sampled_from(["frames", "hotpotqa"]),
        mode=st.sampled_from(["notes", "baseline"]),
    ),
    min_size=1, max_size=12,
)


@settings(max_examples=60, deadline=None)
@given(results_st)
def test_report_recomputes_from_serialized_results(results):
    report = aggregate(results, {"k": 5})
    lines = [json.dumps(r.to_dict()) for r in results]
    again = aggregate([ItemResult.from_dict(json.loads(x)) for x in lines], {"k": 5})
    assert again == report
    assert Report.from_dict(json.loads(report.to_json())) == report


def test_repeat_summary_uses_sample_stdev():
    a = aggregate([result(1.0)])
    b = aggregate([result(0.5)])
    s = repeat_summary([a, b])[0]
    assert s["runs"] == 2 and s["f1_pct"] == 75.0
    assert s["f1_pct_std"] == pytest.approx(35.355, abs=1e-3)
    assert s["judge_pct"] is None
