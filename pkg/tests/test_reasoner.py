from __future__ import annotations

import random

import pytest

from ari.actions import ActionParseError
from ari.candidates import enumerate_candidates, filter_candidates
from ari.actions import StepEnv
from ari.llm import LLMGateway, ScriptedLLM
from ari.memory import Episode
from ari.reasoner import (
    ANSWERED,
    LLM_ERROR,
    NO_CANDIDATES,
    PARSE_FAILURE,
    STEP_CAP,
    ReasonerConfig,
    TraceStep,
    answer_question,
    build_action_prompt,
    parse_decision,
    trace_to_episode,
)
from ari.tkg import TemporalKG

from conftest import random_kg, scripted
from replay import available_actions, never_answering, replay_exemplars, section

Q1 = "In which month did the City Mayor of Philippines first praise Ona?"
Q1_ANCHORS = ["City_Mayor_(Philippines)", "Ona"]


def test_q1_trace(mini_kg, exemplar_actions):
    tr = answer_question(Q1, Q1_ANCHORS, mini_kg, None, scripted(exemplar_actions["q1"]))
    assert tr.outcome == ANSWERED
    assert tr.n_steps == 3
    assert tr.ranked_answers[0] == "2014-10"
    assert [s.action for s in tr.steps] == [f"${a}$" for a in exemplar_actions["q1"]]
    assert tr.steps[0].result == "entities = [('City_Mayor_(Philippines)', '2014-10-07')]"


def test_exemplar_replays(mini_kg):
    records, traces, _ = replay_exemplars(mini_kg)
    assert [t.answer for t in traces] == ["2014-10", "Angela_Merkel", "2008-04-18", "South_Korea"]
    assert [t.n_steps for t in traces] == [3, 5, 3, 2]
    assert all(t.outcome == ANSWERED for t in traces)


def test_step_cap(mini_kg):
    tr = answer_question(Q1, Q1_ANCHORS, mini_kg, None, never_answering(0))
    assert tr.outcome == STEP_CAP and tr.n_steps == 5
    assert tr.ranked_answers == []


def test_step_cap_configurable(mini_kg):
    tr = answer_question(Q1, Q1_ANCHORS, mini_kg, None, never_answering(0), ReasonerConfig(max_steps=2))
    assert tr.n_steps == 2


def test_no_candidates():
    kg = TemporalKG([], entities=["Lonely"])
    tr = answer_question("who?", ["Lonely"], kg, None, ScriptedLLM([]))
    assert tr.outcome == NO_CANDIDATES and tr.n_steps == 0


def test_parse_failure_after_retries(mini_kg):
    llm = LLMGateway(ScriptedLLM(["I think the answer is X"] * 3))
    tr = answer_question(Q1, Q1_ANCHORS, mini_kg, None, llm)
    assert tr.outcome == PARSE_FAILURE
    attempts = tr.steps[0].attempts
    assert len(attempts) == 3
    assert "no action" in attempts[0].error
    assert "Feedback:" in attempts[1].prompt and "no action" in attempts[1].prompt


def test_retry_recovers(mini_kg, exemplar_actions):
    llm = LLMGateway(ScriptedLLM(["hmm", *[f"${a}$" for a in exemplar_actions["q1"]]]))
    tr = answer_question(Q1, Q1_ANCHORS, mini_kg, None, llm)
    assert tr.outcome == ANSWERED and tr.n_steps == 3


def test_out_of_menu_rejected(mini_kg):
    llm = LLMGateway(ScriptedLLM(["$getTime(Nobody,Nothing,Noone)$"] * 3))
    tr = answer_question(Q1, Q1_ANCHORS, mini_kg, None, llm)
    assert tr.outcome == PARSE_FAILURE
    assert "not one of the available actions" in tr.steps[0].attempts[0].error


def test_llm_error_encoded(mini_kg):
    tr = answer_question(Q1, Q1_ANCHORS, mini_kg, None, ScriptedLLM([]))
    assert tr.outcome == LLM_ERROR and tr.steps[0].result.startswith("error:")


def test_never_exceeds_cap():
    rng = random.Random(8)
    for seed in range(30):
        kg = random_kg(rng, 30)
        if not kg.facts:
            continue
        anchor = kg.facts[0].head
        tr = answer_question("who did it first?", [anchor], kg, None, never_answering(seed), ReasonerConfig(max_steps=3))
        assert tr.n_steps <= 3


def _cset(kg, k=20):
    return filter_candidates(enumerate_candidates(kg, StepEnv(), ["Japan", "Iran"]), "q", kg, StepEnv(), k)


def test_prompt_methodology_slot(mini_kg):
    p = build_action_prompt("Q?", "M", [], _cset(mini_kg))
    assert "Methodology: M\n" in p
    empty = build_action_prompt("Q?", None, [], _cset(mini_kg))
    assert "Methodology: \n(end of methodology)" in empty


def test_prompt_markers(mini_kg):
    p = build_action_prompt("Q?", "M", [], _cset(mini_kg))
    for marker in ("Question:", "Methodology:", "Previous Actions:", "Available Actions:", "Action:", "Reason:"):
        assert marker in p
    assert "enclose the selected action in $" in p


def test_prompt_seven_candidates(mini_kg):
    cset = _cset(mini_kg, k=7)
    assert len(cset) == 7
    p = build_action_prompt("Q?", None, [], cset)
    assert available_actions(p) == cset.texts()


def test_prompt_history(mini_kg):
    steps = [TraceStep(0, [], action="$getTime(A,r,B)$", result="entities = []")]
    p = build_action_prompt("Q?", None, steps, _cset(mini_kg))
    hist = section(p, "Previous Actions:\n", "(end of previous actions)")
    assert hist == "Action 0: $getTime(A,r,B)$\nResponse 0: entities = []\n"


def test_prompt_requires_candidates(mini_kg):
    from ari.candidates import CandidateSet

    with pytest.raises(ValueError):
        build_action_prompt("Q?", None, [], CandidateSet(0))


def test_parse_decision():
    assert parse_decision("Action: $answer(X)$ Reason: done").function == "answer"
    with pytest.raises(ActionParseError, match="no action"):
        parse_decision("I think the answer is X")
    with pytest.raises(ActionParseError, match="getTime"):
        parse_decision("$getTime(A,B)$")


def test_config_validation():
    with pytest.raises(ValueError):
        ReasonerConfig(max_steps=0)
    with pytest.raises(ValueError):
        ReasonerConfig(top_k=0)


def test_ranked_answers_entities(mini_kg, exemplar_actions):
    tr = answer_question(
        "Who wanted to cooperate with Japan in November, 2005?", ["Japan"], mini_kg, None, scripted(exemplar_actions["q5"])
    )
    assert tr.ranked_answers == ["South_Korea", "Government_Official_(Russia)"]


def test_trace_to_episode(mini_kg, exemplar_actions):
    tr = answer_question(Q1, Q1_ANCHORS, mini_kg, None, scripted(exemplar_actions["q1"]))
    ep = trace_to_episode(tr, ["2014-10"], "time", "month")
    assert isinstance(ep, Episode) and ep.correct is True
    assert [s.index for s in ep.steps] == [0, 1, 2]
    assert trace_to_episode(tr, ["2015"], "time", "year").correct is False
    assert trace_to_episode(tr).correct is None
