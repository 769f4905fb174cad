from __future__ import annotations

import json
import random
from pathlib import Path
from typing import List

import pytest

from ari.llm import LLMGateway, ScriptedLLM
from ari.temporal import Timestamp
from ari.tkg import TemporalFact, TemporalKG, load_facts

FIXTURES = Path(__file__).parent / "fixtures"

ENTITIES = ["A", "B", "C", "D", "E", "F"]
RELATIONS = ["r1", "r2", "r3"]


def random_timestamp(rng: random.Random) -> Timestamp:
    year = rng.choice([2004, 2005, 2006])
    g = rng.random()
    if g < 0.15:
        return Timestamp(year)
    if g < 0.4:
        return Timestamp(year, rng.randint(1, 12))
    return Timestamp(year, rng.randint(1, 12), rng.randint(1, 28))


def random_fact(rng: random.Random, intervals: bool = True) -> TemporalFact:
    start = random_timestamp(rng)
    end = start
    if intervals and rng.random() < 0.2:
        later = random_timestamp(rng)
        if later.sort_key >= start.sort_key:
            end = later
    return TemporalFact(rng.choice(ENTITIES), rng.choice(RELATIONS), rng.choice(ENTITIES), start, end)


def random_kg(rng: random.Random, max_facts: int = 50) -> TemporalKG:
    return TemporalKG([random_fact(rng) for _ in range(rng.randint(0, max_facts))])


@pytest.fixture
def mini_kg() -> TemporalKG:
    return load_facts(FIXTURES / "mini_kg.tsv")


@pytest.fixture
def exemplar_actions() -> dict:
    return json.loads((FIXTURES / "exemplar_actions.json").read_text())


def scripted(actions: List[str], pad: int = 0) -> LLMGateway:
    responses = [f"Action:\n${a}$\nReason: ok" for a in actions] + ["no idea"] * pad
    return LLMGateway(ScriptedLLM(responses))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
