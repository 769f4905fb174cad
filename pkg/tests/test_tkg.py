from __future__ import annotations

import random

import pytest

from ari.temporal import Timestamp
from ari.tkg import (
    INCOMING,
    OUTGOING,
    AmbiguousEntity,
    EntityNotFound,
    FactLoadError,
    TemporalFact,
    TemporalKG,
    load_facts,
)

from conftest import ENTITIES, RELATIONS, random_kg, random_timestamp
from oracles import scan


def test_single_record(tmp_path):
    p = tmp_path / "kg.tsv"
    p.write_text("City_Mayor_(Philippines)\tPraise_or_endorse\tOna\t2014-10-07\n", encoding="utf-8")
    kg = load_facts(p)
    assert len(kg) == 1
    f = kg.facts[0]
    assert f.start == f.end == Timestamp.parse("2014-10-07")


def test_empty_file(tmp_path):
    p = tmp_path / "kg.tsv"
    p.write_text("")
    kg = load_facts(p)
    assert len(kg) == 0
    assert kg.match_facts(head="A") == []
    assert kg.match_facts(relation="r", time=Timestamp(2014)) == []


def test_duplicates_dropped_and_counted(tmp_path):
    p = tmp_path / "kg.tsv"
    p.write_text("A\tr\tB\t2014\nA\tr\tB\t2014\nA\tr\tC\t2014-01\t2015\n")
    kg = load_facts(p)
    stats = kg.stats()
    assert len(kg) == 2 and stats["duplicates_dropped"] == 1
    interval_fact = kg.match_facts(tail="C")[0]
    assert str(interval_fact.end) == "2015"


@pytest.mark.parametrize(
    "content,line,fragment",
    [
        ("A\tr\tB\t2014\nA\tr\n", 2, "fields"),
        ("A\tr\tB\t2014\nA\tr\tB\tyesterday\n", 2, "yesterday"),
        ("A\tr\tB\t2015\t2014\n", 1, ""),
    ],
)
def test_load_errors_name_line(tmp_path, content, line, fragment):
    p = tmp_path / "kg.tsv"
    p.write_text(content)
    with pytest.raises(FactLoadError) as err:
        load_facts(p)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)
    assert fragment in str(err.value)


def test_jsonl_format(tmp_path):
    p = tmp_path / "kg.jsonl"
    p.write_text('{"head": "A", "relation": "r", "tail": "B", "start": "2014-10-07"}\n')
    assert len(load_facts(p, "jsonl")) == 1


def test_index_equals_linear_scan():
    rng = random.Random(7)
    queries = 0
    while queries < 1000:
        kg = random_kg(rng, 50)
        for _ in range(25):
            q = {}
            while not any(k in q for k in ("head", "relation", "tail")):
                if rng.random() < 0.5:
                    q["head"] = rng.choice(ENTITIES + ["nope"])
                if rng.random() < 0.5:
                    q["relation"] = rng.choice(RELATIONS)
                if rng.random() < 0.4:
                    q["tail"] = rng.choice(ENTITIES)
            if rng.random() < 0.5:
                q["time"] = random_timestamp(rng)
            assert kg.match_facts(**q) == scan(kg.facts, **q), q
            queries += 1


def test_match_requires_binding():
    kg = TemporalKG([])
    with pytest.raises(ValueError):
        kg.match_facts(time=Timestamp(2014))


def test_month_constraint_matches_days(mini_kg):
    facts = mini_kg.match_facts(tail="Japan", relation="Express_intent_to_cooperate", time=Timestamp.parse("2005-11"))
    assert [f.head for f in facts] == ["Government_Official_(Russia)", "South_Korea"]


def test_unknown_head_empty(mini_kg):
    assert mini_kg.match_facts(head="Nobody") == []


def test_one_hop_examples():
    t = Timestamp(2014)
    kg = TemporalKG([TemporalFact("A", "r", "B", t, t)])
    assert kg.one_hop_subgraph("A").pairs == (("B", "r", OUTGOING),)
    assert kg.one_hop_subgraph("B").pairs == (("A", "r", INCOMING),)


def test_one_hop_unknown_vs_isolated():
    kg = TemporalKG([], entities=["Lonely"])
    assert len(kg.one_hop_subgraph("Lonely")) == 0
    with pytest.raises(EntityNotFound):
        kg.one_hop_subgraph("Ghost")


def test_one_hop_oracle_and_symmetry():
    rng = random.Random(3)
    for _ in range(200):
        kg = random_kg(rng, 50)
        for e in sorted(kg.entities):
            expected = set()
            for f in kg.facts:
                if f.head == e:
                    expected.add((f.tail, f.relation, OUTGOING))
                if f.tail == e:
                    expected.add((f.head, f.relation, INCOMING))
            pairs = kg.one_hop_subgraph(e).pairs
            assert set(pairs) == expected and len(pairs) == len(expected)
            assert list(pairs) == sorted(pairs, key=lambda p: (p[1], p[0], p[2]))
        for a in kg.entities:
            for b in kg.entities:
                assert (b in kg.one_hop_subgraph(a).neighbors()) == (a in kg.one_hop_subgraph(b).neighbors())


def test_resolve_entity(mini_kg):
    assert mini_kg.resolve_entity("City_Mayor_(Philippines)") == "City_Mayor_(Philippines)"
    assert mini_kg.resolve_entity("city mayor (philippines)") == "City_Mayor_(Philippines)"
    with pytest.raises(EntityNotFound):
        mini_kg.resolve_entity("Zzzz_Unknown")


def test_resolve_alias_and_ambiguity():
    t = Timestamp(2014)
    kg = TemporalKG(
        [TemporalFact("Barack_Obama", "r", "USA", t, t), TemporalFact("usa", "r", "X", t, t)],
        aliases={"President Obama": "Barack_Obama"},
    )
    assert kg.resolve_entity("president obama") == "Barack_Obama"
    with pytest.raises(AmbiguousEntity) as err:
        kg.resolve_entity("Usa")
    assert set(err.value.candidates) == {"USA", "usa"}


def test_alias_file(tmp_path):
    kg_path = tmp_path / "kg.tsv"
    kg_path.write_text("South_Korea\tr\tJapan\t2005\n")
    al = tmp_path / "aliases.tsv"
    al.write_text("South_Korea\tROK\n")
    kg = load_facts(kg_path, aliases=al)
    assert kg.resolve_entity("rok") == "South_Korea"


def test_immutable_indices(mini_kg):
    with pytest.raises(TypeError):
        mini_kg._by_head["X"] = ()
    with pytest.raises(AttributeError):
        mini_kg.facts.append(None)


def test_deterministic_order():
    rng = random.Random(11)
    facts = [f for f in random_kg(rng, 50).facts]
    shuffled = list(facts)
    random.Random(1).shuffle(shuffled)
    assert TemporalKG(facts).facts == TemporalKG(shuffled).facts
