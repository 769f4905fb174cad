"""Synthetic episodes, blobs and selection cases for the clustering tests."""

from __future__ import annotations

import random
from typing import List, Tuple

import numpy as np

from ari.embedding import HashingEmbedder
from ari.memory import Episode, EpisodeStep, MethodologyCluster

import oracles

TOPICS = ["visit", "criticize", "cooperate", "praise", "sanction", "negotiate", "host", "accuse", "threaten", "appeal"]


def synthetic_episode(i: int, rng: random.Random, embedder=None, labeled: bool = True) -> Episode:
    embedder = embedder or HashingEmbedder()
    topic = TOPICS[i % len(TOPICS)]
    q = f"Who did {topic} Country_{rng.randint(0, 50)} first in {rng.randint(2005, 2015)} (#{i})?"
    steps = tuple(
        EpisodeStep(j, (f"$getTime(X,{topic},Y)$",), f"$getTime(X,{topic},Y)$", "entities = []")
        for j in range(rng.randint(1, 3))
    )
    gold = ("Country_1",) if labeled else ()
    return Episode(
        question=q,
        embedding=tuple(float(v) for v in embedder.embed(q)),
        steps=steps,
        final_answer="Country_1" if i % 3 else "Country_2",
        gold_answers=gold,
        correct=(i % 3 != 0) if labeled else None,
    )


def two_blobs(seed: int, n: int = 200, dim: int = 16, spread: float = 0.05) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    centers = np.zeros((2, dim))
    centers[0, 0] = 1.0
    centers[1, 1] = 1.0
    truth = rng.integers(0, 2, size=n)
    x = centers[truth] + rng.normal(scale=spread, size=(n, dim))
    return x, truth


def agreement(labels: np.ndarray, truth: np.ndarray) -> float:
    direct = float(np.mean(labels == truth))
    return max(direct, 1.0 - direct)


def selection_case(rng: np.random.Generator, dim: int = 256, k: int = 10) -> List[MethodologyCluster]:
    return [MethodologyCluster(j, rng.normal(size=dim), [], f"M{j}") for j in range(k)]


def brute_force_select(question_vec, clusters) -> int:
    best_id, best = None, None
    for c in clusters:
        s = oracles.cosine(question_vec, c.centroid)
        if best is None or s > best or (s == best and c.cluster_id < best_id):
            best_id, best = c.cluster_id, s
    return best_id
