"""Episode history, question clustering and methodology induction/selection."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .embedding import Embedder, cosine_similarity, default_embedder, normalize
from .llm import METHODOLOGY_INDUCTION, CompletionRequest
from .prompts import DEFAULT_TASK_DEFINITION, METHODOLOGY_TEMPLATE

logger = logging.getLogger(__name__)

DEFAULT_CLUSTERS = 10
DEFAULT_HISTORY_SIZE = 200
MAX_KMEANS_ITER = 100


class HistoryError(Exception):
    pass


class StorageError(HistoryError):
    pass


class ClusteringConfigError(HistoryError, ValueError):
    pass


class InductionError(HistoryError):
    pass


@dataclass(frozen=True)
class EpisodeStep:
    index: int
    candidates: Tuple[str, ...]  # canonical action texts presented at this step
    action: str
    result: str


@dataclass(frozen=True)
class Episode:
    question: str
    embedding: Tuple[float, ...]
    steps: Tuple[EpisodeStep, ...]
    final_answer: str = ""
    gold_answers: Tuple[str, ...] = ()
    correct: Optional[bool] = None

    def validate(self) -> None:
        for i, s in enumerate(self.steps):
            if s.index != i:
                raise ValueError(f"step indices must run 0..n-1; got {s.index} at position {i}")
        if bool(self.gold_answers) != (self.correct is not None):
            raise ValueError("correct must be set exactly when gold answers are present")

    def to_record(self) -> dict:
        return {
            "question": self.question,
            "embedding": list(self.embedding),
            "steps": [
                {"index": s.index, "candidates": list(s.candidates), "action": s.action, "result": s.result}
                for s in self.steps
            ],
            "final_answer": self.final_answer,
            "gold_answers": list(self.gold_answers),
            "correct": self.correct,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Episode":
        return cls(
            question=rec["question"],
            embedding=tuple(float(x) for x in rec["embedding"]),
            steps=tuple(
                EpisodeStep(s["index"], tuple(s["candidates"]), s["action"], s["result"]) for s in rec["steps"]
            ),
            final_answer=rec.get("final_answer", ""),
            gold_answers=tuple(rec.get("gold_answers", ())),
            correct=rec.get("correct"),
        )

    @property
    def id(self) -> str:
        blob = json.dumps(self.to_record(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def transcript(self) -> str:
        lines = [f"Question: {self.question}"]
        for s in self.steps:
            lines.append(f"Action {s.index}: {s.action}")
            lines.append(f"Response {s.index}: {s.result}")
        if self.gold_answers:
            lines.append(f"Gold answer: {' | '.join(self.gold_answers)}")
        return "\n".join(lines)


class HistoryStore:
    """Append-only episode log, one JSON record per line. ``path=None`` keeps it in memory."""

    def __init__(self, path: Union[str, Path, None] = None):
        self.path = Path(path) if path else None
        self._episodes: Dict[str, Episode] = {}
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        ep = Episode.from_record(json.loads(line))
                    except (ValueError, KeyError) as exc:
                        raise StorageError(f"{self.path}:{lineno}: bad episode record ({exc})") from None
                    self._episodes.setdefault(ep.id, ep)

    def __len__(self) -> int:
        return len(self._episodes)

    def __contains__(self, episode_id: str) -> bool:
        return episode_id in self._episodes

    def ids(self) -> List[str]:
        return list(self._episodes)

    def get(self, episode_id: str) -> Episode:
        return self._episodes[episode_id]

    def episodes(self) -> List[Episode]:
        return list(self._episodes.values())

    def record(self, ep: Episode) -> str:
        ep.validate()
        eid = ep.id
        if eid in self._episodes:
            return eid
        if self.path is not None:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(ep.to_record(), ensure_ascii=False, sort_keys=True) + "\n")
            except OSError as exc:
                raise StorageError(f"cannot append to {self.path}: {exc}") from exc
        self._episodes[eid] = ep
        return eid


def record_episode(store: HistoryStore, ep: Episode) -> str:
    return store.record(ep)


# ------------------------------------------------------------------ k-means


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    sse_history: List[float]
    n_iter: int
    converged: bool


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(free)) if free.size else int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return x[chosen].copy()


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.sum((x[:, None, :] - c[None, :, :]) ** 2, axis=2)


def _sphere(c: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(c, axis=1, keepdims=True)
    return np.divide(c, norms, out=np.zeros_like(c), where=norms > 0)


def kmeans(x: np.ndarray, k: int, seed: int = 0, max_iter: int = MAX_KMEANS_ITER) -> KMeansResult:
    """Spherical k-means with k-means++ seeding.

    Rows of ``x`` are L2-normalised and centroids are projected back onto the
    unit sphere after each mean update, so nearest-by-Euclidean equals
    nearest-by-cosine and the within-cluster SSE never increases.
    """
    x = _sphere(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    if k < 1 or n < k:
        raise ClusteringConfigError(f"need at least k={k} points to cluster, got {n}")
    rng = np.random.default_rng(seed)
    centroids = _sphere(_kmeans_pp(x, k, rng))
    labels = np.argmin(_sq_dists(x, centroids), axis=1)
    sse = [float(np.sum((x - centroids[labels]) ** 2))]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = np.empty_like(centroids)
        for j in range(k):
            members = x[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
            else:
                new[j] = centroids[j]
        centroids = _sphere(new)
        d = _sq_dists(x, centroids)
        new_labels = np.argmin(d, axis=1)
        # refill empty clusters with the worst-served point
        for j in range(k):
            if not np.any(new_labels == j):
                far = int(np.argmax(d[np.arange(n), new_labels]))
                centroids[j] = x[far]
                new_labels[far] = j
                d = _sq_dists(x, centroids)
        sse.append(float(np.sum((x - centroids[new_labels]) ** 2)))
        if np.array_equal(new_labels, labels):
            converged = True
            labels = new_labels
            break
        labels = new_labels
    return KMeansResult(labels=labels, centroids=centroids, sse_history=sse, n_iter=it, converged=converged)


# ---------------------------------------------------------------- clusters


@dataclass
class MethodologyCluster:
    cluster_id: int
    centroid: np.ndarray
    member_ids: List[str]
    methodology: Optional[str] = None

    def set_methodology(self, text: str) -> None:
        if self.methodology is not None and self.methodology != text:
            raise InductionError(f"cluster {self.cluster_id} already has a methodology")
        self.methodology = text


def _matrix(episodes: Sequence[Episode]) -> np.ndarray:
    return np.array([ep.embedding for ep in episodes], dtype=np.float64)


def cluster_history(store: HistoryStore, k: int = DEFAULT_CLUSTERS, seed: int = 0) -> List[MethodologyCluster]:
    ids = store.ids()
    if len(ids) < k:
        raise ClusteringConfigError(f"cannot form k={k} clusters from {len(ids)} episodes")
    res = kmeans(_matrix([store.get(i) for i in ids]), k, seed=seed)
    if not res.converged:
        logger.warning("k-means stopped at the %d-iteration cap before assignments settled", MAX_KMEANS_ITER)
    return [
        MethodologyCluster(j, res.centroids[j], [ids[i] for i in np.flatnonzero(res.labels == j)])
        for j in range(k)
    ]


def global_cluster(store: HistoryStore) -> MethodologyCluster:
    """A single cluster holding the whole history."""
    ids = store.ids()
    if not ids:
        raise ClusteringConfigError("cannot build a global cluster from an empty history")
    centroid = normalize(_matrix([store.get(i) for i in ids]).mean(axis=0))
    return MethodologyCluster(0, centroid, ids)


def _select_within_budget(transcripts: List[Tuple[int, str, str]], budget: int) -> List[Tuple[int, str, str]]:
    # (slot, id, text); shortest first until the shared budget runs out
    picked, used = [], 0
    for slot, eid, text in sorted(transcripts, key=lambda t: (len(t[2]), t[0], t[1])):
        if used + len(text) > budget:
            if not picked:
                picked.append((slot, eid, text[:budget]))
            break
        picked.append((slot, eid, text))
        used += len(text)
    return picked


def build_methodology_prompt(
    correct: Sequence[Episode],
    incorrect: Sequence[Episode],
    task_definition: str = DEFAULT_TASK_DEFINITION,
    char_budget: int = 12000,
) -> str:
    pool = [(0, ep.id, ep.transcript()) for ep in correct] + [(1, ep.id, ep.transcript()) for ep in incorrect]
    kept = _select_within_budget(pool, char_budget)
    order = {(0, ep.id): i for i, ep in enumerate(correct)}
    order.update({(1, ep.id): i for i, ep in enumerate(incorrect)})
    kept.sort(key=lambda t: (t[0], order[t[0], t[1]]))

    def block(slot: int) -> str:
        texts = [t for s, _, t in kept if s == slot]
        if not texts:
            return "(none)"
        return "\n\n".join(f"Sample {i + 1}:\n{t}" for i, t in enumerate(texts))

    return METHODOLOGY_TEMPLATE.format(
        task_definition=task_definition, correct_examples=block(0), incorrect_examples=block(1)
    )


def induce_methodology(
    cluster: MethodologyCluster,
    store: HistoryStore,
    llm,
    task_definition: str = DEFAULT_TASK_DEFINITION,
    char_budget: int = 12000,
) -> str:
    """Ask the model for one abstract methodology covering the cluster; stored verbatim."""
    members = [store.get(i) for i in cluster.member_ids]
    correct = [ep for ep in members if ep.correct is True]
    incorrect = [ep for ep in members if ep.correct is False]
    if not correct and not incorrect:
        raise InductionError(f"cluster {cluster.cluster_id} has no labeled episodes")
    prompt = build_methodology_prompt(correct, incorrect, task_definition, char_budget)
    try:
        text = llm.complete(CompletionRequest(prompt, tag=METHODOLOGY_INDUCTION, max_tokens=1024))
    except Exception as exc:
        raise InductionError(f"methodology induction failed for cluster {cluster.cluster_id}: {exc}") from exc
    cluster.set_methodology(text)
    return text


def select_methodology(
    clusters: Sequence[MethodologyCluster], question: str, embedder: Optional[Embedder] = None
) -> Tuple[int, str]:
    """Cluster whose centroid is most cosine-similar to the question; ties go to the lowest id."""
    if not clusters:
        raise ValueError("no clusters to select from")
    qv = (embedder or default_embedder()).embed(question)
    best = None
    for c in sorted(clusters, key=lambda c: c.cluster_id):
        if c.methodology is None:
            raise ValueError(f"cluster {c.cluster_id} has no induced methodology")
        s = cosine_similarity(qv, c.centroid)
        if best is None or s > best[0]:
            best = (s, c)
    return best[1].cluster_id, best[1].methodology


class MethodologyBank:
    """Induced clusters plus an optional single global methodology, ready for lookup."""

    def __init__(
        self,
        clusters: Sequence[MethodologyCluster] = (),
        global_methodology: Optional[str] = None,
        embedder: Optional[Embedder] = None,
    ):
        self.clusters = list(clusters)
        self.global_methodology = global_methodology
        self.embedder = embedder or default_embedder()

    def select(self, question: str) -> Tuple[int, str]:
        return select_methodology(self.clusters, question, self.embedder)

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for c in self.clusters:
                rec = {
                    "cluster_id": c.cluster_id,
                    "centroid": [float(v) for v in c.centroid],
                    "members": c.member_ids,
                    "methodology": c.methodology,
                }
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
            if self.global_methodology is not None:
                rec = {"cluster_id": "global", "methodology": self.global_methodology}
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path], embedder: Optional[Embedder] = None) -> "MethodologyBank":
        clusters, global_text = [], None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec["cluster_id"] == "global":
                    global_text = rec["methodology"]
                    continue
                clusters.append(
                    MethodologyCluster(
                        int(rec["cluster_id"]),
                        np.array(rec["centroid"], dtype=np.float64),
                        list(rec.get("members", [])),
                        rec.get("methodology"),
                    )
                )
        return cls(clusters, global_text, embedder)


def write_cluster_report(
    path: Union[str, Path], clusters: Sequence[MethodologyCluster], store: HistoryStore
) -> int:
    """CSV of (episode_id, cluster_id, similarity); returns rows written."""
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode_id", "cluster_id", "similarity"])
        for c in sorted(clusters, key=lambda c: c.cluster_id):
            for eid in c.member_ids:
                sim = cosine_similarity(np.array(store.get(eid).embedding), c.centroid)
                w.writerow([eid, c.cluster_id, f"{sim:.6f}"])
                rows += 1
    return rows
