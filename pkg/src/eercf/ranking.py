"""Two-stage retrieval: coarse recall, fused fine-grained reranking, metrics.

Stage one scores every gallery video by the dot product between the query
text vector and the video's coarse vector, keeping the ``top_k`` candidates.
Stage two rescores only those candidates with a weighted sum of three cosine
similarities — coarse, text-conditioned frame-level, and text-conditioned
patch-level — and sorts by the fused score.  Ties always break toward the
lower gallery position, so rankings are reproducible across platforms and
thread counts.

Queries are independent, read-only operations over an immutable gallery;
:func:`evaluate` may fan them out across a thread pool and merges results by
query index, so worker count never changes the metrics.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np

from .embedding_store import Gallery, TextRecord
from .errors import (
    EmptyGallery,
    EmptyInput,
    InvalidConfig,
    InvalidParams,
    MissingGroundTruth,
)
from .tib import TibConfig, v_l2, v_l3

#: Environment variable capping the number of evaluation workers.
THREADS_ENV_VAR = "EERCF_THREADS"


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the two-stage search.

    ``fusion_weights`` are the (coarse, frame, patch) similarity weights;
    they are normalized to sum to 1 at construction, so only their ratio
    matters.  The defaults (top_k=50, weights 5:5:1, temperatures 0.1/0.01)
    make a flagless run use the reference configuration.
    """

    top_k: int = 50
    fusion_weights: tuple[float, float, float] = (5 / 11, 5 / 11, 1 / 11)
    tib: TibConfig = field(default_factory=TibConfig)

    def __post_init__(self) -> None:
        if not (isinstance(self.top_k, int) and self.top_k >= 1):
            raise InvalidConfig(f"top_k must be a positive integer, got {self.top_k!r}")
        weights = np.asarray(self.fusion_weights, dtype=np.float64)
        if weights.shape != (3,) or not np.all(np.isfinite(weights)):
            raise InvalidConfig(f"fusion_weights must be three finite reals, got {self.fusion_weights!r}")
        if np.any(weights < 0):
            raise InvalidConfig(f"fusion_weights must be nonnegative, got {self.fusion_weights!r}")
        total = float(weights.sum())
        if total <= 0:
            raise InvalidConfig("fusion_weights must not all be zero")
        object.__setattr__(self, "fusion_weights", tuple(float(w) / total for w in weights))


@dataclass(frozen=True)
class RankedList:
    """Ordered (video_id, score) pairs from one stage of one query."""

    entries: tuple[tuple[str, float], ...]
    stage: Literal["recall", "final"]

    def __post_init__(self) -> None:
        ids = [video_id for video_id, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise InvalidParams("ranked list contains duplicate video ids")
        scores = [score for _, score in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise InvalidParams("ranked list scores must be non-increasing")

    def ids(self) -> list[str]:
        return [video_id for video_id, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Metrics:
    """Recall@{1,5,10} in percent, plus their arithmetic mean."""

    r_at_1: float
    r_at_5: float
    r_at_10: float
    mean: float = field(init=False)

    def __post_init__(self) -> None:
        values = (self.r_at_1, self.r_at_5, self.r_at_10)
        if not all(0.0 <= v <= 100.0 for v in values):
            raise InvalidParams(f"recall percentages must lie in [0, 100], got {values}")
        if not (self.r_at_1 <= self.r_at_5 <= self.r_at_10):
            raise InvalidParams(f"recall must be non-decreasing in depth, got {values}")
        object.__setattr__(self, "mean", (self.r_at_1 + self.r_at_5 + self.r_at_10) / 3.0)

    @classmethod
    def from_ranks(cls, ranks: Sequence[int | None]) -> "Metrics":
        """Build metrics from 1-based ground-truth ranks (None = not retrieved)."""
        if not ranks:
            raise EmptyInput("cannot compute metrics over zero queries")
        total = len(ranks)

        def recall_at(j: int) -> float:
            hits = sum(1 for r in ranks if r is not None and r <= j)
            return 100.0 * hits / total

        return cls(r_at_1=recall_at(1), r_at_5=recall_at(5), r_at_10=recall_at(10))

    def as_dict(self) -> dict[str, float]:
        return {"r_at_1": self.r_at_1, "r_at_5": self.r_at_5,
                "r_at_10": self.r_at_10, "mean": self.mean}


def _ordered(scores: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Indices sorting by descending score, ties by ascending gallery position."""
    return np.lexsort((positions, -scores))


def recall_topk(text: TextRecord, gallery: Gallery, k: int) -> RankedList:
    """Stage one: the ``k`` highest-scoring videos by coarse similarity.

    ``k`` is clamped to the gallery size.

    Raises:
        EmptyGallery: if the gallery has no videos.
        InvalidConfig: if ``k < 1``.
    """
    if len(gallery) == 0:
        raise EmptyGallery("cannot recall from an empty gallery")
    if k < 1:
        raise InvalidConfig(f"k must be >= 1, got {k}")
    scores = gallery.coarse_matrix @ text.feature.astype(np.float64)
    order = _ordered(scores, np.arange(len(gallery)))[: min(k, len(gallery))]
    entries = tuple((gallery.videos[i].id, float(scores[i])) for i in order)
    return RankedList(entries=entries, stage="recall")


def fused_score(text: TextRecord, video_id: str, gallery: Gallery, config: SearchConfig) -> float:
    """Weighted sum of the three unit-vector similarities for one candidate."""
    video = gallery.get(video_id)
    query = text.feature.astype(np.float64)
    w1, w2, w3 = config.fusion_weights
    s1 = float(query @ video.v_l1)
    s2 = float(query @ v_l2(video, query, config.tib))
    s3 = float(query @ v_l3(video, query, config.tib))
    return w1 * s1 + w2 * s2 + w3 * s3


def rerank(
    text: TextRecord,
    candidates: RankedList,
    gallery: Gallery,
    config: SearchConfig = SearchConfig(),
) -> RankedList:
    """Stage two: rescore recall candidates by the fused similarity.

    Raises:
        UnknownId: if a candidate id is absent from the gallery.
    """
    ids = candidates.ids()
    if not ids:
        raise EmptyInput("cannot rerank an empty candidate list")
    scores = np.array([fused_score(text, video_id, gallery, config) for video_id in ids])
    positions = np.array([gallery.position(video_id) for video_id in ids])
    order = _ordered(scores, positions)
    entries = tuple((ids[i], float(scores[i])) for i in order)
    return RankedList(entries=entries, stage="final")


def search(text: TextRecord, gallery: Gallery, config: SearchConfig = SearchConfig()) -> RankedList:
    """Full two-stage retrieval for one query; final length min(top_k, N)."""
    return rerank(text, recall_topk(text, gallery, config.top_k), gallery, config)


def resolve_workers(requested: int) -> int:
    """Clamp a requested worker count to [1, EERCF_THREADS].

    Raises:
        InvalidConfig: if the request or the environment value is not a
            positive integer.
    """
    if not (isinstance(requested, int) and requested >= 1):
        raise InvalidConfig(f"worker count must be a positive integer, got {requested!r}")
    cap_raw = os.environ.get(THREADS_ENV_VAR)
    if cap_raw is None:
        return requested
    try:
        cap = int(cap_raw)
    except ValueError:
        raise InvalidConfig(f"{THREADS_ENV_VAR}={cap_raw!r} is not an integer") from None
    if cap < 1:
        raise InvalidConfig(f"{THREADS_ENV_VAR} must be >= 1, got {cap}")
    return min(requested, cap)


def search_many(
    texts: Sequence[TextRecord],
    gallery: Gallery,
    config: SearchConfig = SearchConfig(),
    workers: int = 1,
) -> list[RankedList]:
    """Run :func:`search` for every query; results are in input order."""
    workers = resolve_workers(workers)
    if workers == 1 or len(texts) <= 1:
        return [search(text, gallery, config) for text in texts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: search(t, gallery, config), texts))


def evaluate(
    texts: Sequence[TextRecord],
    ground_truth: Mapping[str, str],
    gallery: Gallery,
    config: SearchConfig = SearchConfig(),
    workers: int = 1,
) -> Metrics:
    """Text-to-video retrieval metrics over a query set.

    ``R@j`` is the percentage of queries whose ground-truth video appears in
    the top ``j`` entries of the final (reranked) list.  A ground truth that
    falls outside the recall stage's ``top_k`` is a miss — there is no
    fallback to the coarse ranking.

    Raises:
        MissingGroundTruth: if a query has no pairing, or its paired video is
            not in the gallery.
    """
    if not texts:
        raise EmptyInput("cannot evaluate zero queries")
    for text in texts:
        if text.id not in ground_truth:
            raise MissingGroundTruth(f"text {text.id!r} has no ground-truth pair")
        if ground_truth[text.id] not in gallery:
            raise MissingGroundTruth(
                f"ground-truth video {ground_truth[text.id]!r} for text {text.id!r} not in gallery"
            )
    results = search_many(texts, gallery, config, workers=workers)
    ranks: list[int | None] = []
    for text, result in zip(texts, results):
        target = ground_truth[text.id]
        rank = None
        for position, (video_id, _) in enumerate(result.entries, start=1):
            if video_id == target:
                rank = position
                break
        ranks.append(rank)
    return Metrics.from_ranks(ranks)


def to_json_line(text_id: str, ranked: RankedList) -> str:
    """One query's ranking as a JSON line: {"text_id", "ranking": [...]}."""
    payload = {
        "text_id": text_id,
        "ranking": [{"video_id": video_id, "score": score} for video_id, score in ranked.entries],
    }
    return json.dumps(payload)


__all__ = [
    "Metrics",
    "RankedList",
    "SearchConfig",
    "THREADS_ENV_VAR",
    "evaluate",
    "fused_score",
    "recall_topk",
    "rerank",
    "resolve_workers",
    "search",
    "search_many",
    "to_json_line",
]
