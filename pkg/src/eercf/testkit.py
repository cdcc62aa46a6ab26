"""Synthetic galleries with planted relevance, and a brute-force oracle.

The generator draws a latent unit concept vector per video and builds frame
and patch features as jittered copies of it; each query text is its
ground-truth video's concept plus Gaussian noise.  Three distractor modes
control how the coarse and fine rankings diverge:

* ``none`` — every video is a clean jittered concept; with zero query noise
  the ground truth wins every stage outright.
* ``coarse-confusable`` — each query gets a distractor video whose *mean*
  feature sits closer to the query than the true video's mean, while the
  true video hides one strongly matching frame (and its patches).  Coarse
  recall alone picks the distractor; text-gated reranking recovers the truth.
* ``patch-noise`` — each query gets a crowd of "villain" videos whose mean
  feature is background-level noise but which carry one planted frame (and
  matching patches) aligned with the query concept, while the true video is
  heavily jittered.  Deep candidate lists let villains outscore the truth on
  fine-grained channels; a tight recall cut filters most of them out first,
  so widening top-k can *hurt* the metrics.

:func:`brute_force_rank` is the scoring oracle: an independently written,
pure-Python naive rescorer of the entire gallery, sharing no code with the
engine's ranking path.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .embedding_store import Gallery, Manifest, TextRecord, VideoRecord
from .errors import EmptyGallery, InvalidConfig
from .ranking import RankedList, SearchConfig

MODES = ("none", "coarse-confusable", "patch-noise")

# Internal jitter scales (relative to a unit concept vector), per mode.
_PLAIN_FRAME_JITTER = 0.08
_PLAIN_PATCH_JITTER = 0.15
_CC_DISTRACTOR_ALIGNMENT = 0.45  # cosine between distractor mean and concept
_CC_FRAME_JITTER = 0.05
_CC_PATCH_JITTER = 0.10
_PN_TRUE_JITTER = 4.0            # heavy jitter: truth is weak on every channel
_PN_VILLAIN_FRAME_JITTER = 0.05
_PN_VILLAIN_PATCH_JITTER = 0.10
_PN_PLANT_JITTER = 0.05
_PN_VIDEOS_PER_CONCEPT = 14      # 1 true + ~12 villains + background share
_PN_BACKGROUND_SHARE = 0.10


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of one synthetic dataset; identical seeds reproduce bytes."""

    n_videos: int
    n_queries: int
    dim: int = 32
    frames: int = 4
    patches_per_frame: int = 3
    seed: int = 0
    noise: float = 0.1
    mode: str = "none"

    def __post_init__(self) -> None:
        for name in ("n_videos", "n_queries", "dim", "frames", "patches_per_frame"):
            value = getattr(self, name)
            if not (isinstance(value, int) and value >= 1):
                raise InvalidConfig(f"{name} must be a positive integer, got {value!r}")
        if self.dim < 2:
            raise InvalidConfig("dim must be at least 2")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise InvalidConfig(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not (self.noise >= 0 and np.isfinite(self.noise)):
            raise InvalidConfig(f"noise must be a nonnegative real, got {self.noise!r}")
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "coarse-confusable" and self.n_videos < 2:
            raise InvalidConfig("coarse-confusable mode needs at least 2 videos")


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            return v / norm


def _perturb(rng: np.random.Generator, base: np.ndarray, scale: float) -> np.ndarray:
    """Unit vector at controlled angular distance: normalize(base + scale*u)."""
    if scale == 0.0:
        return base.copy()
    v = base + scale * _unit(rng, base.shape[0])
    return v / np.linalg.norm(v)


def _video(
    rng: np.random.Generator,
    video_id: str,
    config: SynthConfig,
    frame_dirs: Iterable[np.ndarray],
    patch_dirs: Iterable[np.ndarray],
    frame_jitter: float,
    patch_jitter: float,
) -> VideoRecord:
    """Assemble a record from per-frame base directions plus jitter."""
    frames = np.stack([_perturb(rng, d, frame_jitter) for d in frame_dirs])
    patches = np.stack(
        [
            np.stack([_perturb(rng, d, patch_jitter) for _ in range(config.patches_per_frame)])
            for d in patch_dirs
        ]
    )
    return VideoRecord(id=video_id, frames=frames.astype(np.float32),
                       patches=patches.astype(np.float32))


def _orthogonal_blend(rng: np.random.Generator, concept: np.ndarray, cosine: float) -> np.ndarray:
    """Unit vector at an exact cosine from ``concept``."""
    raw = _unit(rng, concept.shape[0])
    ortho = raw - (raw @ concept) * concept
    ortho /= np.linalg.norm(ortho)
    return cosine * concept + math.sqrt(1.0 - cosine**2) * ortho


def generate(config: SynthConfig) -> tuple[Gallery, list[TextRecord], Manifest]:
    """Build a synthetic dataset with planted ground truth.

    Returns the gallery, the query texts, and a manifest whose ``extra``
    echoes the generator configuration under ``synth_config``.
    """
    rng = np.random.default_rng(config.seed)
    builders = {
        "none": _generate_plain,
        "coarse-confusable": _generate_coarse_confusable,
        "patch-noise": _generate_patch_noise,
    }
    videos, concepts_per_query, gt_positions = builders[config.mode](rng, config)

    texts: list[TextRecord] = []
    pairs: list[tuple[str, str]] = []
    for q in range(config.n_queries):
        concept = concepts_per_query[q]
        feature = _perturb(rng, concept, config.noise)
        text = TextRecord(id=f"t{q:04d}", feature=feature.astype(np.float32))
        texts.append(text)
        pairs.append((text.id, videos[gt_positions[q]].id))

    gallery = Gallery(videos)
    manifest = Manifest(
        dataset=f"synthetic-{config.mode}",
        dim=config.dim,
        pairs=tuple(pairs),
        extra={
            "counts": {"videos": len(videos), "texts": len(texts)},
            "synth_config": {**asdict(config), "rng": "numpy-pcg64"},
        },
    )
    return gallery, texts, manifest


def _generate_plain(
    rng: np.random.Generator, config: SynthConfig
) -> tuple[list[VideoRecord], list[np.ndarray], list[int]]:
    concepts = [_unit(rng, config.dim) for _ in range(config.n_videos)]
    videos = [
        _video(
            rng, f"v{i:04d}", config,
            frame_dirs=[concepts[i]] * config.frames,
            patch_dirs=[concepts[i]] * config.frames,
            frame_jitter=_PLAIN_FRAME_JITTER,
            patch_jitter=_PLAIN_PATCH_JITTER,
        )
        for i in range(config.n_videos)
    ]
    gt = [q % config.n_videos for q in range(config.n_queries)]
    return videos, [concepts[g] for g in gt], gt


def _generate_coarse_confusable(
    rng: np.random.Generator, config: SynthConfig
) -> tuple[list[VideoRecord], list[np.ndarray], list[int]]:
    n_concepts = max(1, min(config.n_queries, config.n_videos // 2))
    videos: list[VideoRecord] = []
    concepts: list[np.ndarray] = []
    for j in range(n_concepts):
        concept = _unit(rng, config.dim)
        background = _unit(rng, config.dim)
        concepts.append(concept)
        # True video: background frames hiding one strongly matching frame,
        # whose patches also carry the concept.
        match_at = int(rng.integers(config.frames))
        dirs = [concept if t == match_at else background for t in range(config.frames)]
        videos.append(
            _video(rng, f"v{2 * j:04d}", config, dirs, dirs,
                   _CC_FRAME_JITTER, _CC_PATCH_JITTER)
        )
        # Distractor: every frame moderately aligned with the concept, so its
        # mean beats the true video's diluted mean but no frame matches well.
        mean_dir = _orthogonal_blend(rng, concept, _CC_DISTRACTOR_ALIGNMENT)
        videos.append(
            _video(rng, f"v{2 * j + 1:04d}", config, [mean_dir] * config.frames,
                   [mean_dir] * config.frames, _CC_FRAME_JITTER, _CC_PATCH_JITTER)
        )
    for i in range(2 * n_concepts, config.n_videos):
        background = _unit(rng, config.dim)
        videos.append(
            _video(rng, f"v{i:04d}", config, [background] * config.frames,
                   [background] * config.frames, _CC_FRAME_JITTER, _CC_PATCH_JITTER)
        )
    gt = [2 * (q % n_concepts) for q in range(config.n_queries)]
    return videos, [concepts[q % n_concepts] for q in range(config.n_queries)], gt


def _generate_patch_noise(
    rng: np.random.Generator, config: SynthConfig
) -> tuple[list[VideoRecord], list[np.ndarray], list[int]]:
    n_concepts = max(1, min(config.n_queries, config.n_videos // _PN_VIDEOS_PER_CONCEPT))
    n_background = min(config.n_videos - n_concepts, round(_PN_BACKGROUND_SHARE * config.n_videos))
    n_villains = config.n_videos - n_concepts - n_background

    concepts = [_unit(rng, config.dim) for _ in range(n_concepts)]
    videos: list[VideoRecord] = []
    for j, concept in enumerate(concepts):
        # Truth is weak everywhere: heavy jitter on frames and patches.
        videos.append(
            _video(rng, f"v{j:04d}", config, [concept] * config.frames,
                   [concept] * config.frames, _PN_TRUE_JITTER, _PN_TRUE_JITTER)
        )
    for k in range(n_villains):
        concept = concepts[k % n_concepts]
        background = _unit(rng, config.dim)
        plant_at = int(rng.integers(config.frames))
        frames = np.stack(
            [
                concept.copy() if t == plant_at
                else _perturb(rng, background, _PN_VILLAIN_FRAME_JITTER)
                for t in range(config.frames)
            ]
        )
        patches = np.stack(
            [
                np.stack(
                    [
                        _perturb(
                            rng,
                            concept if t == plant_at else background,
                            _PN_PLANT_JITTER if t == plant_at else _PN_VILLAIN_PATCH_JITTER,
                        )
                        for _ in range(config.patches_per_frame)
                    ]
                )
                for t in range(config.frames)
            ]
        )
        videos.append(
            VideoRecord(
                id=f"v{n_concepts + k:04d}",
                frames=frames.astype(np.float32),
                patches=patches.astype(np.float32),
            )
        )
    for i in range(n_background):
        background = _unit(rng, config.dim)
        videos.append(
            _video(rng, f"v{n_concepts + n_villains + i:04d}", config,
                   [background] * config.frames, [background] * config.frames,
                   _PN_VILLAIN_FRAME_JITTER, _PN_VILLAIN_PATCH_JITTER)
        )
    gt = [q % n_concepts for q in range(config.n_queries)]
    return videos, [concepts[q % n_concepts] for q in range(config.n_queries)], gt


# ---------------------------------------------------------------------------
# Brute-force oracle (independent code path: plain loops, no numpy scoring)
# ---------------------------------------------------------------------------

def _dot(a: list[float], b: list[float]) -> float:
    total = 0.0
    for x, y in zip(a, b):
        total += x * y
    return total


def _unit_list(v: list[float]) -> list[float]:
    norm = math.sqrt(sum(x * x for x in v))
    return [x / norm for x in v]


def _attend(rows: list[list[float]], text: list[float], temperature: float) -> list[float]:
    logits = [_dot(row, text) / temperature for row in rows]
    peak = max(logits)
    raw = [math.exp(z - peak) for z in logits]
    total = sum(raw)
    weights = [w / total for w in raw]
    out = [0.0] * len(rows[0])
    for weight, row in zip(weights, rows):
        for d, value in enumerate(row):
            out[d] += weight * value
    return out


def brute_force_rank(
    text: TextRecord, gallery: Gallery, config: SearchConfig = SearchConfig()
) -> RankedList:
    """Naive two-stage ranking; the reference the engine must match.

    Re-derives every quantity from the raw frame/patch payload with plain
    Python loops and 64-bit floats: coarse recall of the ``top_k`` best
    mean-pooled vectors, then softmax attention pooling at both temperatures,
    weighted fusion, and a descending sort — ties always broken by gallery
    position.
    """
    if len(gallery) == 0:
        raise EmptyGallery("cannot rank an empty gallery")
    query = [float(x) for x in text.feature]
    w1, w2, w3 = config.fusion_weights

    coarse: list[tuple[float, int]] = []
    pooled_units: dict[int, list[float]] = {}
    for position, video in enumerate(gallery):
        frame_rows = [[float(x) for x in row] for row in video.frames]
        dim = len(query)
        pooled = [sum(row[d] for row in frame_rows) / len(frame_rows) for d in range(dim)]
        unit = _unit_list(pooled)
        pooled_units[position] = unit
        coarse.append((_dot(query, unit), position))
    coarse.sort(key=lambda item: (-item[0], item[1]))
    candidates = [position for _, position in coarse[: config.top_k]]

    scored: list[tuple[float, int, str]] = []
    for position in candidates:
        video = gallery.videos[position]
        frame_rows = [[float(x) for x in row] for row in video.frames]
        patch_rows = [
            [float(x) for x in patch]
            for frame_patches in video.patches
            for patch in frame_patches
        ]
        s1 = _dot(query, pooled_units[position])
        s2 = _dot(query, _unit_list(_attend(frame_rows, query, config.tib.temperature_frame)))
        s3 = _dot(query, _unit_list(_attend(patch_rows, query, config.tib.temperature_patch)))
        scored.append((w1 * s1 + w2 * s2 + w3 * s3, position, video.id))
    scored.sort(key=lambda item: (-item[0], item[1]))
    entries = tuple((video_id, score) for score, _, video_id in scored)
    return RankedList(entries=entries, stage="final")
