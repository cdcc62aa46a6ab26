"""Shared color codebook for the parameter-free offline encoder.

Both modalities meet in one fixed vocabulary: every word owns a deterministic
unit direction derived from a hash of its spelling, and a small table of
canonical colors maps pixel statistics onto the *same* directions as the
matching color words.  The video path sees only pixels and the text path only
words — they align exactly when a clip's dominant colors match the caption's
color words, with no learned parameters anywhere.
"""

from __future__ import annotations

import hashlib
import re
from functools import lru_cache

import numpy as np

from .errors import DecodeError, InvalidParams

#: Canonical color prototypes (RGB).  Chosen to be far apart pairwise so the
#: soft assignment below is sharply peaked for solid-colored content.
COLOR_PROTOTYPES: dict[str, tuple[int, int, int]] = {
    "red": (220, 45, 45),
    "green": (55, 180, 75),
    "blue": (50, 95, 220),
    "yellow": (235, 220, 65),
    "orange": (240, 150, 50),
    "magenta": (205, 60, 205),
    "cyan": (70, 200, 210),
    "purple": (130, 60, 185),
    "brown": (140, 90, 50),
    "white": (235, 235, 235),
    "gray": (128, 128, 128),
    "black": (25, 25, 25),
}

#: Soft-assignment bandwidth in RGB units; weights fall off as 1/(1+(d/20)^2).
_ASSIGN_BANDWIDTH = 20.0

_WORD_RE = re.compile(r"[a-z]+")


@lru_cache(maxsize=4096)
def direction(word: str, dim: int) -> np.ndarray:
    """Deterministic unit vector owned by ``word``.

    The seed is the first 8 bytes of SHA-256 of the lowercased word, so the
    mapping is stable across processes, platforms, and library versions.
    """
    if dim < 1:
        raise InvalidParams(f"dimension must be positive, got {dim}")
    seed = int.from_bytes(hashlib.sha256(word.lower().encode("utf-8")).digest()[:8], "little")
    vec = np.random.default_rng(seed).standard_normal(dim)
    vec /= np.linalg.norm(vec)
    vec.setflags(write=False)
    return vec


def color_weights(mean_rgb: np.ndarray) -> dict[str, float]:
    """Soft assignment of an average color onto the canonical prototypes.

    Weights are inverse-quadratic in RGB distance and normalized to sum to 1;
    an exact prototype match dominates all other weights by several orders of
    magnitude.
    """
    rgb = np.asarray(mean_rgb, dtype=np.float64)
    if rgb.shape != (3,):
        raise InvalidParams(f"expected an RGB triple, got shape {rgb.shape}")
    raw = {
        word: 1.0 / (1.0 + float(np.sum((rgb - np.asarray(proto, dtype=np.float64)) ** 2))
                     / _ASSIGN_BANDWIDTH**2)
        for word, proto in COLOR_PROTOTYPES.items()
    }
    total = sum(raw.values())
    return {word: weight / total for word, weight in raw.items()}


def region_feature(pixels: np.ndarray, dim: int) -> np.ndarray:
    """Unit feature for an image region: color-weighted blend of word directions.

    Args:
        pixels: H x W x 3 array (any numeric dtype, values on the 0-255 scale).
        dim: output dimensionality.
    """
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidParams(f"expected a non-empty H x W x 3 region, got shape {arr.shape}")
    weights = color_weights(arr.reshape(-1, 3).mean(axis=0))
    feat = np.zeros(dim, dtype=np.float64)
    for word, weight in weights.items():
        feat += weight * direction(word, dim)
    norm = float(np.linalg.norm(feat))
    if norm < 1e-12:
        # A perfectly cancelling blend is effectively colorless.
        return direction("gray", dim).copy()
    return feat / norm


def caption_feature(caption: str, dim: int) -> np.ndarray:
    """Unit feature for a caption: bag of word directions.

    Words from the color vocabulary dominate: when at least one is present,
    all other words are ignored, making alignment with the pixel path robust
    to filler text.  Captions with no vocabulary word fall back to a bag over
    every word, so arbitrary text still embeds deterministically.
    """
    tokens = _WORD_RE.findall(caption.lower())
    if not tokens:
        raise DecodeError(f"caption has no words: {caption!r}")
    recognized = [t for t in tokens if t in COLOR_PROTOTYPES]
    basis = recognized or tokens
    feat = np.zeros(dim, dtype=np.float64)
    for token in basis:
        feat += direction(token, dim)
    norm = float(np.linalg.norm(feat))
    if norm < 1e-12:
        raise DecodeError(f"caption words cancel out: {caption!r}")
    return feat / norm


__all__ = [
    "COLOR_PROTOTYPES",
    "direction",
    "color_weights",
    "region_feature",
    "caption_feature",
]
