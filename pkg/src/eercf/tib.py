"""Parameter-free text-gated attention pooling over frame and patch features.

Given a text vector and a set of visual feature rows, the block computes a
temperature-scaled softmax over the raw dot products and returns the weighted
sum of the rows.  Applied to a video's frame rows it yields the
text-conditioned frame vector ``v_l2``; applied to all patch rows of all
frames jointly (one softmax over the flattened set, not per-frame) it yields
the text-conditioned patch vector ``v_l3``.

There is no learned state anywhere in this module: identical inputs always
produce identical outputs.  Softmax logits are max-subtracted and all
accumulation runs in 64-bit — the default patch temperature of 0.01 scales
dot products by 100, which overflows a naive 32-bit exponential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding_store import VideoRecord, normalize
from .errors import EmptyInput, InvalidConfig, InvalidParams


@dataclass(frozen=True)
class TibConfig:
    """Softmax temperatures for the two fine-grained levels.

    Lower temperature sharpens the attention: at the patch level the default
    0.01 makes the pooling nearly an argmax over patches, while the frame
    level default 0.1 blends several frames.
    """

    temperature_frame: float = 0.1
    temperature_patch: float = 0.01

    def __post_init__(self) -> None:
        if not (self.temperature_frame > 0 and np.isfinite(self.temperature_frame)):
            raise InvalidConfig(f"frame temperature must be positive, got {self.temperature_frame}")
        if not (self.temperature_patch > 0 and np.isfinite(self.temperature_patch)):
            raise InvalidConfig(f"patch temperature must be positive, got {self.temperature_patch}")


def _as_features(features: np.ndarray) -> np.ndarray:
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidParams(f"expected an M x D feature matrix, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptyInput("attention pooling needs at least one feature row")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams("feature matrix contains non-finite values")
    return arr


def _as_text(text: np.ndarray, dim: int) -> np.ndarray:
    vec = np.asarray(text, dtype=np.float64)
    if vec.shape != (dim,):
        raise InvalidParams(f"text vector shape {vec.shape} does not match feature dim {dim}")
    if not np.all(np.isfinite(vec)):
        raise InvalidParams("text vector contains non-finite values")
    return vec


def tib_weights(features: np.ndarray, text: np.ndarray, temperature: float) -> np.ndarray:
    """Attention weights of ``text`` over the rows of ``features``.

    Computes ``softmax(features @ text / temperature)`` with the maximum
    logit subtracted before exponentiation.  The result is a probability
    vector: nonnegative, summing to 1.

    Args:
        features: M x D matrix of raw (unnormalized) feature rows.
        text: length-D text vector.
        temperature: positive softmax temperature.

    Raises:
        EmptyInput: if M = 0.
        InvalidParams: on shape mismatch, non-finite input, or a
            non-positive temperature.
    """
    arr = _as_features(features)
    vec = _as_text(text, arr.shape[1])
    if not (temperature > 0 and np.isfinite(temperature)):
        raise InvalidParams(f"temperature must be positive, got {temperature}")
    logits = arr @ vec / float(temperature)
    logits -= logits.max()
    weights = np.exp(logits)
    weights /= weights.sum()
    return weights


def tib_aggregate(features: np.ndarray, text: np.ndarray, temperature: float) -> np.ndarray:
    """Weighted sum of feature rows under :func:`tib_weights`.

    The output lies in the convex hull of the input rows and is *not*
    normalized; callers that need a similarity vector normalize it.
    """
    arr = _as_features(features)
    weights = tib_weights(arr, text, temperature)
    return weights @ arr


def v_l2(video: VideoRecord, text: np.ndarray, config: TibConfig = TibConfig()) -> np.ndarray:
    """Text-conditioned frame-level video vector: pooled frame rows, unit norm."""
    return normalize(tib_aggregate(video.frames, text, config.temperature_frame))


def v_l3(video: VideoRecord, text: np.ndarray, config: TibConfig = TibConfig()) -> np.ndarray:
    """Text-conditioned patch-level video vector.

    One softmax runs over all ``T * P`` patch rows of the video jointly, so a
    single strongly matching patch anywhere in the video can dominate the
    aggregation regardless of which frame carries it.
    """
    flat = video.patches.reshape(-1, video.dim)
    return normalize(tib_aggregate(flat, text, config.temperature_patch))
