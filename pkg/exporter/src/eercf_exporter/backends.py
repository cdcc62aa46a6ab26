"""Feature backends: how frames and captions become vectors.

Two implementations share one protocol.  The transformer backend wraps a
pretrained dual-encoder checkpoint (local path or cached hub id) and is the
intended production path.  The codebook backend is a parameter-free offline
encoder that needs no weights at all: pixels and words are projected through
the shared color vocabulary in :mod:`.codebook`.  Both emit the same geometry
(frames T x D, patches T x P x D, text D) so the rest of the pipeline never
cares which one produced the numbers.
"""

from __future__ import annotations

import os
from typing import Protocol

import numpy as np
from PIL import Image

from .codebook import caption_feature, region_feature
from .config import HUB_IDS, ExportConfig
from .errors import BackendUnavailable, InvalidParams


class FeatureBackend(Protocol):
    """Anything that can embed a clip's frames and a caption."""

    name: str

    def encode_video(self, frames: list[Image.Image]) -> tuple[np.ndarray, np.ndarray]:
        """Return (frame features T x D, patch features T x P x D), float64."""
        ...

    def encode_text(self, caption: str) -> np.ndarray:
        """Return the caption feature (D,), float64."""
        ...


class CodebookBackend:
    """Parameter-free offline encoder over the shared color codebook.

    Each frame is resized to the variant's input size; the whole image yields
    the frame feature and each grid tile yields one patch feature, so patch
    vectors genuinely carry spatial information.  Deterministic by
    construction — no weights, no RNG state, no I/O.
    """

    def __init__(self, config: ExportConfig):
        self._variant = config.variant
        self.name = f"codebook/{self._variant.patch_grid}x{self._variant.patch_grid}"

    def _pixels(self, frame: Image.Image) -> np.ndarray:
        size = self._variant.image_size
        resized = frame.convert("RGB").resize((size, size), Image.BILINEAR)
        return np.asarray(resized, dtype=np.float64)

    def encode_video(self, frames: list[Image.Image]) -> tuple[np.ndarray, np.ndarray]:
        if not frames:
            raise InvalidParams("cannot encode a clip with zero frames")
        dim = self._variant.dim
        grid = self._variant.patch_grid
        tile = self._variant.image_size // grid
        frame_feats = np.empty((len(frames), dim), dtype=np.float64)
        patch_feats = np.empty((len(frames), grid * grid, dim), dtype=np.float64)
        for t, frame in enumerate(frames):
            pixels = self._pixels(frame)
            frame_feats[t] = region_feature(pixels, dim)
            for row in range(grid):
                for col in range(grid):
                    block = pixels[row * tile:(row + 1) * tile, col * tile:(col + 1) * tile]
                    patch_feats[t, row * grid + col] = region_feature(block, dim)
        return frame_feats, patch_feats

    def encode_text(self, caption: str) -> np.ndarray:
        return caption_feature(caption, self._variant.dim)


class ClipBackend:
    """Pretrained dual-encoder backend (torch + transformers).

    Frame features are the projected pooled tokens; patch tokens go through
    the same final layer norm and visual projection, so all three feature
    levels live in one 512-dimensional space.  Weights resolve from an
    explicit checkpoint path, then the ``EERCF_CLIP_CHECKPOINT`` environment
    variable, then the variant's hub id — the hub id is only read from the
    local cache, never downloaded.
    """

    def __init__(self, config: ExportConfig):
        source = (
            config.checkpoint
            or os.environ.get("EERCF_CLIP_CHECKPOINT")
            or HUB_IDS[config.model]
        )
        from_local_path = os.path.exists(source)
        kwargs = {} if from_local_path else {"local_files_only": True}
        try:
            import torch
            from transformers import AutoProcessor, CLIPModel
        except ImportError as exc:
            raise BackendUnavailable(
                f"model {config.model!r} needs torch and transformers "
                f"(install the 'clip' extra): {exc}"
            ) from exc
        try:
            self._model = CLIPModel.from_pretrained(source, **kwargs)
            self._processor = AutoProcessor.from_pretrained(source, **kwargs)
        except Exception as exc:
            raise BackendUnavailable(
                f"cannot load {config.model!r} weights from {source!r}: {exc}. "
                "Pass --checkpoint (or set EERCF_CLIP_CHECKPOINT) to a local "
                "checkpoint directory, or use --model codebook for the "
                "weight-free offline encoder."
            ) from exc
        self._torch = torch
        self._model.eval()
        self._variant = config.variant
        self.name = f"{config.model}:{source}"

    def encode_video(self, frames: list[Image.Image]) -> tuple[np.ndarray, np.ndarray]:
        if not frames:
            raise InvalidParams("cannot encode a clip with zero frames")
        inputs = self._processor(images=frames, return_tensors="pt")
        with self._torch.no_grad():
            vision = self._model.vision_model(pixel_values=inputs["pixel_values"])
            frame_feats = self._model.visual_projection(vision.pooler_output)
            tokens = self._model.vision_model.post_layernorm(vision.last_hidden_state[:, 1:, :])
            patch_feats = self._model.visual_projection(tokens)
        expected = self._variant.patches_per_frame
        if patch_feats.shape[1] != expected:
            raise InvalidParams(
                f"checkpoint produces {patch_feats.shape[1]} patch tokens per frame, "
                f"variant {self._variant.name!r} expects {expected}"
            )
        return (
            frame_feats.cpu().numpy().astype(np.float64),
            patch_feats.cpu().numpy().astype(np.float64),
        )

    def encode_text(self, caption: str) -> np.ndarray:
        inputs = self._processor(text=[caption], return_tensors="pt", padding=True, truncation=True)
        with self._torch.no_grad():
            feats = self._model.get_text_features(
                input_ids=inputs["input_ids"], attention_mask=inputs["attention_mask"]
            )
        return feats[0].cpu().numpy().astype(np.float64)


def make_backend(config: ExportConfig) -> FeatureBackend:
    """Construct the backend the config asks for.

    Raises:
        BackendUnavailable: if the transformer backend's dependencies or
            weights cannot be resolved in this environment.
    """
    if config.model == "codebook":
        return CodebookBackend(config)
    return ClipBackend(config)


def transformer_backend_reason(config: ExportConfig) -> str | None:
    """Why the transformer backend is unavailable, or None if it loads."""
    if config.model == "codebook":
        return None
    try:
        ClipBackend(config)
    except BackendUnavailable as exc:
        return str(exc)
    return None


__all__ = [
    "FeatureBackend",
    "CodebookBackend",
    "ClipBackend",
    "make_backend",
    "transformer_backend_reason",
]
