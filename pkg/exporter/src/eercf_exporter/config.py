"""Export configuration: model variant, frame count, dataset naming.

The model variant fixes the output geometry.  Both transformer variants emit
512-dimensional features; they differ in how finely each frame is tiled into
patch tokens (32-pixel tiles give a 7x7 grid, 16-pixel tiles a 14x14 grid).
The ``codebook`` variant is a parameter-free offline encoder that mimics the
``vitb32`` geometry so downstream shape contracts are identical.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidParams


@dataclass(frozen=True)
class ModelVariant:
    """Output geometry of one encoder family."""

    name: str
    patch_grid: int
    dim: int
    image_size: int

    @property
    def patches_per_frame(self) -> int:
        return self.patch_grid * self.patch_grid


MODEL_VARIANTS: dict[str, ModelVariant] = {
    "vitb32": ModelVariant(name="vitb32", patch_grid=7, dim=512, image_size=224),
    "vitb16": ModelVariant(name="vitb16", patch_grid=14, dim=512, image_size=224),
    "codebook": ModelVariant(name="codebook", patch_grid=7, dim=512, image_size=224),
}

#: Hub identifiers used when no explicit checkpoint path is given.  They only
#: resolve from a local cache; this tool never downloads weights itself.
HUB_IDS: dict[str, str] = {
    "vitb32": "openai/clip-vit-base-patch32",
    "vitb16": "openai/clip-vit-base-patch16",
}

#: Records store frame/patch counts as unsigned 16-bit integers.
MAX_FRAMES = 0xFFFF


@dataclass(frozen=True)
class ExportConfig:
    """Validated parameters for one export run.

    Attributes:
        model: one of :data:`MODEL_VARIANTS` (default ``vitb32``).
        frames: number of frames sampled uniformly per clip (default 12).
        dataset: dataset name written into the manifest.
        checkpoint: optional local path or hub id for transformer weights;
            falls back to the ``EERCF_CLIP_CHECKPOINT`` environment variable,
            then to the variant's default hub id (local cache only).
    """

    model: str = "vitb32"
    frames: int = 12
    dataset: str = "export"
    checkpoint: str | None = None

    def __post_init__(self) -> None:
        if self.model not in MODEL_VARIANTS:
            raise InvalidParams(
                f"unknown model {self.model!r}; choose from {sorted(MODEL_VARIANTS)}"
            )
        if not isinstance(self.frames, int) or self.frames < 1:
            raise InvalidParams(f"frames must be a positive integer, got {self.frames!r}")
        if self.frames > MAX_FRAMES:
            raise InvalidParams(f"frames must be <= {MAX_FRAMES}, got {self.frames}")
        if not self.dataset:
            raise InvalidParams("dataset name must be non-empty")

    @property
    def variant(self) -> ModelVariant:
        return MODEL_VARIANTS[self.model]

    @property
    def dim(self) -> int:
        return self.variant.dim

    @property
    def patches_per_frame(self) -> int:
        return self.variant.patches_per_frame


__all__ = ["ExportConfig", "ModelVariant", "MODEL_VARIANTS", "HUB_IDS", "MAX_FRAMES"]
