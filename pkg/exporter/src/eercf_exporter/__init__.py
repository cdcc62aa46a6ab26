"""Feature exporter for the eercf retrieval engine.

Encodes video clips (video files or frame directories) and their captions
into the engine's binary dataset format — ``videos.bin``, ``texts.bin``,
``manifest.json`` — using either a pretrained dual-encoder checkpoint or a
parameter-free offline codebook encoder.
"""

from .backends import (
    ClipBackend,
    CodebookBackend,
    FeatureBackend,
    make_backend,
    transformer_backend_reason,
)
from .codebook import COLOR_PROTOTYPES, caption_feature, color_weights, direction, region_feature
from .config import HUB_IDS, MAX_FRAMES, MODEL_VARIANTS, ExportConfig, ModelVariant
from .container import (
    FORMAT_VERSION,
    MAGIC,
    MANIFEST_FILE,
    TEXTS_FILE,
    VIDEOS_FILE,
    write_manifest,
    write_texts,
    write_videos,
)
from .errors import (
    BackendUnavailable,
    CaptionsError,
    DecodeError,
    EmptyExport,
    ExporterError,
    FormatError,
    InvalidParams,
    ValidationError,
)
from .export import ExportReport, SkippedItem, load_captions, run_export
from .media import (
    IMAGE_EXTENSIONS,
    VIDEO_EXTENSIONS,
    ClipSource,
    discover_clips,
    load_clip_frames,
    uniform_indices,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # config
    "ExportConfig",
    "ModelVariant",
    "MODEL_VARIANTS",
    "HUB_IDS",
    "MAX_FRAMES",
    # codebook
    "COLOR_PROTOTYPES",
    "direction",
    "color_weights",
    "region_feature",
    "caption_feature",
    # backends
    "FeatureBackend",
    "CodebookBackend",
    "ClipBackend",
    "make_backend",
    "transformer_backend_reason",
    # media
    "ClipSource",
    "VIDEO_EXTENSIONS",
    "IMAGE_EXTENSIONS",
    "discover_clips",
    "uniform_indices",
    "load_clip_frames",
    # container
    "MAGIC",
    "FORMAT_VERSION",
    "VIDEOS_FILE",
    "TEXTS_FILE",
    "MANIFEST_FILE",
    "write_videos",
    "write_texts",
    "write_manifest",
    # export
    "SkippedItem",
    "ExportReport",
    "load_captions",
    "run_export",
    # errors
    "ExporterError",
    "ValidationError",
    "InvalidParams",
    "BackendUnavailable",
    "FormatError",
    "CaptionsError",
    "DecodeError",
    "EmptyExport",
]
