"""Two-stage text-to-video retrieval with temperature-scaled feature fusion.

The package stores frame- and patch-level video features plus sentence-level
text features in a compact binary format, retrieves a candidate set with a
coarse pooled-vector pass, and reranks it with a fused fine-grained score.
It also ships the training losses (with analytic gradients and a finite-
difference checker), an analytic cost model for comparing retrieval methods,
a synthetic dataset generator with planted ground truth, and a brute-force
reference ranker used to validate the fast path.
"""

from .embedding_store import (
    FORMAT_VERSION,
    MAGIC,
    Gallery,
    Manifest,
    TextRecord,
    VideoRecord,
    load_dataset,
    load_gallery,
    load_manifest,
    load_texts,
    mean_pool,
    normalize,
    write_gallery,
)
from .errors import (
    BadMagic,
    BatchTooSmall,
    DegenerateChannel,
    EercfError,
    EmptyGallery,
    EmptyInput,
    FormatError,
    InvalidConfig,
    InvalidParams,
    MissingGroundTruth,
    ShapeMismatch,
    Truncated,
    UnknownId,
    ValidationError,
    VersionUnsupported,
    ZeroNorm,
)
from .flops import (
    PRESETS,
    REFERENCE_METHODS,
    CostModelInput,
    CostRow,
    MethodKind,
    flops_per_pair,
    flops_table,
    formula,
    preset_input,
    preset_table,
)
from .losses import (
    BatchFeatures,
    LossConfig,
    LossResult,
    grad_check,
    inter_loss,
    inter_op,
    intra_loss,
    intra_op,
    pearson_distance,
    total_loss,
    total_op,
)
from .ranking import (
    THREADS_ENV_VAR,
    Metrics,
    RankedList,
    SearchConfig,
    evaluate,
    fused_score,
    recall_topk,
    rerank,
    resolve_workers,
    search,
    search_many,
    to_json_line,
)
from .testkit import MODES, SynthConfig, brute_force_rank, generate
from .tib import TibConfig, tib_aggregate, tib_weights, v_l2, v_l3

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "EercfError", "ValidationError", "FormatError",
    "ZeroNorm", "EmptyInput", "ShapeMismatch", "EmptyGallery", "UnknownId",
    "MissingGroundTruth", "BatchTooSmall", "DegenerateChannel", "InvalidConfig",
    "InvalidParams", "BadMagic", "VersionUnsupported", "Truncated",
    # storage
    "MAGIC", "FORMAT_VERSION", "VideoRecord", "TextRecord", "Gallery", "Manifest",
    "normalize", "mean_pool", "write_gallery", "load_gallery", "load_texts",
    "load_manifest", "load_dataset",
    # attention
    "TibConfig", "tib_weights", "tib_aggregate", "v_l2", "v_l3",
    # ranking
    "SearchConfig", "RankedList", "Metrics", "THREADS_ENV_VAR",
    "recall_topk", "fused_score", "rerank", "search", "search_many", "evaluate",
    "resolve_workers", "to_json_line",
    # losses
    "BatchFeatures", "LossConfig", "LossResult", "inter_loss", "intra_loss",
    "total_loss", "pearson_distance", "inter_op", "intra_op", "total_op",
    "grad_check",
    # cost model
    "MethodKind", "CostModelInput", "CostRow", "flops_per_pair", "flops_table",
    "formula", "PRESETS", "REFERENCE_METHODS", "preset_input", "preset_table",
    # synthetic data + reference ranker
    "MODES", "SynthConfig", "generate", "brute_force_rank",
]
