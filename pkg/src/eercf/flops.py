"""Analytic similarity-computation cost models for retrieval schemes.

Costs are multiply-accumulate counts per text-video pair: the total cost of
answering one query against a gallery of ``N`` videos, divided by ``N``.
Feature extraction is offline in every compared scheme and is excluded, as
are softmax/normalization overheads (dot products dominate).

Six interaction schemes are modeled:

* ``SINGLE_VECTOR``    — one dot product per pair.
* ``SEGMENT_VECTOR``   — one dot product per video segment/frame.
* ``CROSS_GRAINED``    — sentence/word against video/frame, all four pairings.
* ``WORD_FRAME``       — all word-frame pairs plus per-token gating.
* ``POOLED_ATTENTION`` — text-conditioned pooling over frames plus projection.
* ``TWO_STAGE``        — coarse pass over the whole gallery plus fine-grained
  scoring of ``N_r`` candidates, amortized over ``N`` pairs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import EmptyInput, InvalidParams


@dataclass(frozen=True)
class CostModelInput:
    """Scale parameters of a retrieval setup.

    Attributes:
        N: gallery size (videos).
        N_v: frames (or segments) per video.
        N_t: word tokens per text.
        N_p: patches per video — frames times patches-per-frame.
        N_r: candidates rescored by the fine stage.
        D: embedding dimension.
    """

    N: int = 1000
    N_v: int = 12
    N_t: int = 32
    N_p: int = 588
    N_r: int = 50
    D: int = 512

    def __post_init__(self) -> None:
        for name in ("N", "N_v", "N_t", "N_p", "N_r", "D"):
            value = getattr(self, name)
            if not (isinstance(value, int) and value >= 1):
                raise InvalidParams(f"{name} must be a positive integer, got {value!r}")
        if self.N_r > self.N:
            raise InvalidParams(f"N_r ({self.N_r}) cannot exceed N ({self.N})")


class MethodKind(enum.Enum):
    """Interaction scheme of a retrieval method."""

    SINGLE_VECTOR = "single-vector"
    SEGMENT_VECTOR = "segment-vector"
    CROSS_GRAINED = "cross-grained"
    WORD_FRAME = "word-frame"
    POOLED_ATTENTION = "pooled-attention"
    TWO_STAGE = "two-stage"

    @classmethod
    def from_string(cls, name: str) -> "MethodKind":
        for kind in cls:
            if kind.value == name:
                return kind
        choices = ", ".join(k.value for k in cls)
        raise InvalidParams(f"unknown method {name!r}; choose one of: {choices}")


_FORMULAS: dict[MethodKind, str] = {
    MethodKind.SINGLE_VECTOR: "D",
    MethodKind.SEGMENT_VECTOR: "Nv*D",
    MethodKind.CROSS_GRAINED: "(1 + Nv*Nt + Nv + Nt)*D",
    MethodKind.WORD_FRAME: "(Nv*Nt + Nv + Nt)*D",
    MethodKind.POOLED_ATTENTION: "(Nv + D)*D",
    MethodKind.TWO_STAGE: "D + Nr*(1 + Nv + Np)*D/N",
}


def formula(kind: MethodKind) -> str:
    """Human-readable per-pair MAC formula for a method kind."""
    return _FORMULAS[kind]


def flops_per_pair(kind: MethodKind, params: CostModelInput) -> float:
    """Per-pair multiply-accumulate count of ``kind`` at the given scale."""
    n, n_v, n_t, n_p, n_r, d = (
        params.N, params.N_v, params.N_t, params.N_p, params.N_r, params.D,
    )
    if kind is MethodKind.SINGLE_VECTOR:
        return float(d)
    if kind is MethodKind.SEGMENT_VECTOR:
        return float(n_v * d)
    if kind is MethodKind.CROSS_GRAINED:
        return float((1 + n_v * n_t + n_v + n_t) * d)
    if kind is MethodKind.WORD_FRAME:
        return float((n_v * n_t + n_v + n_t) * d)
    if kind is MethodKind.POOLED_ATTENTION:
        return float((n_v + d) * d)
    if kind is MethodKind.TWO_STAGE:
        return float(d) + n_r * (1 + n_v + n_p) * d / n
    raise InvalidParams(f"unsupported method kind {kind!r}")


@dataclass(frozen=True)
class CostRow:
    """One rendered row of a cost comparison table."""

    label: str
    kind: MethodKind
    formula: str
    per_pair: float
    ratio_to_cheapest: float


def flops_table(entries: Sequence[tuple[str, MethodKind, CostModelInput]]) -> list[CostRow]:
    """Evaluate and sort cost-model entries, cheapest first.

    Each row carries the per-pair MAC count and its ratio to the cheapest
    entry in the table.  Ties keep input order, so output is deterministic.

    Raises:
        EmptyInput: on an empty entry list.
    """
    if not entries:
        raise EmptyInput("cost table needs at least one entry")
    costs = [flops_per_pair(kind, params) for _, kind, params in entries]
    cheapest = min(costs)
    order = sorted(range(len(entries)), key=lambda i: (costs[i], i))
    return [
        CostRow(
            label=entries[i][0],
            kind=entries[i][1],
            formula=_FORMULAS[entries[i][1]],
            per_pair=costs[i],
            ratio_to_cheapest=costs[i] / cheapest,
        )
        for i in order
    ]


#: Benchmark-scale presets: gallery size and token counts per dataset setup.
PRESETS: dict[str, CostModelInput] = {
    "msrvtt1k": CostModelInput(N=1000, N_v=12, N_t=32, N_p=588, N_r=50, D=512),
    "msrvtt3k": CostModelInput(N=2990, N_v=12, N_t=32, N_p=588, N_r=50, D=512),
    "vatex": CostModelInput(N=1500, N_v=12, N_t=32, N_p=588, N_r=50, D=512),
    "activitynet": CostModelInput(N=4917, N_v=64, N_t=64, N_p=3136, N_r=50, D=512),
}

#: Published retrieval methods compared in the standard tables, by scheme.
REFERENCE_METHODS: tuple[tuple[str, MethodKind], ...] = (
    ("CLIP4Clip", MethodKind.SINGLE_VECTOR),
    ("CLIP-ViP", MethodKind.SINGLE_VECTOR),
    ("TS2-Net", MethodKind.SEGMENT_VECTOR),
    ("X-CLIP", MethodKind.CROSS_GRAINED),
    ("DRL", MethodKind.WORD_FRAME),
    ("X-Pool", MethodKind.POOLED_ATTENTION),
    ("EERCF", MethodKind.TWO_STAGE),
)


def preset_input(name: str, **overrides: int) -> CostModelInput:
    """A preset's :class:`CostModelInput`, optionally with fields overridden."""
    try:
        base = PRESETS[name]
    except KeyError:
        raise InvalidParams(f"unknown preset {name!r}; choose one of: {', '.join(PRESETS)}") from None
    return replace(base, **overrides) if overrides else base


def preset_table(name: str, **overrides: int) -> list[CostRow]:
    """The standard method comparison table at a preset's scale."""
    params = preset_input(name, **overrides)
    return flops_table([(label, kind, params) for label, kind in REFERENCE_METHODS])
