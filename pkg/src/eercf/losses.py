"""Training objectives: symmetric InfoNCE, correlation-structure loss, totals.

Three pieces, each returning its value together with analytic gradients:

* :func:`inter_loss` — symmetric InfoNCE over a batch of paired video/text
  features: cross-entropy of the temperature-scaled similarity rows against
  the diagonal, averaged over rows, summed over both directions.
* :func:`intra_loss` — a correlation-structure penalty over feature
  channels: same-channel video/text correlation is pushed toward 1 (squared
  Pearson distance) while cross-channel correlations are pushed toward 0
  (squared coefficient, weighted by ``alpha``).
* :func:`total_loss` — a weighted sum of (inter + beta * intra) across the
  three feature levels.

:func:`grad_check` verifies any of these against central finite differences.
All arithmetic is 64-bit; no optimizer is provided — these functions certify
the objectives themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    BatchTooSmall,
    DegenerateChannel,
    InvalidConfig,
    InvalidParams,
    ShapeMismatch,
)

#: Channels with (population) standard deviation below this are degenerate.
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class BatchFeatures:
    """Paired feature matrices for one level: row b of each is instance b.

    Rows should be unit-norm when the batch feeds InfoNCE (cosine logits);
    :meth:`require_unit_rows` checks that contract explicitly.  The
    correlation loss reads columns (channels) and has no norm requirement.
    """

    f_v: np.ndarray
    f_t: np.ndarray

    def __post_init__(self) -> None:
        f_v = np.asarray(self.f_v, dtype=np.float64)
        f_t = np.asarray(self.f_t, dtype=np.float64)
        if f_v.ndim != 2 or f_t.ndim != 2:
            raise ShapeMismatch(f"expected B x D matrices, got {f_v.shape} and {f_t.shape}")
        if f_v.shape != f_t.shape:
            raise ShapeMismatch(f"video/text feature shapes differ: {f_v.shape} vs {f_t.shape}")
        if f_v.shape[0] < 2:
            raise BatchTooSmall(f"need at least 2 instances, got {f_v.shape[0]}")
        if not (np.all(np.isfinite(f_v)) and np.all(np.isfinite(f_t))):
            raise InvalidParams("batch features contain non-finite values")
        object.__setattr__(self, "f_v", f_v)
        object.__setattr__(self, "f_t", f_t)

    @property
    def batch_size(self) -> int:
        return int(self.f_v.shape[0])

    @property
    def dim(self) -> int:
        return int(self.f_v.shape[1])

    def require_unit_rows(self, atol: float = 1e-5) -> None:
        """Raise unless every row of both matrices is unit-norm within ``atol``."""
        for name, mat in (("f_v", self.f_v), ("f_t", self.f_t)):
            norms = np.linalg.norm(mat, axis=1)
            worst = float(np.abs(norms - 1.0).max())
            if worst > atol:
                raise InvalidParams(f"{name} rows deviate from unit norm by {worst:.2e}")


@dataclass(frozen=True)
class LossConfig:
    """Weights and temperatures of the training objective."""

    alpha: float = 0.05
    beta: float = 0.001
    lambdas: tuple[float, float, float] = (5.0, 5.0, 1.0)
    infonce_temperature: float = 0.01

    def __post_init__(self) -> None:
        if not (self.infonce_temperature > 0 and np.isfinite(self.infonce_temperature)):
            raise InvalidConfig(f"infonce_temperature must be positive, got {self.infonce_temperature}")
        if not (self.alpha >= 0 and np.isfinite(self.alpha)):
            raise InvalidConfig(f"alpha must be nonnegative, got {self.alpha}")
        if not (self.beta >= 0 and np.isfinite(self.beta)):
            raise InvalidConfig(f"beta must be nonnegative, got {self.beta}")
        lambdas = tuple(float(v) for v in self.lambdas)
        if len(lambdas) != 3 or any(not (v >= 0 and np.isfinite(v)) for v in lambdas):
            raise InvalidConfig(f"lambdas must be three nonnegative reals, got {self.lambdas!r}")
        object.__setattr__(self, "lambdas", lambdas)


@dataclass(frozen=True)
class LossResult:
    """A scalar objective value plus gradients keyed by input name."""

    value: float
    grads: dict[str, np.ndarray] = field(default_factory=dict)


def _log_softmax(logits: np.ndarray, axis: int) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def inter_loss(batch: BatchFeatures, tau: float = 0.01) -> LossResult:
    """Symmetric InfoNCE with analytic gradients.

    With similarity matrix ``S = f_v @ f_t.T / tau``, the loss is the mean
    over rows of the cross-entropy of ``softmax(S[b, :])`` against positive
    ``b``, plus the same over columns; equivalently ``-(1/B) * sum of diagonal
    log-probabilities`` in each direction.  Always nonnegative.

    Returns:
        LossResult with gradients under keys ``"f_v"`` and ``"f_t"``.

    Raises:
        InvalidConfig: if ``tau`` is not positive.
    """
    if not (tau > 0 and np.isfinite(tau)):
        raise InvalidConfig(f"tau must be positive, got {tau}")
    f_v, f_t = batch.f_v, batch.f_t
    b = batch.batch_size
    sims = f_v @ f_t.T / tau
    log_p_rows = _log_softmax(sims, axis=1)
    log_p_cols = _log_softmax(sims, axis=0)
    diag = np.arange(b)
    value = float(-(log_p_rows[diag, diag].mean() + log_p_cols[diag, diag].mean()))

    p_rows = np.exp(log_p_rows)
    p_cols = np.exp(log_p_cols)
    eye = np.eye(b)
    d_sims = ((p_rows - eye) + (p_cols - eye)) / b
    grad_v = d_sims @ f_t / tau
    grad_t = d_sims.T @ f_v / tau
    return LossResult(value=value, grads={"f_v": grad_v, "f_t": grad_t})


def _centered_columns(mat: np.ndarray, label: str) -> tuple[np.ndarray, np.ndarray]:
    """Column-centered matrix and per-column centered norms; rejects constants."""
    centered = mat - mat.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centered, axis=0)
    stds = norms / np.sqrt(mat.shape[0])
    if np.any(stds <= STD_FLOOR):
        worst = int(np.argmin(stds))
        raise DegenerateChannel(f"{label} channel {worst} is constant across the batch")
    return centered, norms


def pearson_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson distance ``1 - rho`` between two batch vectors; in [0, 2].

    ``rho`` is the sample Pearson coefficient: covariance of ``x`` and ``y``
    over the product of their standard deviations.  The coefficient is
    clamped to [-1, 1] so floating-point round-off can never push the
    distance outside its range.

    Raises:
        BatchTooSmall: if fewer than two samples.
        DegenerateChannel: if either input is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise ShapeMismatch(f"expected equal-length vectors, got {x.shape} and {y.shape}")
    if x.shape[0] < 2:
        raise BatchTooSmall(f"need at least 2 samples, got {x.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidParams("inputs contain non-finite values")
    cx, nx = _centered_columns(x[:, None], "x")
    cy, ny = _centered_columns(y[:, None], "y")
    rho = float(cx[:, 0] @ cy[:, 0] / (nx[0] * ny[0]))
    return 1.0 - min(1.0, max(-1.0, rho))


def _correlation_matrix(batch: BatchFeatures) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    cv, nv = _centered_columns(batch.f_v, "f_v")
    ct, nt = _centered_columns(batch.f_t, "f_t")
    zv = cv / nv
    zt = ct / nt
    rho = np.clip(zv.T @ zt, -1.0, 1.0)
    return rho, zv, zt, nv, nt


def intra_loss(batch: BatchFeatures, alpha: float = 0.05) -> LossResult:
    """Correlation-structure loss over channels, with analytic gradients.

    With ``rho[i, j]`` the Pearson coefficient between video channel ``i``
    and text channel ``j``:

    * diagonal terms contribute ``(1 - rho[i, i])**2`` — matched channels
      should correlate perfectly;
    * off-diagonal terms contribute ``alpha * rho[i, j]**2`` — distinct
      channels should decorrelate.

    Raises:
        DegenerateChannel: if any channel of either matrix is constant.
        InvalidConfig: if ``alpha`` is negative.
    """
    if not (alpha >= 0 and np.isfinite(alpha)):
        raise InvalidConfig(f"alpha must be nonnegative, got {alpha}")
    rho, zv, zt, nv, nt = _correlation_matrix(batch)
    dim = batch.dim
    off_diag = ~np.eye(dim, dtype=bool)
    diag_dist = 1.0 - np.diag(rho)
    value = float((diag_dist**2).sum() + alpha * (rho[off_diag] ** 2).sum())

    # dL/d(rho): diagonal -2*(1 - rho_ii), off-diagonal 2*alpha*rho_ij.
    g = 2.0 * alpha * rho * off_diag - 2.0 * np.diag(diag_dist)
    # d(rho_ij)/d(f_v[:, i]) = (zt[:, j] - rho_ij * zv[:, i]) / nv_i, already
    # column-centered, so the centering projection is a no-op.
    grad_v = (zt @ g.T - zv * (g * rho).sum(axis=1)) / nv
    grad_t = (zv @ g - zt * (g * rho).sum(axis=0)) / nt
    return LossResult(value=value, grads={"f_v": grad_v, "f_t": grad_t})


def total_loss(levels: Sequence[BatchFeatures], config: LossConfig = LossConfig()) -> LossResult:
    """Weighted multi-level objective: ``sum_i lambda_i * (inter_i + beta * intra_i)``.

    ``levels`` holds one batch per feature level (coarse, frame, patch), all
    sharing the same batch size.  Gradients are keyed ``"f_v_l1"`` ...
    ``"f_t_l3"``.  The value is linear in each per-level loss, hence also in
    the ``lambdas``.
    """
    levels = list(levels)
    if len(levels) != 3:
        raise InvalidParams(f"expected 3 feature levels, got {len(levels)}")
    sizes = {lvl.batch_size for lvl in levels}
    if len(sizes) != 1:
        raise ShapeMismatch(f"levels disagree on batch size: {sorted(sizes)}")
    value = 0.0
    grads: dict[str, np.ndarray] = {}
    for i, (lam, batch) in enumerate(zip(config.lambdas, levels), start=1):
        # Terms with zero weight are skipped outright, so they can neither
        # cost time nor reject a batch they cannot influence.
        if lam == 0.0:
            grads[f"f_v_l{i}"] = np.zeros_like(batch.f_v)
            grads[f"f_t_l{i}"] = np.zeros_like(batch.f_t)
            continue
        inter = inter_loss(batch, tau=config.infonce_temperature)
        grad_v, grad_t = inter.grads["f_v"], inter.grads["f_t"]
        value += lam * inter.value
        if config.beta > 0.0:
            intra = intra_loss(batch, alpha=config.alpha)
            value += lam * config.beta * intra.value
            grad_v = grad_v + config.beta * intra.grads["f_v"]
            grad_t = grad_t + config.beta * intra.grads["f_t"]
        grads[f"f_v_l{i}"] = lam * grad_v
        grads[f"f_t_l{i}"] = lam * grad_t
    return LossResult(value=value, grads=grads)


LossOp = Callable[[Mapping[str, np.ndarray]], LossResult]


def inter_op(tau: float = 0.01) -> LossOp:
    """inter_loss as a checkable op over inputs {"f_v", "f_t"}."""
    return lambda inputs: inter_loss(BatchFeatures(inputs["f_v"], inputs["f_t"]), tau=tau)


def intra_op(alpha: float = 0.05) -> LossOp:
    """intra_loss as a checkable op over inputs {"f_v", "f_t"}."""
    return lambda inputs: intra_loss(BatchFeatures(inputs["f_v"], inputs["f_t"]), alpha=alpha)


def total_op(config: LossConfig = LossConfig()) -> LossOp:
    """total_loss as a checkable op over inputs {"f_v_l1" ... "f_t_l3"}."""

    def op(inputs: Mapping[str, np.ndarray]) -> LossResult:
        levels = [
            BatchFeatures(inputs[f"f_v_l{i}"], inputs[f"f_t_l{i}"]) for i in (1, 2, 3)
        ]
        return total_loss(levels, config)

    return op


def grad_check(op: LossOp, inputs: Mapping[str, np.ndarray], eps: float = 1e-5) -> float:
    """Worst-case relative error of analytic gradients vs central differences.

    Every coordinate of every input is perturbed by ``+eps`` and ``-eps``;
    the numeric slope ``(f(x+eps) - f(x-eps)) / (2 * eps)`` is compared to
    the analytic gradient as ``|a - n| / max(|a|, |n|, 1e-8)``.

    Args:
        op: callable mapping named input arrays to a :class:`LossResult`
            whose ``grads`` carry one entry per input name.
        inputs: named float arrays defining the evaluation point.
        eps: step size, restricted to [1e-6, 1e-3].

    Returns:
        The maximum relative error over all coordinates (0.0 for empty input).
    """
    if not (1e-6 <= eps <= 1e-3):
        raise InvalidParams(f"eps must lie in [1e-6, 1e-3], got {eps}")
    base = {name: np.array(arr, dtype=np.float64) for name, arr in inputs.items()}
    analytic = op(base).grads
    missing = set(base) - set(analytic)
    if missing:
        raise InvalidParams(f"op returned no gradient for inputs: {sorted(missing)}")
    worst = 0.0
    for name, arr in base.items():
        grad = analytic[name]
        if grad.shape != arr.shape:
            raise ShapeMismatch(f"gradient for {name!r} has shape {grad.shape}, input {arr.shape}")
        flat = arr.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            high = op(base).value
            flat[idx] = original - eps
            low = op(base).value
            flat[idx] = original
            numeric = (high - low) / (2.0 * eps)
            a = float(grad.reshape(-1)[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
