"""Dense scaled-dot-product and multi-head attention with additive masking.

Disallowed positions are carried as booleans and materialized to the most
negative finite float only when applied to a score matrix.  Subtracting
the per-row maximum before exponentiating then drives every disallowed
entry to exactly 0.0 (the exponent underflows), so masked probabilities
are exact zeros rather than merely small, and an all-allowed mask is the
bitwise identity on scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRowError, ShapeError
from .masks import AttnMask

_NEG_CAP = np.finfo(np.float64).min


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction.

    Rows may contain -inf sentinels, which map to exactly 0.  A row of all
    -inf has no admissible entry and raises DegenerateRowError.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2:
        raise ShapeError("scores must be a 2-D matrix")
    rowmax = np.max(s, axis=1)
    if np.any(np.isneginf(rowmax)):
        bad = int(np.flatnonzero(np.isneginf(rowmax))[0])
        raise DegenerateRowError(f"row {bad} has no finite entry")
    if np.any(np.isnan(rowmax)) or np.any(np.isposinf(rowmax)):
        raise ShapeError("scores must not contain NaN or +inf")
    shifted = s - rowmax[:, None]
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1)[:, None]


def _apply_mask(scores: np.ndarray, mask: AttnMask | None) -> np.ndarray:
    """Overwrite disallowed positions with the most negative finite float."""
    if mask is None:
        return scores
    if mask.allowed.shape != scores.shape:
        raise ShapeError(
            f"mask shape {mask.allowed.shape} does not match scores {scores.shape}"
        )
    if not mask.allowed.all():
        row_ok = mask.allowed.any(axis=1)
        if not row_ok.all():
            bad = int(np.flatnonzero(~row_ok)[0])
            raise DegenerateRowError(f"mask row {bad} allows no key")
        scores = np.where(mask.allowed, scores, _NEG_CAP)
    return scores


@dataclass(frozen=True, eq=False)
class AttentionOutput:
    """Attention result: weighted values plus the row-stochastic map."""

    output: np.ndarray
    probs: np.ndarray


def scaled_dot_product_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    mask: AttnMask | None = None,
) -> AttentionOutput:
    """softmax(q k^T / sqrt(d_k) + mask) v.

    With a mask, every disallowed probability is exactly 0; with an
    all-allowed mask the result is bitwise identical to the unmasked call.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ShapeError("q, k, v must be 2-D matrices")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"q cols {q.shape[1]} != k cols {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ShapeError(f"k rows {k.shape[0]} != v rows {v.shape[0]}")
    d_k = q.shape[1]
    scores = (q @ k.T) / np.sqrt(d_k)
    scores = _apply_mask(scores, mask)
    probs = softmax_rows(scores)
    return AttentionOutput(output=probs @ v, probs=probs)


@dataclass(frozen=True, eq=False)
class HeadProjections:
    """Per-head projection matrices plus the shared output projection.

    wq, wk, wv each hold one (d_model x d_head) matrix per head; wo maps
    the concatenated head outputs (n_heads * d_v) to the model dimension.
    """

    wq: tuple[np.ndarray, ...]
    wk: tuple[np.ndarray, ...]
    wv: tuple[np.ndarray, ...]
    wo: np.ndarray

    def __post_init__(self):
        n = len(self.wq)
        if n < 1:
            raise ShapeError("need at least one head")
        if len(self.wk) != n or len(self.wv) != n:
            raise ShapeError("wq, wk, wv must have one matrix per head")
        d_model = self.wq[0].shape[0]
        d_v = self.wv[0].shape[1]
        for m in (*self.wq, *self.wk, *self.wv):
            if m.ndim != 2 or m.shape[0] != d_model:
                raise ShapeError("every projection must map from the model dimension")
        for a, b in zip(self.wq, self.wk):
            if a.shape[1] != b.shape[1]:
                raise ShapeError("wq and wk head dimensions must agree")
        for m in self.wv:
            if m.shape[1] != d_v:
                raise ShapeError("all wv head dimensions must agree")
        if self.wo.ndim != 2 or self.wo.shape[0] != n * d_v:
            raise ShapeError(f"wo must have {n * d_v} rows")

    @property
    def n_heads(self) -> int:
        return len(self.wq)


def multi_head_attention(
    x: np.ndarray,
    params: HeadProjections,
    mask: AttnMask | None = None,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Standard multi-head self-attention over token matrix x.

    Every head receives the same mask.  Returns the projected output and
    each head's probability map for analysis.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("x must be 2-D (tokens x d_model)")
    outputs = []
    head_probs = []
    for h in range(params.n_heads):
        att = scaled_dot_product_attention(
            x @ params.wq[h], x @ params.wk[h], x @ params.wv[h], mask
        )
        outputs.append(att.output)
        head_probs.append(att.probs)
    concat = np.concatenate(outputs, axis=1)
    return concat @ params.wo, head_probs
