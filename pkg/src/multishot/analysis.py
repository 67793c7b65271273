"""Attention-map analysis: frame-level grouping of token attention,
intra/inter-shot statistics, and boundary correlation.

Captured probability tensors (layers x heads x tokens x tokens) are
reduced to frame-by-frame maps by averaging over each frame's token
group and renormalizing rows.  On those maps, the ratio of mean
intra-shot to mean inter-shot probability quantifies block structure,
and the correlation between adjacent-frame attention and boundary
positions quantifies how well attention dips line up with transitions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, NotComputableError, ShapeError, ValidationError
from .masks import TokenLayout
from .partition import ShotPartition

_ATN_MAGIC = b"ATNv1"


@dataclass(frozen=True, eq=False)
class AttnCapture:
    """Captured attention probabilities plus their token layout."""

    probs: np.ndarray  # (layers, heads, n_tokens, n_tokens)
    layout: TokenLayout

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 4 or probs.shape[2] != probs.shape[3]:
            raise ShapeError("capture must be (layers, heads, n, n)")
        if probs.shape[2] != self.layout.n_tokens:
            raise ShapeError(
                f"capture has {probs.shape[2]} tokens, layout expects {self.layout.n_tokens}"
            )
        if np.any(probs < 0):
            raise ValidationError("probabilities must be nonnegative")
        row_sums = probs.sum(axis=3)
        if not np.all(np.abs(row_sums - 1.0) <= 1e-6):
            raise ValidationError("every attention row must sum to 1 within 1e-6")
        object.__setattr__(self, "probs", probs)

    @property
    def n_layers(self) -> int:
        return self.probs.shape[0]

    @property
    def n_heads(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True, eq=False)
class FrameAttentionMap:
    """Frame x frame attention probabilities, rows renormalized to sum 1."""

    n_frames: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (self.n_frames, self.n_frames):
            raise ShapeError(f"probs must be {self.n_frames}x{self.n_frames}")
        if np.any(probs < 0):
            raise ValidationError("probabilities must be nonnegative")
        sums = probs.sum(axis=1)
        if np.any(sums <= 0):
            raise ValidationError("every row needs positive mass")
        probs = probs / sums[:, None]
        object.__setattr__(self, "probs", probs)


def group_attention_by_frame(
    capture: AttnCapture, layer: int, head: int
) -> FrameAttentionMap:
    """Average one map's token attention into frame-by-frame cells.

    Cell (f, g) is the mean of probs[tau, sigma] over tokens tau of frame
    f's slice and sigma of frame g's slice; rows are then renormalized.
    """
    if not 0 <= layer < capture.n_layers:
        raise ValidationError(f"layer {layer} out of range")
    if not 0 <= head < capture.n_heads:
        raise ValidationError(f"head {head} out of range")
    layout = capture.layout
    n = layout.n_frames
    token_map = capture.probs[layer, head]
    grouped = np.empty((n, n), dtype=np.float64)
    groups = [layout.tokens_of_frame(f) for f in range(n)]
    for f in range(n):
        rows = token_map[groups[f].start:groups[f].stop]
        for g in range(n):
            grouped[f, g] = rows[:, groups[g].start:groups[g].stop].mean()
    return FrameAttentionMap(n, grouped)


def intra_inter_ratio(
    fmap: FrameAttentionMap, partition: ShotPartition
) -> tuple[float, float, float]:
    """Mean intra-shot and inter-shot probabilities and their ratio.

    Returns (intra_mean, inter_mean, ratio); the ratio is +inf when every
    cross-shot cell is exactly zero.
    """
    partition.require_contiguous()
    if partition.n_frames != fmap.n_frames:
        raise ValidationError("partition and map cover different frame counts")
    if partition.num_shots < 2:
        raise NotComputableError("intra/inter ratio needs at least two shots")
    shots = np.array([partition.shot_of_frame(f) for f in range(fmap.n_frames)])
    same = shots[:, None] == shots[None, :]
    intra_mean = float(fmap.probs[same].mean())
    inter_mean = float(fmap.probs[~same].mean())
    ratio = float("inf") if inter_mean == 0.0 else intra_mean / inter_mean
    return intra_mean, inter_mean, ratio


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Sample Pearson correlation of two equally long, non-constant series."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError("inputs must be 1-D and equally long")
    if x.size < 2:
        raise ValidationError("need at least two samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt((dx * dx).sum())
    sy = np.sqrt((dy * dy).sum())
    if sx == 0.0 or sy == 0.0:
        raise NotComputableError("correlation undefined for a constant series")
    return float((dx * dy).sum() / (sx * sy))


def adjacent_attention_signal(fmap: FrameAttentionMap) -> np.ndarray:
    """a(t) = attention from frame t to frame t+1, for t in [0, N-2]."""
    n = fmap.n_frames
    return np.array([fmap.probs[t, t + 1] for t in range(n - 1)])


def boundary_indicator(partition: ShotPartition) -> np.ndarray:
    """b(t) = 1 when a shot boundary separates frames t and t+1."""
    partition.require_contiguous()
    interior = set(partition.boundaries[1:-1])
    return np.array(
        [1.0 if (t + 1) in interior else 0.0 for t in range(partition.n_frames - 1)]
    )


def boundary_correlation(fmap: FrameAttentionMap, partition: ShotPartition) -> float:
    """Pearson correlation between adjacent-frame attention and boundary
    positions: a(t) against 1-b(t), so low attention at boundaries gives
    r near 1."""
    if fmap.n_frames < 3:
        raise ValidationError("need at least 3 frames")
    if partition.n_frames != fmap.n_frames:
        raise ValidationError("partition and map cover different frame counts")
    a = adjacent_attention_signal(fmap)
    b = boundary_indicator(partition)
    return pearson(a, 1.0 - b)


def write_atn(probs: np.ndarray, path: str | Path) -> None:
    """Write a (layers, heads, n, n) probability tensor as ATNv1."""
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 4 or arr.shape[2] != arr.shape[3]:
        raise ShapeError("tensor must be (layers, heads, n, n)")
    layers, heads, n, _ = arr.shape
    Path(path).write_bytes(
        _ATN_MAGIC
        + struct.pack("<III", layers, heads, n)
        + arr.astype("<f4").tobytes()
    )


def read_atn(path: str | Path) -> np.ndarray:
    """Read an ATNv1 file into a (layers, heads, n, n) float32 tensor."""
    data = Path(path).read_bytes()
    if len(data) < len(_ATN_MAGIC) + 12 or data[: len(_ATN_MAGIC)] != _ATN_MAGIC:
        raise FormatError(f"{path}: not an ATNv1 file (bad magic)")
    layers, heads, n = struct.unpack_from("<III", data, len(_ATN_MAGIC))
    payload = data[len(_ATN_MAGIC) + 12:]
    expected = layers * heads * n * n * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, expected {expected}")
    return (
        np.frombuffer(payload, dtype="<f4")
        .reshape(layers, heads, n, n)
        .astype(np.float32)
    )
