"""Shot segmentation: hard-cut scoring, gradual-transition scoring, and the
threshold pipeline that turns a frame sequence into labeled shots.

The content detector scores each adjacent frame pair by comparing 32-bin
per-channel histograms; the scale is calibrated so a full black-to-white
cut scores 255 and the default cut threshold is 27.  The gradual detector
produces the two per-frame probabilities used to filter fade frames: a
single-frame head that is high for isolated spikes (hard cuts) and an
all-frame head that is high across sustained change (crossfades), with
default thresholds 0.45 and 0.50.  Frames flagged as gradual belong to no
shot and are excluded from the output partition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .frameio import FrameSequence
from .partition import ShotPartition

DEFAULT_CUT_THRESHOLD = 27.0
DEFAULT_SINGLE_THRESHOLD = 0.45
DEFAULT_ALL_THRESHOLD = 0.50
# A +/-4 window only votes on gradual change when its strongest difference
# is itself transition-scale; anything below the cut threshold is sensor /
# synthesis noise on the 0..255 scale and must not be mistaken for a fade.
DEFAULT_SIGNIFICANCE_FLOOR = DEFAULT_CUT_THRESHOLD

_HIST_BINS = 32
_SINGLE_WINDOW = 8
_ALL_WINDOW = 4


def _frame_histograms(seq: FrameSequence) -> np.ndarray:
    """(frames, channels, 32) histograms normalized to sum 1 per channel."""
    _, hi = seq.value_range()
    scaled = np.clip(seq.pixels.astype(np.float64) / hi, 0.0, 1.0)
    idx = np.minimum((scaled * _HIST_BINS).astype(np.int64), _HIST_BINS - 1)
    n, h, w, c = idx.shape
    flat = idx.reshape(n, h * w, c)
    hists = np.empty((n, c, _HIST_BINS), dtype=np.float64)
    for t in range(n):
        for ch in range(c):
            hists[t, ch] = np.bincount(flat[t, :, ch], minlength=_HIST_BINS)
    return hists / (h * w)


def content_cut_scores(seq: FrameSequence) -> np.ndarray:
    """Content difference score for each adjacent frame pair (length N-1).

    score(t) = 127.5 * mean over channels of the L1 distance between the
    normalized 32-bin histograms of frames t and t+1, giving values in
    [0, 255] with 255 for fully disjoint histograms.
    """
    if seq.frame_count < 2:
        raise ValidationError("need at least 2 frames to score cuts")
    hists = _frame_histograms(seq)
    l1 = np.abs(hists[1:] - hists[:-1]).sum(axis=2).mean(axis=1)
    return 127.5 * l1


def detect_cuts(scores: np.ndarray, threshold: float = DEFAULT_CUT_THRESHOLD) -> list[int]:
    """Candidate shot boundaries from pair scores.

    A boundary lands at t+1 for every local maximum t whose score reaches
    the threshold; a plateau of equal values yields a single boundary at
    its earliest index.  Raising the threshold can only remove boundaries.
    """
    if threshold <= 0:
        raise ValidationError("threshold must be positive")
    s = np.asarray(scores, dtype=np.float64)
    n = s.size
    boundaries: list[int] = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        left_ok = i == 0 or s[i - 1] < s[i]
        right_ok = j == n - 1 or s[j + 1] < s[i]
        if left_ok and right_ok and s[i] >= threshold:
            boundaries.append(i + 1)
        i = j + 1
    return boundaries


@dataclass(frozen=True, eq=False)
class GradualScores:
    """Per-frame transition probabilities (both length N, in [0, 1])."""

    single_frame: np.ndarray
    all_frame: np.ndarray


def gradual_scores(
    seq: FrameSequence,
    significance_floor: float = DEFAULT_SIGNIFICANCE_FLOOR,
) -> GradualScores:
    """Two per-frame heads for telling hard cuts from gradual changes.

    The per-frame difference signal is D(t) = score of the pair (t-1, t),
    with D(0) = 0.  single_frame(t) measures how sharply D spikes at t:
    the excess of D(t) over the mean of its two neighbors, normalized by
    the maximum of D over a +/-8 window (0 when that maximum is 0).  An
    isolated hard cut scores ~1 at its peak while the flat profile of a
    crossfade scores ~0 inside the fade.  all_frame(t) is the fraction of
    the +/-4 neighborhood (nominal size 9; out-of-range neighbors count
    as zero difference) whose differences exceed half the window maximum,
    smoothed with a 3-tap mean, so it stays high across an entire fade;
    windows whose maximum falls below `significance_floor` score 0 so
    noise-level jitter never votes.  With the default 0.50 threshold this
    flags crossfades of four or more frames; shorter blends look like
    slightly soft cuts and are left inside their shots.
    """
    if seq.frame_count < 3:
        raise ValidationError("need at least 3 frames for gradual scoring")
    n = seq.frame_count
    pair = content_cut_scores(seq)
    diff = np.zeros(n, dtype=np.float64)
    diff[1:] = pair

    single = np.zeros(n, dtype=np.float64)
    for t in range(n):
        w = diff[max(0, t - _SINGLE_WINDOW): t + _SINGLE_WINDOW + 1]
        m = w.max()
        if m > 0:
            left = diff[t - 1] if t > 0 else 0.0
            right = diff[t + 1] if t < n - 1 else 0.0
            single[t] = max(0.0, diff[t] - (left + right) / 2.0) / m

    raw = np.zeros(n, dtype=np.float64)
    nominal = 2 * _ALL_WINDOW + 1
    for t in range(n):
        w = diff[max(0, t - _ALL_WINDOW): t + _ALL_WINDOW + 1]
        m = w.max()
        if m >= significance_floor and m > 0:
            # out-of-range neighbors count as zero-difference frames
            raw[t] = np.count_nonzero(w > m / 2) / nominal
    all_frame = np.empty(n, dtype=np.float64)
    for t in range(n):
        w = raw[max(0, t - 1): t + 2]
        all_frame[t] = w.mean()

    return GradualScores(
        single_frame=np.clip(single, 0.0, 1.0),
        all_frame=np.clip(all_frame, 0.0, 1.0),
    )


def _gradual_frames(
    single: np.ndarray,
    allp: np.ndarray,
    single_threshold: float,
    all_threshold: float,
) -> list[int]:
    """Frames marked gradual: sustained all-frame regions, minus frames
    that are instantaneous cuts.

    A frame above the all threshold is an instantaneous cut (kept) only
    when its single-frame score reaches the single threshold at an isolated
    peak: the surrounding above-all-threshold run spans at most two
    frames.  Runs of three or more frames are sustained transitions and
    are removed wholesale.
    """
    above = allp >= all_threshold
    gradual: list[int] = []
    i = 0
    n = above.size
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        run = range(i, j + 1)
        if len(run) <= 2:
            gradual.extend(t for t in run if single[t] < single_threshold)
        else:
            gradual.extend(run)
        i = j + 1
    return gradual


def remove_gradual_frames(
    partition_candidates: list[int],
    preds: GradualScores,
    single_threshold: float = DEFAULT_SINGLE_THRESHOLD,
    all_threshold: float = DEFAULT_ALL_THRESHOLD,
) -> tuple[list[int], ShotPartition, list[int]]:
    """Drop gradual-transition frames and assemble the final shot labels.

    A frame is gradual when its all-frame probability reaches
    `all_threshold` and it is not an isolated single-frame peak (an
    instantaneous cut).  Gradual frames belong to no shot; the remaining
    frames form shots bounded by the surviving candidate cuts and by the
    gaps the removed frames leave behind.

    Returns (kept frame indices, partition, gradual frame indices).
    """
    if not 0 < single_threshold < 1 or not 0 < all_threshold < 1:
        raise ValidationError("thresholds must lie in (0, 1)")
    single = np.asarray(preds.single_frame, dtype=np.float64)
    allp = np.asarray(preds.all_frame, dtype=np.float64)
    if single.shape != allp.shape or single.ndim != 1:
        raise ValidationError("prediction heads must be 1-D and equally long")
    n = single.size

    gradual = _gradual_frames(single, allp, single_threshold, all_threshold)
    gradual_set = set(gradual)
    kept = [t for t in range(n) if t not in gradual_set]
    if not kept:
        raise ValidationError("every frame was classified gradual; nothing to label")

    candidate_set = set(partition_candidates)
    shots: list[tuple[int, int]] = []
    start = kept[0]
    prev = kept[0]
    for t in kept[1:]:
        # a gap (removed fade) or a surviving cut closes the current shot
        if t != prev + 1 or t in candidate_set:
            shots.append((start, prev + 1))
            start = t
        prev = t
    shots.append((start, prev + 1))

    partition = ShotPartition(
        n_frames=n, shots=tuple(shots), gradual_frames=tuple(gradual)
    )
    return kept, partition, gradual


def segment(
    seq: FrameSequence,
    cut_threshold: float = DEFAULT_CUT_THRESHOLD,
    single_threshold: float = DEFAULT_SINGLE_THRESHOLD,
    all_threshold: float = DEFAULT_ALL_THRESHOLD,
    significance_floor: float = DEFAULT_SIGNIFICANCE_FLOOR,
) -> ShotPartition:
    """Full segmentation pipeline: cut scoring, cut detection, gradual
    filtering, and shot assembly."""
    if seq.frame_count < 2:
        raise ValidationError("need at least 2 frames to segment")
    scores = content_cut_scores(seq)
    candidates = detect_cuts(scores, cut_threshold)
    if seq.frame_count < 3:
        boundaries = [0, *candidates, seq.frame_count]
        return ShotPartition.from_boundaries(sorted(set(boundaries)))
    preds = gradual_scores(seq, significance_floor=significance_floor)
    _, partition, _ = remove_gradual_frames(
        candidates, preds, single_threshold, all_threshold
    )
    return partition
