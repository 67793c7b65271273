"""Evaluation metrics for multi-shot video: transition control, intra- and
inter-shot consistency, reference distributions, and the Jensen-Shannon
consistency gap.

The transition control score compares the detected shot count against the
specified one through x = detected / specified and x^k * exp(-k (x - 1)),
with k = 2 below x = 1 and k = 1.6 above, so the score is 1 exactly at
equality and falls off on both sides; single-shot output scores 0.

Consistency scores are cosine similarities of per-frame features: within
shots between adjacent frames, across shots between shot-mean features
(semantic) and middle-frame features (visual).  Score distributions are
compared with the Jensen-Shannon distance in log base 2, so the gap lies
in [0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotComputableError, ShapeError, ValidationError
from .frameio import FeatureSequence, FrameSequence, extract_features
from .partition import ShotPartition, dumps_json

DEFAULT_BINS = 50
DEFAULT_EPSILON = 1e-9
K_UNDER = 2.0
K_OVER = 1.6


def transition_control_curve(x: float, k_under: float = K_UNDER, k_over: float = K_OVER) -> float:
    """The continuous score profile x^k * exp(-k (x - 1)) with the branch
    constant switching at x = 1.  Defined for x > 0; peaks at exactly 1."""
    if x <= 0:
        raise ValidationError("x must be positive")
    k = k_under if x < 1.0 else k_over
    return x ** k * math.exp(-k * (x - 1.0))


def transition_control_score(detected: int, specified: int) -> float:
    """Score in [0, 1] for hitting the specified shot count.

    A single detected shot scores 0 (the prompt always asks for several);
    an exact match scores 1.
    """
    if specified < 2:
        raise ValidationError("specified shot count must be at least 2")
    if detected < 1:
        raise ValidationError("detected shot count must be positive")
    if detected == 1:
        return 0.0
    if detected == specified:
        return 1.0
    return transition_control_curve(detected / specified)


def middle_frame(shot: tuple[int, int]) -> int:
    """Representative frame of a half-open shot interval."""
    start, end = shot
    if end <= start:
        raise ValidationError(f"empty shot [{start},{end})")
    return start + (end - start - 1) // 2


def _resolve_features(seq: FrameSequence, source) -> FeatureSequence:
    """Accept an extractor id or precomputed per-frame features."""
    if isinstance(source, FeatureSequence):
        if source.frame_count != seq.frame_count:
            raise ValidationError(
                f"features cover {source.frame_count} frames, sequence has {seq.frame_count}"
            )
        return source
    return extract_features(seq, source)


def _cos(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.clip(np.dot(u, v), 0.0, 1.0))


def intra_shot_consistency(
    seq: FrameSequence,
    partition: ShotPartition,
    subject_extractor="builtin-center",
    background_extractor="builtin-border",
) -> tuple[float, float]:
    """Mean adjacent-frame similarity within shots, averaged over shots.

    Returns (subject, background); single-frame shots contribute 1.0.
    """
    if partition.n_frames != seq.frame_count:
        raise ValidationError("partition does not cover the sequence")
    results = []
    for source in (subject_extractor, background_extractor):
        feats = _resolve_features(seq, source).vectors
        per_shot = []
        for start, end in partition.shots:
            if end - start < 2:
                per_shot.append(1.0)
                continue
            sims = [
                _cos(feats[t], feats[t + 1]) for t in range(start, end - 1)
            ]
            per_shot.append(float(np.mean(sims)))
        results.append(float(np.mean(per_shot)))
    return results[0], results[1]


def inter_shot_semantic_consistency(
    seq: FrameSequence,
    partition: ShotPartition,
    shot_extractor="builtin-v1",
) -> float:
    """Mean pairwise similarity of per-shot mean features.

    The shot feature is the renormalized mean of its frame features;
    undefined for single-shot partitions.
    """
    if partition.n_frames != seq.frame_count:
        raise ValidationError("partition does not cover the sequence")
    if partition.num_shots < 2:
        raise NotComputableError("inter-shot consistency needs at least two shots")
    feats = _resolve_features(seq, shot_extractor).vectors
    shot_feats = []
    for start, end in partition.shots:
        mean = feats[start:end].mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0:
            raise ValidationError("degenerate zero shot feature")
        shot_feats.append(mean / norm)
    sims = [
        _cos(shot_feats[i], shot_feats[j])
        for i in range(len(shot_feats))
        for j in range(i + 1, len(shot_feats))
    ]
    return float(np.mean(sims))


def inter_shot_visual_consistency(
    seq: FrameSequence,
    partition: ShotPartition,
    subject_extractor="builtin-center",
    background_extractor="builtin-border",
) -> float:
    """Middle-frame similarity across shots, averaged over subject and
    background features."""
    if partition.n_frames != seq.frame_count:
        raise ValidationError("partition does not cover the sequence")
    if partition.num_shots < 2:
        raise NotComputableError("inter-shot consistency needs at least two shots")
    middles = [middle_frame(shot) for shot in partition.shots]
    scores = []
    for source in (subject_extractor, background_extractor):
        feats = _resolve_features(seq, source).vectors
        sims = [
            _cos(feats[middles[i]], feats[middles[j]])
            for i in range(len(middles))
            for j in range(i + 1, len(middles))
        ]
        scores.append(float(np.mean(sims)))
    return float(np.mean(scores))


@dataclass(frozen=True, eq=False)
class Histogram:
    """Smoothed probability masses over equal-width bins spanning [0, 1]."""

    bin_count: int
    epsilon: float
    masses: np.ndarray

    def __post_init__(self):
        if self.bin_count < 1:
            raise ValidationError("bin_count must be positive")
        masses = np.asarray(self.masses, dtype=np.float64)
        if masses.shape != (self.bin_count,):
            raise ShapeError(f"need exactly {self.bin_count} masses")
        if np.any(masses <= 0):
            raise ValidationError("masses must be positive after smoothing")
        if abs(masses.sum() - 1.0) > 1e-9:
            raise ValidationError("masses must sum to 1 within 1e-9")
        object.__setattr__(self, "masses", masses)

    def to_json_obj(self) -> dict:
        return {
            "bins": self.bin_count,
            "epsilon": self.epsilon,
            "masses": [float(m) for m in self.masses],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Histogram":
        try:
            return cls(
                bin_count=int(obj["bins"]),
                epsilon=float(obj["epsilon"]),
                masses=np.asarray(obj["masses"], dtype=np.float64),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed histogram JSON: {exc}") from exc

    def to_json(self) -> str:
        return dumps_json(self.to_json_obj())

    @classmethod
    def from_json(cls, text: str) -> "Histogram":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
        return cls.from_json_obj(obj)


def build_reference_distribution(
    scores: list[float] | np.ndarray,
    bins: int = DEFAULT_BINS,
    epsilon: float = DEFAULT_EPSILON,
) -> Histogram:
    """Bin scores in [0, 1] into an epsilon-smoothed histogram.

    Bins are equal-width with the last bin right-closed; smoothing adds
    epsilon to every bin's mass and renormalizes, so no bin is empty.
    """
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("cannot bin an empty score list")
    if arr.ndim != 1:
        raise ShapeError("scores must be 1-D")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValidationError("scores must lie in [0, 1]")
    if bins < 1:
        raise ValidationError("bins must be positive")
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    idx = np.minimum((arr * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    masses = counts / arr.size + epsilon
    masses /= masses.sum()
    return Histogram(bin_count=bins, epsilon=epsilon, masses=masses)


def jsd(p: Histogram, q: Histogram) -> float:
    """Jensen-Shannon distance between two histograms, in [0, 1].

    Uses log base 2: JS = (KL(P||Mix) + KL(Q||Mix)) / 2 with
    Mix = (P + Q) / 2, and the distance is sqrt(JS).  Symmetric, zero
    exactly when the histograms are equal.
    """
    if p.bin_count != q.bin_count:
        raise ShapeError(f"bin counts differ: {p.bin_count} vs {q.bin_count}")
    mix = 0.5 * (p.masses + q.masses)
    kl_p = float(np.sum(p.masses * np.log2(p.masses / mix)))
    kl_q = float(np.sum(q.masses * np.log2(q.masses / mix)))
    js = max(0.0, 0.5 * kl_p + 0.5 * kl_q)
    return math.sqrt(js)


def consistency_gap(
    generated_scores: list[float] | np.ndarray, reference: Histogram
) -> float:
    """Jensen-Shannon distance between the generated score distribution and
    the reference, using the reference's binning."""
    generated = build_reference_distribution(
        generated_scores, bins=reference.bin_count, epsilon=reference.epsilon
    )
    return jsd(generated, reference)


@dataclass(frozen=True)
class ConvergencePoint:
    n: int
    cumulative_mean: float
    ci95_width: float


def convergence_report(
    scores: list[float] | np.ndarray, step: int
) -> list[ConvergencePoint]:
    """Cumulative mean and 95% CI width at prefix sizes step, 2*step, ...

    The CI width is 2 * 1.96 * s_n / sqrt(n) with sample standard
    deviation s_n, for checking that a reference set has stabilized.
    """
    arr = np.asarray(scores, dtype=np.float64)
    if step < 1:
        raise ValidationError("step must be positive")
    if arr.size < 2 * step:
        raise ValidationError("need at least 2*step scores")
    points = []
    for n in range(step, arr.size + 1, step):
        prefix = arr[:n]
        mean = float(prefix.mean())
        sd = float(prefix.std(ddof=1)) if n > 1 else 0.0
        points.append(ConvergencePoint(n, mean, 2.0 * 1.96 * sd / math.sqrt(n)))
    return points


@dataclass(frozen=True)
class MetricReport:
    """All per-video metrics; None marks a value that is not computable
    for this input (e.g. inter-shot scores of a single-shot video)."""

    detected_shots: int
    specified_shots: int
    transition_control: float
    intra_subject: float
    intra_background: float
    inter_semantic: float | None = None
    inter_visual: float | None = None
    gap_semantic: float | None = None
    gap_visual: float | None = None
    aesthetic_quality: float | None = None
    prompt_consistency: float | None = None

    def to_json_obj(self) -> dict:
        return {
            "detected_shots": self.detected_shots,
            "specified_shots": self.specified_shots,
            "transition_control": self.transition_control,
            "intra_subject": self.intra_subject,
            "intra_background": self.intra_background,
            "inter_semantic": self.inter_semantic,
            "inter_visual": self.inter_visual,
            "gap_semantic": self.gap_semantic,
            "gap_visual": self.gap_visual,
            "aesthetic_quality": self.aesthetic_quality,
            "prompt_consistency": self.prompt_consistency,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "MetricReport":
        def opt(key):
            val = obj.get(key)
            return None if val is None else float(val)

        try:
            return cls(
                detected_shots=int(obj["detected_shots"]),
                specified_shots=int(obj["specified_shots"]),
                transition_control=float(obj["transition_control"]),
                intra_subject=float(obj["intra_subject"]),
                intra_background=float(obj["intra_background"]),
                inter_semantic=opt("inter_semantic"),
                inter_visual=opt("inter_visual"),
                gap_semantic=opt("gap_semantic"),
                gap_visual=opt("gap_visual"),
                aesthetic_quality=opt("aesthetic_quality"),
                prompt_consistency=opt("prompt_consistency"),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed metric report JSON: {exc}") from exc

    def to_json(self) -> str:
        return dumps_json(self.to_json_obj())

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
        return cls.from_json_obj(obj)


def eval_report(
    seq: FrameSequence,
    partition_detected: ShotPartition,
    specified_shots: int,
    reference_semantic: Histogram | None = None,
    reference_visual: Histogram | None = None,
    shot_extractor="builtin-v1",
    subject_extractor="builtin-center",
    background_extractor="builtin-border",
    aesthetic_scorer=None,
    prompt_scorer=None,
) -> MetricReport:
    """Assemble the full metric report for one video.

    Inter-shot scores and gaps are omitted (None) for single-shot
    detections.  The aesthetic and prompt-adherence slots accept caller
    callables (seq, partition) -> float and default to not-computable.
    """
    detected = partition_detected.num_shots
    tcs = transition_control_score(detected, specified_shots)
    intra_subject, intra_background = intra_shot_consistency(
        seq, partition_detected, subject_extractor, background_extractor
    )
    inter_semantic = inter_visual = gap_semantic = gap_visual = None
    if detected >= 2:
        inter_semantic = inter_shot_semantic_consistency(
            seq, partition_detected, shot_extractor
        )
        inter_visual = inter_shot_visual_consistency(
            seq, partition_detected, subject_extractor, background_extractor
        )
        if reference_semantic is not None:
            gap_semantic = consistency_gap([inter_semantic], reference_semantic)
        if reference_visual is not None:
            gap_visual = consistency_gap([inter_visual], reference_visual)
    return MetricReport(
        detected_shots=detected,
        specified_shots=specified_shots,
        transition_control=tcs,
        intra_subject=intra_subject,
        intra_background=intra_background,
        inter_semantic=inter_semantic,
        inter_visual=inter_visual,
        gap_semantic=gap_semantic,
        gap_visual=gap_visual,
        aesthetic_quality=None if aesthetic_scorer is None else float(
            aesthetic_scorer(seq, partition_detected)
        ),
        prompt_consistency=None if prompt_scorer is None else float(
            prompt_scorer(seq, partition_detected)
        ),
    )
