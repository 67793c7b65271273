"""Dataset assembly: endpoint-embedding distances, the sequential
split-stitch rules, clip filtering, and dataset records.

Each raw segment carries unit-norm embeddings of its first and last
frames.  Segments are scanned left to right with three thresholds:

    alpha  - a segment whose own endpoints are farther apart than alpha
             changes too much internally and is dropped;
    beta   - a segment may join the open group only when its first frame
             is closer than beta to the previous segment's last frame;
    gamma  - and only when its last frame stays closer than gamma to the
             group's opening frame, keeping the assembled video's
             beginning and end coherent.

Dropping a segment closes the open group, so every group is a run of
consecutive surviving segments.  Defaults: alpha 0.9, beta 0.7, gamma 0.8.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ShapeError, ValidationError
from .frameio import FrameSequence
from .partition import ShotPartition, dumps_json

DEFAULT_ALPHA = 0.9
DEFAULT_BETA = 0.7
DEFAULT_GAMMA = 0.8

_EMB_MAGIC = b"EMBv1"


@dataclass(frozen=True, eq=False)
class Segment:
    """A raw clip: its position, length, and endpoint embeddings."""

    id: int
    first_embed: np.ndarray
    end_embed: np.ndarray
    length_frames: int

    def __post_init__(self):
        if self.length_frames < 1:
            raise ValidationError("segment length must be positive")
        for name in ("first_embed", "end_embed"):
            vec = np.asarray(getattr(self, name), dtype=np.float64)
            if vec.ndim != 1:
                raise ShapeError(f"{name} must be a vector")
            if abs(np.linalg.norm(vec) - 1.0) > 1e-6:
                raise ValidationError(f"{name} must be unit-norm within 1e-6")
            object.__setattr__(self, name, vec)
        if self.first_embed.shape != self.end_embed.shape:
            raise ShapeError("endpoint embeddings must share a dimension")


@dataclass(frozen=True)
class StitchConfig:
    """Thresholds for the split-stitch scan.

    gamma_anchor selects what the gamma check compares the candidate's end
    against: "group-head" (the open group's first segment, i.e. the
    assembled video's beginning) or "pairwise" (the immediately preceding
    segment).
    """

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA
    gamma_anchor: str = "group-head"

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or self.gamma <= 0:
            raise ValidationError("alpha, beta, gamma must be positive")
        if self.gamma_anchor not in ("group-head", "pairwise"):
            raise ConfigError(f"unknown gamma_anchor {self.gamma_anchor!r}")


def endpoint_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two unit vectors (range [0, 2])."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"vector shapes differ: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def split_stitch(
    segments: list[Segment], config: StitchConfig = StitchConfig()
) -> list[tuple[int, int]]:
    """Group consecutive segments into stitched multi-shot videos.

    Returns half-open (start, stop) index ranges over the input order;
    each range is one assembled video.  Segments dropped by the alpha rule
    appear in no range and always terminate the open group.
    """
    groups: list[tuple[int, int]] = []
    open_start: int | None = None
    open_stop = 0
    for i, seg in enumerate(segments):
        if endpoint_distance(seg.first_embed, seg.end_embed) > config.alpha:
            if open_start is not None:
                groups.append((open_start, open_stop))
                open_start = None
            continue
        if open_start is None:
            open_start, open_stop = i, i + 1
            continue
        prev = segments[open_stop - 1]
        anchor = segments[open_start] if config.gamma_anchor == "group-head" else prev
        if (
            endpoint_distance(prev.end_embed, seg.first_embed) < config.beta
            and endpoint_distance(anchor.first_embed, seg.end_embed) < config.gamma
        ):
            open_stop = i + 1
        else:
            groups.append((open_start, open_stop))
            open_start, open_stop = i, i + 1
    if open_start is not None:
        groups.append((open_start, open_stop))
    return groups


@dataclass(frozen=True)
class DatasetRecord:
    """One curated clip: shot labels plus caption slots.

    Caption generation is external; absent captions stay as empty slots
    (one per shot) so annotators can fill them in later.
    """

    clip_id: str
    partition: ShotPartition
    general_caption: str = ""
    shot_captions: tuple[str, ...] = field(default=())
    aesthetic_score: float | None = None

    def __post_init__(self):
        if not self.shot_captions:
            object.__setattr__(self, "shot_captions", ("",) * self.partition.num_shots)
        elif len(self.shot_captions) != self.partition.num_shots:
            raise ValidationError(
                f"{len(self.shot_captions)} shot captions for {self.partition.num_shots} shots"
            )

    @property
    def duration_frames(self) -> int:
        return self.partition.n_frames

    def to_json_obj(self) -> dict:
        return {
            "id": self.clip_id,
            "n_frames": self.partition.n_frames,
            "shots": [{"start": s, "end": e} for s, e in self.partition.shots],
            "gradual_frames": list(self.partition.gradual_frames),
            "general_caption": self.general_caption,
            "shot_captions": list(self.shot_captions),
            "aesthetic_score": self.aesthetic_score,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DatasetRecord":
        try:
            partition = ShotPartition(
                n_frames=int(obj["n_frames"]),
                shots=tuple((int(s["start"]), int(s["end"])) for s in obj["shots"]),
                gradual_frames=tuple(int(g) for g in obj.get("gradual_frames", ())),
            )
            aesthetic = obj.get("aesthetic_score")
            return cls(
                clip_id=str(obj["id"]),
                partition=partition,
                general_caption=str(obj.get("general_caption", "")),
                shot_captions=tuple(str(c) for c in obj.get("shot_captions", ())),
                aesthetic_score=None if aesthetic is None else float(aesthetic),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed dataset record JSON: {exc}") from exc

    def to_json(self) -> str:
        return dumps_json(self.to_json_obj())

    @classmethod
    def from_json(cls, text: str) -> "DatasetRecord":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
        return cls.from_json_obj(obj)


def build_dataset_record(
    seq: FrameSequence,
    partition: ShotPartition,
    clip_id: str = "clip-0",
    general_caption: str = "",
    shot_captions: tuple[str, ...] | None = None,
    aesthetic_score: float | None = None,
) -> DatasetRecord:
    """Assemble a record for one labeled clip."""
    if partition.n_frames != seq.frame_count:
        raise ValidationError(
            f"partition covers {partition.n_frames} frames, sequence has {seq.frame_count}"
        )
    return DatasetRecord(
        clip_id=clip_id,
        partition=partition,
        general_caption=general_caption,
        shot_captions=shot_captions if shot_captions is not None else (),
        aesthetic_score=aesthetic_score,
    )


def filter_clips(
    records: list[DatasetRecord],
    min_duration: int,
    max_duration: int,
    shot_range: tuple[int, int],
    min_aesthetic: float | None = None,
) -> list[DatasetRecord]:
    """Keep records satisfying every provided bound.

    Records without an aesthetic score pass only when no aesthetic floor
    is requested.
    """
    lo, hi = shot_range
    if lo < 1:
        raise ConfigError("shot_range lower bound must be >= 1")
    if lo > hi:
        raise ConfigError(f"shot_range [{lo},{hi}] is empty")
    if min_duration > max_duration:
        raise ConfigError("min_duration exceeds max_duration")
    kept = []
    for rec in records:
        if not min_duration <= rec.duration_frames <= max_duration:
            continue
        if not lo <= rec.partition.num_shots <= hi:
            continue
        if min_aesthetic is not None:
            if rec.aesthetic_score is None or rec.aesthetic_score < min_aesthetic:
                continue
        kept.append(rec)
    return kept


def write_emb(vectors: np.ndarray, path: str | Path) -> None:
    """Write embeddings as EMBv1: magic, u32 count, u32 dim, float32 data."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError("embeddings must be 2-D (count x dim)")
    count, dim = arr.shape
    Path(path).write_bytes(
        _EMB_MAGIC + struct.pack("<II", count, dim) + arr.astype("<f4").tobytes()
    )


def read_emb(path: str | Path) -> np.ndarray:
    """Read an EMBv1 file into a (count, dim) float32 array."""
    data = Path(path).read_bytes()
    if len(data) < len(_EMB_MAGIC) + 8 or data[: len(_EMB_MAGIC)] != _EMB_MAGIC:
        raise FormatError(f"{path}: not an EMBv1 file (bad magic)")
    count, dim = struct.unpack_from("<II", data, len(_EMB_MAGIC))
    payload = data[len(_EMB_MAGIC) + 8:]
    if len(payload) != count * dim * 4:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, expected {count * dim * 4}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(count, dim).astype(np.float32)


def segments_from_json_obj(obj: dict, embeddings: np.ndarray | None = None) -> list[Segment]:
    """Parse the segments JSON schema used by the stitch CLI.

    Layout: {"segments": [{"id", "length_frames", "first_embed": [...],
    "end_embed": [...]}, ...]}.  When an EMBv1 array is supplied, entries
    may instead carry "first_index" / "end_index" row indices into it.
    """

    def vector(entry: dict, key: str) -> np.ndarray:
        if key + "_embed" in entry:
            return np.asarray(entry[key + "_embed"], dtype=np.float64)
        if key + "_index" in entry:
            if embeddings is None:
                raise ValidationError(
                    f"segment uses {key}_index but no embedding file was supplied"
                )
            idx = int(entry[key + "_index"])
            if not 0 <= idx < embeddings.shape[0]:
                raise ValidationError(f"{key}_index {idx} out of range")
            return np.asarray(embeddings[idx], dtype=np.float64)
        raise ValidationError(f"segment needs {key}_embed or {key}_index")

    try:
        return [
            Segment(
                id=int(s.get("id", i)),
                first_embed=vector(s, "first"),
                end_embed=vector(s, "end"),
                length_frames=int(s.get("length_frames", 1)),
            )
            for i, s in enumerate(obj["segments"])
        ]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed segments JSON: {exc}") from exc
