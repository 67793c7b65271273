"""Shot partitions: which frames belong to which shot.

A partition splits the frame axis [0, n_frames) into M >= 1 ordered,
disjoint half-open shots.  Frames belonging to no shot (removed gradual
transitions) are carried in `gradual_frames`; shots plus gradual frames
always cover the frame axis exactly.  Indices are zero-based throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ValidationError

Shot = tuple[int, int]


@dataclass(frozen=True)
class ShotPartition:
    """Ordered disjoint shots over [0, n_frames), with optional gradual frames.

    Attributes:
        n_frames: total number of frames covered.
        shots: tuple of (start, end) half-open intervals, ascending.
        gradual_frames: sorted frame indices assigned to no shot.
    """

    n_frames: int
    shots: tuple[Shot, ...]
    gradual_frames: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValidationError("partition needs at least one frame")
        if not self.shots:
            raise ValidationError("partition needs at least one shot")
        object.__setattr__(self, "shots", tuple((int(a), int(b)) for a, b in self.shots))
        object.__setattr__(
            self, "gradual_frames", tuple(sorted(int(g) for g in self.gradual_frames))
        )
        prev_end = 0
        covered = 0
        for start, end in self.shots:
            if not 0 <= start < end <= self.n_frames:
                raise ValidationError(f"shot [{start},{end}) out of range for {self.n_frames} frames")
            if start < prev_end:
                raise ValidationError("shots must be ordered and disjoint")
            prev_end = end
            covered += end - start
        gradual = set(self.gradual_frames)
        if len(gradual) != len(self.gradual_frames):
            raise ValidationError("duplicate gradual frame indices")
        for g in gradual:
            if not 0 <= g < self.n_frames:
                raise ValidationError(f"gradual frame {g} out of range")
            if self.shot_of_frame(g) is not None:
                raise ValidationError(f"gradual frame {g} lies inside a shot")
        if covered + len(gradual) != self.n_frames:
            raise ValidationError("shots plus gradual frames must cover every frame exactly once")

    @classmethod
    def from_boundaries(cls, boundaries: list[int] | tuple[int, ...],
                        gradual_frames: tuple[int, ...] = ()) -> "ShotPartition":
        """Build from boundary indices [0, i_2, ..., n_frames].

        Boundaries must be strictly increasing, start at 0, and end at the
        frame count; shot m spans [boundaries[m], boundaries[m+1]).
        """
        bs = [int(b) for b in boundaries]
        if len(bs) < 2:
            raise ValidationError("need at least two boundaries")
        if bs[0] != 0:
            raise ValidationError("first boundary must be 0")
        if any(b <= a for a, b in zip(bs, bs[1:])):
            raise ValidationError("boundaries must be strictly increasing")
        if gradual_frames:
            raise ValidationError("boundary form cannot carry gradual frames; pass shots explicitly")
        shots = tuple(zip(bs[:-1], bs[1:]))
        return cls(n_frames=bs[-1], shots=shots)

    @property
    def num_shots(self) -> int:
        return len(self.shots)

    @property
    def is_contiguous(self) -> bool:
        """True when the shots alone tile [0, n_frames) with no gaps."""
        return not self.gradual_frames and self.shots[0][0] == 0 and all(
            a[1] == b[0] for a, b in zip(self.shots, self.shots[1:])
        ) and self.shots[-1][1] == self.n_frames

    @property
    def boundaries(self) -> tuple[int, ...]:
        """Boundary indices i_1..i_{M+1}; only defined for contiguous partitions."""
        if not self.is_contiguous:
            raise ValidationError("partition has gradual gaps; boundaries are undefined")
        return (0,) + tuple(end for _, end in self.shots)

    def require_contiguous(self) -> "ShotPartition":
        if not self.is_contiguous:
            raise ValidationError(
                "operation requires a gap-free partition; drop the gradual "
                "frames first (ShotPartition.compact)"
            )
        return self

    def compact(self) -> "ShotPartition":
        """Re-index the shots over the kept frames only.

        Removed gradual frames vanish from the frame axis, so the result
        is a contiguous partition over n_frames - len(gradual_frames)
        frames, mirroring a clip whose transition frames were cut out.
        """
        if self.is_contiguous:
            return self
        shots = []
        offset = 0
        for start, end in self.shots:
            length = end - start
            shots.append((offset, offset + length))
            offset += length
        return ShotPartition(n_frames=offset, shots=tuple(shots))

    def shot_of_frame(self, frame: int) -> int | None:
        """Index of the shot containing `frame`, or None for gradual frames."""
        if not 0 <= frame < self.n_frames:
            raise ValidationError(f"frame {frame} out of range")
        for m, (start, end) in enumerate(self.shots):
            if start <= frame < end:
                return m
        return None

    def to_json_obj(self) -> dict:
        return {
            "n_frames": self.n_frames,
            "shots": [{"start": s, "end": e} for s, e in self.shots],
            "gradual_frames": list(self.gradual_frames),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ShotPartition":
        try:
            shots = tuple((int(s["start"]), int(s["end"])) for s in obj["shots"])
            return cls(
                n_frames=int(obj["n_frames"]),
                shots=shots,
                gradual_frames=tuple(int(g) for g in obj.get("gradual_frames", ())),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed partition JSON: {exc}") from exc


def dumps_json(obj: dict) -> str:
    """Canonical JSON used for every artifact this package writes."""
    return json.dumps(obj, indent=2) + "\n"


def partition_to_json(partition: ShotPartition) -> str:
    return dumps_json(partition.to_json_obj())


def partition_from_json(text: str) -> ShotPartition:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from exc
    return ShotPartition.from_json_obj(obj)
