"""Attention masks that realize multi-shot structure over token layouts.

Tokens map to frames through a TokenLayout: the frame axis is compressed
by a factor c into latent temporal slices, each contributing p tokens, so
token tau belongs to slice tau // p, which covers frames
[s*c, min((s+1)*c, n_frames)).  A slice straddling a shot boundary is
assigned to the shot of its first covered frame.

Masks are boolean "allowed" matrices (True = may attend).  Their additive
form is 0 for allowed and an effectively minus-infinite penalty for
disallowed entries; the numeric materialization lives in the attention
module so the block structure stays exact.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ValidationError
from .partition import ShotPartition

_MSK_MAGIC = b"MSKv1"


@dataclass(frozen=True)
class TokenLayout:
    """Mapping between attention tokens and video frames.

    Attributes:
        n_frames: frames covered by the token sequence.
        temporal_compression: frames per latent temporal slice (c).
        tokens_per_slice: tokens contributed by each slice (p).
    """

    n_frames: int
    temporal_compression: int = 1
    tokens_per_slice: int = 1

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValidationError("n_frames must be positive")
        if self.temporal_compression < 1:
            raise ValidationError("temporal_compression must be positive")
        if self.tokens_per_slice < 1:
            raise ValidationError("tokens_per_slice must be positive")

    @property
    def n_slices(self) -> int:
        return -(-self.n_frames // self.temporal_compression)

    @property
    def n_tokens(self) -> int:
        return self.n_slices * self.tokens_per_slice

    def slice_of_token(self, token: int) -> int:
        if not 0 <= token < self.n_tokens:
            raise ValidationError(f"token {token} out of range [0, {self.n_tokens})")
        return token // self.tokens_per_slice

    def tokens_of_frame(self, frame: int) -> range:
        """Tokens of the slice covering `frame`."""
        if not 0 <= frame < self.n_frames:
            raise ValidationError(f"frame {frame} out of range")
        s = frame // self.temporal_compression
        return range(s * self.tokens_per_slice, (s + 1) * self.tokens_per_slice)


def frame_of_token(layout: TokenLayout, token: int) -> int:
    """First frame covered by the token's slice."""
    return layout.slice_of_token(token) * layout.temporal_compression


def shot_of_token(layout: TokenLayout, partition: ShotPartition, token: int) -> int:
    """Shot owning the token; straddling slices go to their first frame's shot."""
    if partition.n_frames != layout.n_frames:
        raise ValidationError(
            f"partition covers {partition.n_frames} frames, layout {layout.n_frames}"
        )
    partition.require_contiguous()
    shot = partition.shot_of_frame(frame_of_token(layout, token))
    assert shot is not None  # contiguous partitions have no unowned frames
    return shot


def _token_shots(layout: TokenLayout, partition: ShotPartition) -> np.ndarray:
    return np.array(
        [shot_of_token(layout, partition, t) for t in range(layout.n_tokens)],
        dtype=np.int64,
    )


@dataclass(frozen=True, eq=False)
class AttnMask:
    """Boolean attention mask; True means the query may attend the key."""

    n: int
    allowed: np.ndarray

    def __post_init__(self):
        allowed = np.asarray(self.allowed, dtype=bool)
        if allowed.shape != (self.n, self.n):
            raise ValidationError(f"allowed must be {self.n}x{self.n}")
        if not np.all(np.diagonal(allowed)):
            raise ValidationError("diagonal entries must be allowed")
        object.__setattr__(self, "allowed", allowed)

    @classmethod
    def all_allowed(cls, n: int) -> "AttnMask":
        return cls(n, np.ones((n, n), dtype=bool))

    def additive(self, neg_value: float) -> np.ndarray:
        """Additive form: 0 where allowed, `neg_value` where disallowed."""
        return np.where(self.allowed, 0.0, neg_value)


def build_block_diagonal_mask(partition: ShotPartition, layout: TokenLayout) -> AttnMask:
    """Mask allowing attention only between tokens of the same shot.

    allowed[i, j] is True exactly when tokens i and j belong to the same
    shot; the matrix is symmetric and block-diagonal in token order.
    """
    shots = _token_shots(layout, partition)
    return AttnMask(layout.n_tokens, shots[:, None] == shots[None, :])


def apply_visible_first_frame(mask: AttnMask, layout: TokenLayout | None = None) -> AttnMask:
    """Make the first temporal slice visible as keys to every query.

    All columns belonging to slice 0 (the first `tokens_per_slice` tokens;
    one token when no layout is given) become allowed for every row; all
    other entries are unchanged.  Idempotent.
    """
    p = layout.tokens_per_slice if layout is not None else 1
    if mask.n < p:
        raise ValidationError("mask smaller than one slice")
    allowed = mask.allowed.copy()
    allowed[:, :p] = True
    return AttnMask(mask.n, allowed)


def build_text_video_mask(
    partition: ShotPartition,
    layout: TokenLayout,
    shot_text_spans: list[tuple[int, int]],
) -> AttnMask:
    """Cross-modal mask pairing each shot's video tokens with its text span.

    Token order is text tokens [0, n_text) followed by video tokens.  A
    video token and a text token may attend each other only when the text
    token lies in the span of the video token's shot; text-text and
    video-video entries are all allowed (this mask is meant for the
    attention layers that mix the two modalities, not for video
    self-attention).
    """
    spans = [(int(a), int(b)) for a, b in shot_text_spans]
    if len(spans) != partition.num_shots:
        raise ValidationError(
            f"need one text span per shot: got {len(spans)} for {partition.num_shots} shots"
        )
    for start, end in spans:
        if start < 0 or end < start:
            raise ValidationError(f"bad span [{start},{end})")
        if start == end:
            warnings.warn(
                f"empty text span [{start},{end}): its shot's video tokens attend no text",
                stacklevel=2,
            )
    for (_, e1), (s2, _) in zip(sorted(spans), sorted(spans)[1:]):
        if s2 < e1:
            raise ValidationError("text spans must be disjoint")

    n_text = max((end for _, end in spans), default=0)
    n_video = layout.n_tokens
    n = n_text + n_video
    allowed = np.ones((n, n), dtype=bool)
    token_shots = _token_shots(layout, partition)
    text_allowed = np.zeros((n_video, n_text), dtype=bool)
    for m, (start, end) in enumerate(spans):
        text_allowed[token_shots == m, start:end] = True
    allowed[n_text:, :n_text] = text_allowed
    allowed[:n_text, n_text:] = text_allowed.T
    return AttnMask(n, allowed)


_PRESETS = ("unet-last6", "dit-mid", "all", "none")


@dataclass(frozen=True)
class LayerPolicy:
    """Which attention layers receive the shot mask."""

    total_layers: int
    masked_layers: frozenset[int]

    def __post_init__(self):
        if self.total_layers < 1:
            raise ValidationError("total_layers must be positive")
        layers = frozenset(int(i) for i in self.masked_layers)
        if any(i < 0 or i >= self.total_layers for i in layers):
            raise ValidationError("masked layer index out of range")
        object.__setattr__(self, "masked_layers", layers)

    def to_json_obj(self) -> dict:
        """Policies serialize as explicit index lists so ablation configs
        are reproducible without preset lookups."""
        return {
            "total_layers": self.total_layers,
            "masked_layers": sorted(self.masked_layers),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "LayerPolicy":
        try:
            return cls(
                total_layers=int(obj["total_layers"]),
                masked_layers=frozenset(int(i) for i in obj["masked_layers"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed layer policy JSON: {exc}") from exc

    @classmethod
    def from_preset(
        cls,
        preset: str,
        total_layers: int,
        mid_range: tuple[int, int] | None = None,
    ) -> "LayerPolicy":
        """Build a policy from a named preset.

        "unet-last6" masks the last six layers; "dit-mid" masks a
        contiguous middle range (inclusive), defaulting to layers 7..28;
        "all" and "none" are what they say.  mid_range overrides the
        dit-mid default.
        """
        if preset == "all":
            return cls(total_layers, frozenset(range(total_layers)))
        if preset == "none":
            return cls(total_layers, frozenset())
        if preset == "unet-last6":
            if total_layers < 6:
                raise ConfigError(f"unet-last6 needs >= 6 layers, got {total_layers}")
            return cls(total_layers, frozenset(range(total_layers - 6, total_layers)))
        if preset == "dit-mid":
            lo, hi = mid_range if mid_range is not None else (7, 28)
            if not 0 <= lo <= hi < total_layers:
                raise ConfigError(
                    f"dit-mid range [{lo},{hi}] does not fit in {total_layers} layers"
                )
            return cls(total_layers, frozenset(range(lo, hi + 1)))
        raise ConfigError(f"unknown layer preset {preset!r}; known: {', '.join(_PRESETS)}")


def select_masked_layers(policy: LayerPolicy, layer: int) -> bool:
    """True when `layer` should apply the shot mask under `policy`."""
    if not 0 <= layer < policy.total_layers:
        raise ValidationError(f"layer {layer} out of range [0, {policy.total_layers})")
    return layer in policy.masked_layers


def write_msk(mask: AttnMask, path: str | Path) -> None:
    """Write a mask as MSKv1: magic, little-endian u32 n, n*n bytes of {0,1}."""
    payload = mask.allowed.astype(np.uint8).tobytes()
    Path(path).write_bytes(_MSK_MAGIC + struct.pack("<I", mask.n) + payload)


def read_msk(path: str | Path) -> AttnMask:
    data = Path(path).read_bytes()
    if len(data) < len(_MSK_MAGIC) + 4 or data[: len(_MSK_MAGIC)] != _MSK_MAGIC:
        raise FormatError(f"{path}: not an MSKv1 file (bad magic)")
    (n,) = struct.unpack_from("<I", data, len(_MSK_MAGIC))
    payload = data[len(_MSK_MAGIC) + 4:]
    if len(payload) != n * n:
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, expected {n * n}")
    raw = np.frombuffer(payload, dtype=np.uint8)
    if np.any(raw > 1):
        raise FormatError(f"{path}: mask bytes must be 0 or 1")
    try:
        return AttnMask(n, raw.reshape(n, n).astype(bool))
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc
