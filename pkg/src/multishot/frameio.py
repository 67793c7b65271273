"""Frame sequences: a purpose-built binary format, synthetic fixtures, and
per-frame feature extraction.

The CTF container stores decoded frames with no codec dependencies:

    bytes 0..4   magic "CTFv1"
    bytes 5..24  five little-endian uint32: frame_count, height, width,
                 channels, dtype tag (0 = byte, 1 = float32)
    bytes 25..   raw pixel payload, frame-major then row-major

Byte sequences hold values 0..255; float32 sequences must be finite and
are treated as lying in [0, 1] wherever a value range is needed
(histogram binning, rendering).  Reference and generated material must
share resolution and preprocessing; nothing here resamples or converts
color spaces.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, FormatError, ShapeError, ValidationError
from .partition import ShotPartition
from .rng import SplitMix64

_MAGIC = b"CTFv1"
_HEADER = struct.Struct("<IIIII")
_DTYPE_TAGS = {"byte": 0, "float32": 1}
_TAG_DTYPES = {0: "byte", 1: "float32"}
_NP_DTYPES = {"byte": np.uint8, "float32": np.float32}


@dataclass(frozen=True)
class FrameSequence:
    """Decoded video: frames of fixed spatial dimensions.

    `pixels` has shape (frame_count, height, width, channels) and dtype
    uint8 for "byte" or float32 for "float32".
    """

    frame_count: int
    height: int
    width: int
    channels: int
    dtype: str
    pixels: np.ndarray

    def __post_init__(self):
        for name in ("frame_count", "height", "width", "channels"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.dtype not in _DTYPE_TAGS:
            raise ValidationError(f"unknown dtype {self.dtype!r}")
        expected = (self.frame_count, self.height, self.width, self.channels)
        pix = np.ascontiguousarray(self.pixels, dtype=_NP_DTYPES[self.dtype])
        if pix.size != int(np.prod(expected)):
            raise ValidationError(
                f"pixel count {pix.size} does not match dimensions {expected}"
            )
        pix = pix.reshape(expected)
        if self.dtype == "float32" and not np.all(np.isfinite(pix)):
            raise ValidationError("float32 pixels must be finite")
        object.__setattr__(self, "pixels", pix)

    @classmethod
    def from_array(cls, pixels: np.ndarray, dtype: str | None = None) -> "FrameSequence":
        """Wrap an (N, H, W, C) array, inferring the dtype tag if omitted."""
        arr = np.asarray(pixels)
        if arr.ndim != 4:
            raise ValidationError("pixel array must have shape (frames, height, width, channels)")
        if dtype is None:
            dtype = "byte" if arr.dtype == np.uint8 else "float32"
        n, h, w, c = arr.shape
        return cls(n, h, w, c, dtype, arr)

    def value_range(self) -> tuple[float, float]:
        """Nominal value range of the dtype (used for binning and clamping)."""
        return (0.0, 255.0) if self.dtype == "byte" else (0.0, 1.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameSequence):
            return NotImplemented
        return (
            (self.frame_count, self.height, self.width, self.channels, self.dtype)
            == (other.frame_count, other.height, other.width, other.channels, other.dtype)
            and np.array_equal(self.pixels, other.pixels)
        )


def write_ctf(seq: FrameSequence, path: str | Path) -> None:
    """Write `seq` to `path` in the CTF layout described in the module docs."""
    header = _HEADER.pack(
        seq.frame_count, seq.height, seq.width, seq.channels, _DTYPE_TAGS[seq.dtype]
    )
    if seq.dtype == "byte":
        payload = seq.pixels.tobytes()
    else:
        payload = seq.pixels.astype("<f4").tobytes()
    Path(path).write_bytes(_MAGIC + header + payload)


def read_ctf(path: str | Path) -> FrameSequence:
    """Read a CTF file; the result round-trips with write_ctf byte-for-byte."""
    data = Path(path).read_bytes()
    if len(data) < len(_MAGIC) + _HEADER.size or data[: len(_MAGIC)] != _MAGIC:
        raise FormatError(f"{path}: not a CTF file (bad magic)")
    n, h, w, c, tag = _HEADER.unpack_from(data, len(_MAGIC))
    if tag not in _TAG_DTYPES:
        raise FormatError(f"{path}: unknown dtype tag {tag}")
    dtype = _TAG_DTYPES[tag]
    itemsize = 1 if dtype == "byte" else 4
    expected = n * h * w * c * itemsize
    payload = data[len(_MAGIC) + _HEADER.size:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
        )
    if dtype == "byte":
        pixels = np.frombuffer(payload, dtype=np.uint8)
    else:
        pixels = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    try:
        return FrameSequence(n, h, w, c, dtype, pixels.reshape(n, h, w, c).copy())
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class ShotSpec:
    """One synthetic shot: a base color with optional linear drift and noise."""

    length_frames: int
    base_color: tuple[float, ...]
    noise_amplitude: float = 0.0
    drift_per_frame: tuple[float, ...] = ()


@dataclass(frozen=True)
class GradualSpan:
    """A crossfade straddling the shot boundary at frame index `position`."""

    position: int
    crossfade_frames: int


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a deterministic multi-shot fixture.

    The generated video is a pure function of this spec: all randomness
    comes from SplitMix64 seeded with `seed`.
    """

    shots: tuple[ShotSpec, ...]
    height: int
    width: int
    channels: int
    seed: int = 0
    gradual_spans: tuple[GradualSpan, ...] = field(default=())
    dtype: str = "byte"

    def __post_init__(self):
        if not self.shots:
            raise ValidationError("need at least one shot spec")
        total = sum(s.length_frames for s in self.shots)
        if total < 2:
            raise ValidationError("total length must be at least 2 frames")
        for s in self.shots:
            if s.length_frames < 1:
                raise ValidationError("shot length must be positive")
            if s.noise_amplitude < 0:
                raise ValidationError("noise amplitude must be nonnegative")
            if len(s.base_color) != self.channels:
                raise ValidationError("base_color arity must match channel count")
            if s.drift_per_frame and len(s.drift_per_frame) != self.channels:
                raise ValidationError("drift arity must match channel count")
        boundaries = self.boundaries()
        interior = set(boundaries[1:-1])
        for span in self.gradual_spans:
            if span.position not in interior:
                raise ValidationError(f"gradual span position {span.position} is not an interior boundary")
            if span.crossfade_frames < 0:
                raise ValidationError("crossfade_frames must be nonnegative")
            m = boundaries.index(span.position)
            left_len = self.shots[m - 1].length_frames
            right_len = self.shots[m].length_frames
            if span.crossfade_frames >= min(left_len, right_len):
                raise ValidationError("crossfade must be shorter than both adjacent shots")

    def boundaries(self) -> list[int]:
        bs = [0]
        for s in self.shots:
            bs.append(bs[-1] + s.length_frames)
        return bs

    def to_json_obj(self) -> dict:
        return {
            "shots": [
                {
                    "length_frames": s.length_frames,
                    "base_color": list(s.base_color),
                    "noise_amplitude": s.noise_amplitude,
                    "drift_per_frame": list(s.drift_per_frame),
                }
                for s in self.shots
            ],
            "gradual_spans": [
                {"position": g.position, "crossfade_frames": g.crossfade_frames}
                for g in self.gradual_spans
            ],
            "seed": self.seed,
            "height": self.height,
            "width": self.width,
            "channels": self.channels,
            "dtype": self.dtype,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SyntheticSpec":
        try:
            shots = tuple(
                ShotSpec(
                    length_frames=int(s["length_frames"]),
                    base_color=tuple(float(v) for v in s["base_color"]),
                    noise_amplitude=float(s.get("noise_amplitude", 0.0)),
                    drift_per_frame=tuple(float(v) for v in s.get("drift_per_frame", ())),
                )
                for s in obj["shots"]
            )
            spans = tuple(
                GradualSpan(int(g["position"]), int(g["crossfade_frames"]))
                for g in obj.get("gradual_spans", ())
            )
            return cls(
                shots=shots,
                gradual_spans=spans,
                seed=int(obj.get("seed", 0)),
                height=int(obj["height"]),
                width=int(obj["width"]),
                channels=int(obj["channels"]),
                dtype=str(obj.get("dtype", "byte")),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed synthetic spec JSON: {exc}") from exc


def _shot_signal(spec: SyntheticSpec, shot_index: int, local_t: float) -> np.ndarray:
    """Noise-free color of shot `shot_index` at (possibly fractional or
    negative) local frame offset `local_t`."""
    shot = spec.shots[shot_index]
    base = np.asarray(shot.base_color, dtype=np.float64)
    drift = (
        np.asarray(shot.drift_per_frame, dtype=np.float64)
        if shot.drift_per_frame
        else np.zeros(spec.channels)
    )
    return base + local_t * drift


def gen_synthetic_multishot(spec: SyntheticSpec) -> tuple[FrameSequence, ShotPartition]:
    """Render a deterministic multi-shot fixture with known ground truth.

    Within each shot, frame t is base_color + t * drift plus uniform noise
    in +/- noise_amplitude, clamped to the dtype range.  For each gradual
    span, the crossfade_frames frames straddling the boundary (starting at
    position - ceil(crossfade/2)) are linear blends of the two adjacent
    shot signals with weights (k+1)/(crossfade+1); noise is added after
    blending, using the amplitude of the shot that owns the frame.  The
    returned partition carries the intended boundaries, with blend frames
    listed in its gradual_frames instead of belonging to any shot.
    """
    boundaries = spec.boundaries()
    n_frames = boundaries[-1]
    lo, hi = (0.0, 255.0) if spec.dtype == "byte" else (0.0, 1.0)

    frame_shot = np.empty(n_frames, dtype=np.int64)
    for m in range(len(spec.shots)):
        frame_shot[boundaries[m]:boundaries[m + 1]] = m

    signal = np.empty((n_frames, spec.channels), dtype=np.float64)
    for t in range(n_frames):
        m = frame_shot[t]
        signal[t] = _shot_signal(spec, m, t - boundaries[m])

    gradual: list[int] = []
    for span in spec.gradual_spans:
        if span.crossfade_frames == 0:
            continue
        cf = span.crossfade_frames
        m = boundaries.index(span.position)  # index of the right shot
        start = span.position - (cf + 1) // 2
        for k in range(cf):
            t = start + k
            w = (k + 1) / (cf + 1)
            left = _shot_signal(spec, m - 1, t - boundaries[m - 1])
            right = _shot_signal(spec, m, t - boundaries[m])
            signal[t] = (1.0 - w) * left + w * right
            gradual.append(t)

    rng = SplitMix64(spec.seed)
    amp = np.array([spec.shots[frame_shot[t]].noise_amplitude for t in range(n_frames)])
    noise = rng.uniform_signed(n_frames * spec.height * spec.width * spec.channels)
    noise = noise.reshape(n_frames, spec.height, spec.width, spec.channels)
    noise *= amp[:, None, None, None]

    values = signal[:, None, None, :] + noise
    values = np.clip(values, lo, hi)
    if spec.dtype == "byte":
        pixels = np.rint(values).astype(np.uint8)
    else:
        pixels = values.astype(np.float32)

    seq = FrameSequence(n_frames, spec.height, spec.width, spec.channels, spec.dtype, pixels)
    gradual_set = set(gradual)
    shots = []
    for m in range(len(spec.shots)):
        members = [t for t in range(boundaries[m], boundaries[m + 1]) if t not in gradual_set]
        if not members:
            raise ValidationError(f"crossfades consume shot {m} entirely")
        shots.append((members[0], members[-1] + 1))
    partition = ShotPartition(
        n_frames=n_frames, shots=tuple(shots), gradual_frames=tuple(sorted(gradual_set))
    )
    return seq, partition


# ---------------------------------------------------------------------------
# Feature extraction


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """One unit-norm feature vector per frame."""

    frame_count: int
    dim: int
    vectors: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=np.float64)
        if vec.shape != (self.frame_count, self.dim):
            raise ShapeError(f"vectors shape {vec.shape} != ({self.frame_count}, {self.dim})")
        norms = np.linalg.norm(vec, axis=1)
        if not np.all(np.abs(norms - 1.0) <= 1e-6):
            raise ValidationError("feature vectors must be unit-norm within 1e-6")
        object.__setattr__(self, "vectors", vec)

    @classmethod
    def from_array(cls, vectors: np.ndarray, normalize: bool = False) -> "FeatureSequence":
        vec = np.asarray(vectors, dtype=np.float64)
        if vec.ndim != 2:
            raise ShapeError("feature array must be 2-D (frames x dim)")
        if normalize:
            norms = np.linalg.norm(vec, axis=1, keepdims=True)
            if np.any(norms == 0):
                raise ValidationError("cannot normalize a zero feature vector")
            vec = vec / norms
        return cls(vec.shape[0], vec.shape[1], vec)


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of an (H, W, C) float array using half-pixel centers."""
    h, w = img.shape[:2]
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def _center_bounds(h: int, w: int) -> tuple[int, int, int, int]:
    """Bounds of the central 50% x 50% crop (at least one pixel each way)."""
    ch = max(1, h // 2)
    cw = max(1, w // 2)
    top = (h - ch) // 2
    left = (w - cw) // 2
    return top, top + ch, left, left + cw


def _frame_descriptor(frame: np.ndarray, value_hi: float) -> np.ndarray:
    """Histogram + coarse-layout descriptor of one (H, W, C) float frame.

    Concatenates a 16-bin-per-channel normalized histogram with an 8x8
    bilinear downsample (values scaled to [0, 1]), then L2-normalizes.
    """
    h, w, c = frame.shape
    scaled = np.clip(frame / value_hi, 0.0, 1.0)
    bins = 16
    hist = np.empty(bins * c, dtype=np.float64)
    idx = np.minimum((scaled * bins).astype(np.int64), bins - 1)
    for ch in range(c):
        hist[ch * bins:(ch + 1) * bins] = np.bincount(
            idx[:, :, ch].ravel(), minlength=bins
        )
    hist /= h * w
    down = _bilinear_resize(scaled, 8, 8).ravel()
    vec = np.concatenate([hist, down])
    return vec / np.linalg.norm(vec)


def _region_full(frame: np.ndarray, value_hi: float) -> np.ndarray:
    return _frame_descriptor(frame, value_hi)


def _region_center(frame: np.ndarray, value_hi: float) -> np.ndarray:
    t, b, l, r = _center_bounds(frame.shape[0], frame.shape[1])
    return _frame_descriptor(frame[t:b, l:r], value_hi)


def _region_border(frame: np.ndarray, value_hi: float) -> np.ndarray:
    """Descriptor of the border region (complement of the central crop).

    The histogram counts border pixels only; for the downsample the central
    crop is filled with the border's per-channel mean so the 8x8 grid stays
    rectangular while carrying no center content.
    """
    h, w, c = frame.shape
    t, b, l, r = _center_bounds(h, w)
    if t == 0 and b == h and l == 0 and r == w:
        return _frame_descriptor(frame, value_hi)
    mask = np.ones((h, w), dtype=bool)
    mask[t:b, l:r] = False
    border_pixels = frame[mask]
    scaled = np.clip(border_pixels / value_hi, 0.0, 1.0)
    bins = 16
    hist = np.empty(bins * c, dtype=np.float64)
    idx = np.minimum((scaled * bins).astype(np.int64), bins - 1)
    for ch in range(c):
        hist[ch * bins:(ch + 1) * bins] = np.bincount(idx[:, ch], minlength=bins)
    hist /= border_pixels.shape[0]
    filled = frame.astype(np.float64).copy()
    filled[t:b, l:r] = border_pixels.mean(axis=0)
    down = _bilinear_resize(np.clip(filled / value_hi, 0.0, 1.0), 8, 8).ravel()
    vec = np.concatenate([hist, down])
    return vec / np.linalg.norm(vec)


_EXTRACTORS: dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    "builtin-v1": _region_full,
    "builtin-center": _region_center,
    "builtin-border": _region_border,
}


def available_extractors() -> tuple[str, ...]:
    return tuple(sorted(_EXTRACTORS))


def register_extractor(name: str, fn: Callable[[np.ndarray, float], np.ndarray]) -> None:
    """Register a custom per-frame extractor under `name`.

    `fn` receives one (H, W, C) float64 frame and the dtype's upper value
    bound, and must return a 1-D unit-norm vector deterministically.
    Built-in names cannot be replaced.
    """
    if name in _EXTRACTORS:
        raise ConfigError(f"extractor {name!r} is already registered")
    _EXTRACTORS[name] = fn


def extract_features(seq: FrameSequence, extractor: str = "builtin-v1") -> FeatureSequence:
    """Per-frame unit-norm features from one of the built-in extractors.

    "builtin-v1" describes the whole frame, "builtin-center" the central
    50% x 50% crop (subject proxy), "builtin-border" the complementary
    border region (background proxy).
    """
    fn = _EXTRACTORS.get(extractor)
    if fn is None:
        raise ConfigError(
            f"unknown extractor {extractor!r}; available: {', '.join(available_extractors())}"
        )
    _, hi = seq.value_range()
    frames = seq.pixels.astype(np.float64)
    vectors = np.stack([fn(frames[t], hi) for t in range(seq.frame_count)])
    return FeatureSequence(seq.frame_count, vectors.shape[1], vectors)
