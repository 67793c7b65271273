"""Self-contained demonstration that the block-diagonal mask causes
multi-shot structure.

Iterated masked self-attention over noisy per-token features is a
row-stochastic averaging process: tokens that may attend each other pull
toward a common value.  Under a block-diagonal mask each shot converges
to its own consensus color while staying independent of every other
shot; under an all-allowed mask the whole sequence collapses to a single
color.  Rendering the features to frames and running the shot detector
closes the loop: mask present -> the specified shot count is recovered,
mask absent -> one shot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import softmax_rows, _apply_mask
from .errors import ShapeError, ValidationError
from .frameio import FrameSequence
from .masks import AttnMask, TokenLayout, build_block_diagonal_mask, shot_of_token
from .partition import ShotPartition
from .rng import SplitMix64


@dataclass(frozen=True)
class SmoothingConfig:
    """Parameters of the iterated-attention demo."""

    layout: TokenLayout
    iterations: int = 200
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError("iterations must be at least 1")
        if self.temperature <= 0:
            raise ValidationError("temperature must be positive")


def run_smoothing(
    features: np.ndarray, mask: AttnMask, config: SmoothingConfig
) -> np.ndarray:
    """Iterate x <- softmax(x x^T / (temperature * sqrt(d)) + mask) x.

    Each step is a convex within-mask average, so per-dimension spread
    inside any fully connected block never grows.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("features must be (tokens, dim)")
    if x.shape[0] != mask.n:
        raise ShapeError(f"{x.shape[0]} feature rows for mask of size {mask.n}")
    scale = config.temperature * np.sqrt(x.shape[1])
    for _ in range(config.iterations):
        scores = _apply_mask((x @ x.T) / scale, mask)
        x = softmax_rows(scores) @ x
    return x


def default_render(
    token_features: np.ndarray,
    layout: TokenLayout,
    height: int,
    width: int,
    channels: int,
) -> FrameSequence:
    """Map token features to constant-color byte frames.

    Frame f shows the mean feature of its covering slice; the first three
    feature dimensions (cycled if channels exceed them) map affinely to
    channel values via round(255 * v) clamped to 0..255.
    """
    n_frames = layout.n_frames
    p = layout.tokens_per_slice
    pixels = np.empty((n_frames, height, width, channels), dtype=np.uint8)
    for f in range(n_frames):
        s = f // layout.temporal_compression
        vec = token_features[s * p:(s + 1) * p].mean(axis=0)
        color = [
            np.clip(np.rint(255.0 * vec[j % min(3, vec.size)]), 0, 255)
            for j in range(channels)
        ]
        pixels[f] = np.array(color, dtype=np.uint8)[None, None, :]
    return FrameSequence(n_frames, height, width, channels, "byte", pixels)


def demo_multishot_generation(
    partition: ShotPartition,
    config: SmoothingConfig,
    masked: bool = True,
    feature_dim: int = 8,
    height: int = 16,
    width: int = 16,
    channels: int = 3,
    render=default_render,
) -> FrameSequence:
    """Generate a multi-shot video purely from masked attention dynamics.

    Per-token features start at a per-shot anchor color plus noise, both
    drawn from the seed; the block-diagonal mask from `partition` drives
    the smoothing (an all-allowed mask when masked=False).  Deterministic:
    the same arguments always produce byte-identical output.
    """
    partition.require_contiguous()
    layout = config.layout
    if layout.n_frames != partition.n_frames:
        raise ValidationError("layout and partition cover different frame counts")
    rng = SplitMix64(config.seed)
    anchors = rng.uniform(partition.num_shots * feature_dim).reshape(
        partition.num_shots, feature_dim
    )
    n_tokens = layout.n_tokens
    noise = 0.25 * rng.uniform_signed(n_tokens * feature_dim).reshape(n_tokens, feature_dim)
    block_mask = build_block_diagonal_mask(partition, layout)
    token_shot = np.array(
        [shot_of_token(layout, partition, t) for t in range(n_tokens)]
    )
    features = anchors[token_shot] + noise
    mask = block_mask if masked else AttnMask.all_allowed(n_tokens)
    smoothed = run_smoothing(features, mask, config)
    return render(smoothed, layout, height, width, channels)
