"""Attention-map grouping, intra/inter statistics, and boundary correlation."""

import numpy as np
import pytest

from multishot.analysis import (
    AttnCapture,
    FrameAttentionMap,
    boundary_correlation,
    group_attention_by_frame,
    intra_inter_ratio,
    pearson,
    read_atn,
    write_atn,
)
from multishot.attention import scaled_dot_product_attention
from multishot.errors import NotComputableError, ShapeError, ValidationError
from multishot.masks import TokenLayout, build_block_diagonal_mask
from multishot.partition import ShotPartition
from multishot.rng import SplitMix64

# pearson([1,2,4], [1,3,3]) = 2/sqrt(7), frozen from exact arithmetic
_PEARSON_124_133 = 0.7559289460184544


def _random_capture(seed, layers, heads, layout):
    rng = SplitMix64(seed)
    n = layout.n_tokens
    raw = rng.uniform(layers * heads * n * n).reshape(layers, heads, n, n) + 0.01
    raw /= raw.sum(axis=3, keepdims=True)
    return AttnCapture(raw, layout)


def test_identity_grouping():
    layout = TokenLayout(n_frames=5)
    capture = _random_capture(1, 1, 1, layout)
    fmap = group_attention_by_frame(capture, 0, 0)
    assert np.allclose(fmap.probs, capture.probs[0, 0], atol=1e-12)


def test_uniform_map_stays_uniform():
    layout = TokenLayout(n_frames=3, tokens_per_slice=2)
    n = layout.n_tokens
    uniform = np.full((1, 1, n, n), 1.0 / n)
    fmap = group_attention_by_frame(AttnCapture(uniform, layout), 0, 0)
    assert np.allclose(fmap.probs, 1.0 / 3)


def test_grouping_matches_brute_force():
    layout = TokenLayout(n_frames=2, tokens_per_slice=2)
    capture = _random_capture(7, 2, 3, layout)
    for layer in range(2):
        for head in range(3):
            fmap = group_attention_by_frame(capture, layer, head)
            token_map = capture.probs[layer, head]
            raw = np.zeros((2, 2))
            for f in range(2):
                for g in range(2):
                    cells = [
                        token_map[tau, sigma]
                        for tau in layout.tokens_of_frame(f)
                        for sigma in layout.tokens_of_frame(g)
                    ]
                    raw[f, g] = float(np.mean(cells))
            raw /= raw.sum(axis=1, keepdims=True)
            assert np.allclose(fmap.probs, raw, atol=1e-12)


def test_grouping_index_errors():
    layout = TokenLayout(n_frames=4)
    capture = _random_capture(3, 1, 1, layout)
    with pytest.raises(ValidationError):
        group_attention_by_frame(capture, 1, 0)
    with pytest.raises(ValidationError):
        group_attention_by_frame(capture, 0, 5)


def test_capture_validates_row_sums():
    layout = TokenLayout(n_frames=2)
    bad = np.full((1, 1, 2, 2), 0.6)
    with pytest.raises(ValidationError):
        AttnCapture(bad, layout)


def _block_map(n, boundary, intra, inter):
    probs = np.full((n, n), float(inter))
    probs[:boundary, :boundary] = intra
    probs[boundary:, boundary:] = intra
    return FrameAttentionMap(n, probs)


def test_constant_block_ratio():
    fmap = _block_map(4, 2, 0.4, 0.1)
    partition = ShotPartition.from_boundaries([0, 2, 4])
    intra, inter, ratio = intra_inter_ratio(fmap, partition)
    assert ratio == pytest.approx(4.0, abs=1e-12)


def test_uniform_map_ratio_one():
    fmap = FrameAttentionMap(6, np.full((6, 6), 1.0 / 6))
    partition = ShotPartition.from_boundaries([0, 3, 6])
    _, _, ratio = intra_inter_ratio(fmap, partition)
    assert ratio == pytest.approx(1.0, abs=1e-12)


def test_ratio_construction_target():
    # construct a map whose intra/inter ratio is exactly the target
    target = 26.68
    fmap = _block_map(16, 8, target, 1.0)
    partition = ShotPartition.from_boundaries([0, 8, 16])
    _, _, ratio = intra_inter_ratio(fmap, partition)
    assert ratio == pytest.approx(target, abs=1e-9)


def test_ratio_invariant_under_scaling():
    rng = SplitMix64(4)
    raw = rng.uniform(36).reshape(6, 6) + 0.05
    partition = ShotPartition.from_boundaries([0, 2, 6])
    r1 = intra_inter_ratio(FrameAttentionMap(6, raw), partition)[2]
    r2 = intra_inter_ratio(FrameAttentionMap(6, raw * 37.5), partition)[2]
    assert r1 == pytest.approx(r2, rel=1e-12)


def test_single_shot_ratio_not_computable():
    fmap = FrameAttentionMap(4, np.full((4, 4), 0.25))
    with pytest.raises(NotComputableError):
        intra_inter_ratio(fmap, ShotPartition.from_boundaries([0, 4]))


def test_masked_attention_gives_infinite_ratio_sentinel():
    partition = ShotPartition.from_boundaries([0, 4, 8])
    layout = TokenLayout(n_frames=8)
    mask = build_block_diagonal_mask(partition, layout)
    rng = SplitMix64(9)
    q = rng.uniform(8 * 3).reshape(8, 3)
    v = rng.uniform(8 * 3).reshape(8, 3)
    att = scaled_dot_product_attention(q, q, v, mask)
    capture = AttnCapture(att.probs[None, None], layout)
    fmap = group_attention_by_frame(capture, 0, 0)
    intra, inter, ratio = intra_inter_ratio(fmap, partition)
    assert inter == 0.0
    assert ratio == float("inf")


# ---------------------------------------------------------------------------
# pearson and boundary correlation


def test_pearson_affine():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-12)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_frozen_oracle():
    assert pearson([1, 2, 4], [1, 3, 3]) == pytest.approx(_PEARSON_124_133, abs=1e-12)


def test_pearson_properties():
    rng = SplitMix64(6)
    x = rng.uniform(20)
    y = rng.uniform(20)
    assert pearson(x, y) == pytest.approx(pearson(y, x), abs=1e-15)
    assert pearson(3.7 * x + 1.2, y) == pytest.approx(pearson(x, y), abs=1e-12)


def test_pearson_constant_rejected():
    with pytest.raises(NotComputableError):
        pearson([1.0, 1.0, 1.0], [1, 2, 3])


def test_perfect_binary_alignment():
    # adjacent attention high off-boundary, uniformly low at boundaries
    n = 12
    partition = ShotPartition.from_boundaries([0, 4, 8, 12])
    probs = np.full((n, n), 1e-9)
    for t in range(n - 1):
        probs[t, t + 1] = 0.02 if (t + 1) in (4, 8) else 0.2
    probs[np.arange(n), np.arange(n)] = 0.5
    fmap = FrameAttentionMap(n, probs)
    r = boundary_correlation(fmap, partition)
    assert r == pytest.approx(1.0, abs=1e-9)


def test_random_signal_has_small_correlation():
    # Monte-Carlo: independent a(t) vs a fixed boundary indicator
    n = 100
    partition = ShotPartition.from_boundaries([0, 50, 100])
    rng = SplitMix64(42)
    rs = []
    for _ in range(200):
        probs = rng.uniform(n * n).reshape(n, n) + 1e-6
        fmap = FrameAttentionMap(n, probs)
        rs.append(boundary_correlation(fmap, partition))
    rs = np.asarray(rs)
    assert abs(rs.mean()) < 0.05
    assert np.mean(np.abs(rs)) < 0.15


def test_end_to_end_masked_pipeline_r_equals_one():
    partition = ShotPartition.from_boundaries([0, 8, 16])
    layout = TokenLayout(n_frames=16)
    mask = build_block_diagonal_mask(partition, layout)
    q = np.zeros((16, 4))
    rng = SplitMix64(13)
    v = rng.uniform(16 * 4).reshape(16, 4)
    att = scaled_dot_product_attention(q, q, v, mask)
    capture = AttnCapture(att.probs[None, None], layout)
    fmap = group_attention_by_frame(capture, 0, 0)
    r = boundary_correlation(fmap, partition)
    assert r == pytest.approx(1.0, abs=1e-9)


def test_boundary_correlation_single_shot_rejected():
    fmap = FrameAttentionMap(5, np.full((5, 5), 0.2))
    with pytest.raises(NotComputableError):
        boundary_correlation(fmap, ShotPartition.from_boundaries([0, 5]))


def test_atn_round_trip(tmp_path):
    rng = SplitMix64(31)
    raw = rng.uniform(2 * 2 * 3 * 3).reshape(2, 2, 3, 3).astype(np.float32)
    path = tmp_path / "maps.atn"
    write_atn(raw, path)
    first = path.read_bytes()
    back = read_atn(path)
    assert np.array_equal(back, raw)
    write_atn(back, path)
    assert path.read_bytes() == first


def test_atn_bad_files(tmp_path):
    path = tmp_path / "bad.atn"
    path.write_bytes(b"NOPE1" + b"\x00" * 12)
    from multishot.errors import FormatError

    with pytest.raises(FormatError):
        read_atn(path)
    path.write_bytes(b"ATNv1" + (1).to_bytes(4, "little") * 3 + b"\x00" * 3)
    with pytest.raises(FormatError):
        read_atn(path)
