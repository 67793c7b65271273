"""CLI surface: subcommand flows, exit codes, config handling."""

import json

import numpy as np
import pytest

from multishot.analysis import write_atn
from multishot.attention import scaled_dot_product_attention
from multishot.cli import main
from multishot.frameio import read_ctf
from multishot.masks import TokenLayout, build_block_diagonal_mask, read_msk
from multishot.partition import ShotPartition, partition_to_json
from multishot.rng import SplitMix64


@pytest.fixture()
def spec_file(tmp_path):
    spec = {
        "shots": [
            {"length_frames": 8, "base_color": [20, 40, 60], "noise_amplitude": 2.0},
            {"length_frames": 8, "base_color": [200, 180, 160], "noise_amplitude": 2.0},
        ],
        "gradual_spans": [],
        "seed": 7,
        "height": 8,
        "width": 8,
        "channels": 3,
        "dtype": "byte",
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    return path


def test_gen_and_segment_round_trip(tmp_path, spec_file):
    video = tmp_path / "out.ctf"
    labels = tmp_path / "gt.json"
    assert main(["gen-synthetic", "--spec", str(spec_file), "-o", str(video), "--labels", str(labels)]) == 0

    out_labels = tmp_path / "detected.json"
    assert main(["segment", str(video), "-o", str(out_labels)]) == 0
    detected = json.loads(out_labels.read_text())
    assert [(s["start"], s["end"]) for s in detected["shots"]] == [(0, 8), (8, 16)]
    assert detected["config"]["cut_threshold"] == 27.0


def test_segment_bad_video_exits_3(tmp_path):
    bad = tmp_path / "bad.ctf"
    bad.write_bytes(b"not a ctf file")
    assert main(["segment", str(bad), "-o", str(tmp_path / "x.json")]) == 3


def test_segment_missing_file_exits_3(tmp_path):
    assert main(["segment", str(tmp_path / "nope.ctf"), "-o", str(tmp_path / "x.json")]) == 3


def test_unknown_flag_exits_2(tmp_path, spec_file, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["segment", "--definitely-not-a-flag"])
    assert exc.value.code == 2


def test_stitch_command(tmp_path):
    a = [1.0, 0.0, 0.0]
    segments = {
        "segments": [
            {"id": 0, "length_frames": 10, "first_embed": a, "end_embed": a},
            {"id": 1, "length_frames": 12, "first_embed": a, "end_embed": a},
        ]
    }
    seg_path = tmp_path / "segments.json"
    seg_path.write_text(json.dumps(segments))
    out = tmp_path / "groups.json"
    assert main(["stitch", "--segments", str(seg_path), "-o", str(out)]) == 0
    groups = json.loads(out.read_text())
    assert groups["groups"] == [{"start": 0, "end": 2}]
    assert groups["segment_ids"] == [[0, 1]]
    assert groups["config"]["alpha"] == 0.9


def test_stitch_with_emb_indices(tmp_path):
    from multishot.curation import write_emb

    emb = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]], dtype=np.float32)
    emb_path = tmp_path / "vectors.emb"
    write_emb(emb, emb_path)
    segments = {
        "segments": [
            {"id": 0, "length_frames": 5, "first_index": 0, "end_index": 1},
            {"id": 1, "length_frames": 5, "first_index": 1, "end_index": 2},
        ]
    }
    seg_path = tmp_path / "segments.json"
    seg_path.write_text(json.dumps(segments))
    out = tmp_path / "groups.json"
    assert main(
        ["stitch", "--segments", str(seg_path), "--emb", str(emb_path), "-o", str(out)]
    ) == 0
    groups = json.loads(out.read_text())
    # segment 1 travels to an orthogonal endpoint: sqrt(2) > alpha, dropped
    assert groups["groups"] == [{"start": 0, "end": 1}]

    # index without a backing file is a validation error
    assert main(["stitch", "--segments", str(seg_path), "-o", str(out)]) == 2


def test_mask_command(tmp_path):
    labels = tmp_path / "labels.json"
    partition = ShotPartition.from_boundaries([0, 4, 8])
    labels.write_text(partition_to_json(partition))
    out = tmp_path / "mask.msk"
    assert main(["mask", "--labels", str(labels), "-o", str(out)]) == 0
    mask = read_msk(out)
    expected = build_block_diagonal_mask(partition, TokenLayout(n_frames=8))
    assert np.array_equal(mask.allowed, expected.allowed)

    out_vff = tmp_path / "mask_vff.msk"
    assert main(
        ["mask", "--labels", str(labels), "--visible-first-frame", "-o", str(out_vff)]
    ) == 0
    vff = read_msk(out_vff)
    assert vff.allowed[:, 0].all()


def test_mask_with_gradual_labels(tmp_path):
    labels = tmp_path / "labels.json"
    partition = ShotPartition(n_frames=10, shots=((0, 4), (6, 10)), gradual_frames=(4, 5))
    labels.write_text(partition_to_json(partition))
    out = tmp_path / "mask.msk"
    # gaps are rejected unless explicitly dropped
    assert main(["mask", "--labels", str(labels), "-o", str(out)]) == 2
    assert main(["mask", "--labels", str(labels), "--drop-gradual", "-o", str(out)]) == 0
    mask = read_msk(out)
    assert mask.n == 8  # two gradual frames removed from the token axis


def test_analyze_command(tmp_path):
    partition = ShotPartition.from_boundaries([0, 4, 8])
    labels = tmp_path / "labels.json"
    labels.write_text(partition_to_json(partition))
    layout = TokenLayout(n_frames=8)
    mask = build_block_diagonal_mask(partition, layout)
    rng = SplitMix64(3)
    q = rng.uniform(8 * 3).reshape(8, 3)
    att = scaled_dot_product_attention(q, q, q, mask)
    atn = tmp_path / "maps.atn"
    write_atn(att.probs[None, None].astype(np.float32), atn)
    out = tmp_path / "stats.json"
    assert main(["analyze", "--attn", str(atn), "--labels", str(labels), "-o", str(out)]) == 0
    stats = json.loads(out.read_text())
    assert stats["layers"] == 1 and stats["heads"] == 1
    entry = stats["per_map"][0]
    assert entry["inter_mean"] == 0.0
    assert entry["ratio"] is None  # infinite ratio serialized as null


def test_eval_command_and_require_multishot(tmp_path, spec_file):
    video = tmp_path / "v.ctf"
    labels = tmp_path / "l.json"
    main(["gen-synthetic", "--spec", str(spec_file), "-o", str(video), "--labels", str(labels)])

    report_path = tmp_path / "report.json"
    assert main(
        ["eval", "--video", str(video), "--labels", str(labels), "--specified", "2",
         "-o", str(report_path)]
    ) == 0
    report = json.loads(report_path.read_text())
    assert report["transition_control"] == 1.0
    assert report["detected_shots"] == 2

    # single-shot labels: exit 4 only with --require-multishot
    single = tmp_path / "single.json"
    single.write_text(partition_to_json(ShotPartition.from_boundaries([0, 16])))
    out2 = tmp_path / "report2.json"
    assert main(
        ["eval", "--video", str(video), "--labels", str(single), "--specified", "2",
         "-o", str(out2)]
    ) == 0
    assert json.loads(out2.read_text())["inter_semantic"] is None
    assert main(
        ["eval", "--video", str(video), "--labels", str(single), "--specified", "2",
         "--require-multishot", "-o", str(out2)]
    ) == 4


def test_ref_dist_command(tmp_path):
    scores = tmp_path / "scores.csv"
    scores.write_text("\n".join(str(v) for v in np.linspace(0, 1, 40)))
    out = tmp_path / "ref.json"
    assert main(["ref-dist", "--scores", str(scores), "-o", str(out)]) == 0
    ref = json.loads(out.read_text())
    assert ref["bins"] == 50
    assert len(ref["masses"]) == 50

    bad = tmp_path / "bad.csv"
    bad.write_text("0.5\nnot-a-number\n")
    assert main(["ref-dist", "--scores", str(bad), "-o", str(out)]) == 2

    outside = tmp_path / "outside.csv"
    outside.write_text("1.5\n")
    assert main(["ref-dist", "--scores", str(outside), "-o", str(out)]) == 2


def test_demo_command_deterministic(tmp_path):
    labels = tmp_path / "labels.json"
    labels.write_text(partition_to_json(ShotPartition.from_boundaries([0, 8, 16])))
    out_a = tmp_path / "a.ctf"
    out_b = tmp_path / "b.ctf"
    args = ["demo", "--labels", str(labels), "--iters", "200", "--seed", "7"]
    assert main(args + ["-o", str(out_a)]) == 0
    assert main(args + ["-o", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    video = read_ctf(out_a)
    assert video.frame_count == 16

    # full loop: segment the demo output, then the no-mask variant
    detected = tmp_path / "detected.json"
    assert main(["segment", str(out_a), "-o", str(detected)]) == 0
    assert len(json.loads(detected.read_text())["shots"]) == 2
    out_free = tmp_path / "free.ctf"
    assert main(args + ["--no-mask", "-o", str(out_free)]) == 0
    assert main(["segment", str(out_free), "-o", str(detected)]) == 0
    assert len(json.loads(detected.read_text())["shots"]) == 1


def test_config_file_plus_overrides_match_flags(tmp_path, spec_file):
    video = tmp_path / "v.ctf"
    main(["gen-synthetic", "--spec", str(spec_file), "-o", str(video)])

    config = tmp_path / "config.json"
    config.write_text(json.dumps({"cut_threshold": 50.0}))
    with_config = tmp_path / "wc.json"
    with_flags = tmp_path / "wf.json"
    assert main(
        ["segment", str(video), "--config", str(config), "--cut-threshold", "30",
         "-o", str(with_config)]
    ) == 0
    assert main(["segment", str(video), "--cut-threshold", "30", "-o", str(with_flags)]) == 0
    assert json.loads(with_config.read_text())["shots"] == json.loads(with_flags.read_text())["shots"]
    assert json.loads(with_config.read_text())["config"]["cut_threshold"] == 30.0


def test_bad_config_key_exits_2(tmp_path, spec_file):
    video = tmp_path / "v.ctf"
    main(["gen-synthetic", "--spec", str(spec_file), "-o", str(video)])
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"mystery_knob": 1}))
    assert main(["segment", str(video), "--config", str(config), "-o", str(tmp_path / "o.json")]) == 2
