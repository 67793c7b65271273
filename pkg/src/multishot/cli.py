"""Command-line surface for the multishot toolkit.

Subcommands: gen-synthetic, segment, stitch, mask, analyze, eval,
ref-dist, demo.  Exit codes: 0 success, 2 validation or configuration
error, 3 I/O or file-format error, 4 metric not computable.  Output files
are written atomically (temp file + rename) and JSON artifacts embed the
resolved configuration under a "config" key.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import analysis, curation, detect, dynamics, frameio, masks, metrics
from .config import RunConfig
from .errors import (
    FormatError,
    MultishotError,
    NotComputableError,
    ValidationError,
)
from .partition import ShotPartition, dumps_json, partition_from_json

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NOT_COMPUTABLE = 4


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_via(path: Path, writer) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(args: argparse.Namespace) -> RunConfig:
    """Resolve the effective config: file values, then flag overrides."""
    config = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    for field in dataclasses.fields(RunConfig):
        value = getattr(args, field.name, None)
        if value is not None:
            overrides[field.name] = value
    return dataclasses.replace(config, **overrides)


def _read_partition(path: str) -> ShotPartition:
    return partition_from_json(Path(path).read_text())


def _write_partition(path: str, partition: ShotPartition, config: RunConfig) -> None:
    obj = partition.to_json_obj()
    obj["config"] = config.to_json_obj()
    _atomic_write_text(Path(path), dumps_json(obj))


def _cmd_gen_synthetic(args: argparse.Namespace) -> int:
    config = _load_config(args)
    spec = frameio.SyntheticSpec.from_json_obj(json.loads(Path(args.spec).read_text()))
    seq, partition = frameio.gen_synthetic_multishot(spec)
    _atomic_write_via(Path(args.output), lambda tmp: frameio.write_ctf(seq, tmp))
    if args.labels:
        _write_partition(args.labels, partition, config)
    return EXIT_OK


def _cmd_segment(args: argparse.Namespace) -> int:
    config = _load_config(args)
    seq = frameio.read_ctf(args.video)
    partition = detect.segment(
        seq,
        cut_threshold=config.cut_threshold,
        single_threshold=config.single_threshold,
        all_threshold=config.all_threshold,
        significance_floor=config.significance_floor,
    )
    _write_partition(args.output, partition, config)
    return EXIT_OK


def _cmd_stitch(args: argparse.Namespace) -> int:
    config = _load_config(args)
    embeddings = curation.read_emb(args.emb) if args.emb else None
    segments = curation.segments_from_json_obj(
        json.loads(Path(args.segments).read_text()), embeddings
    )
    stitch_config = curation.StitchConfig(
        alpha=config.alpha,
        beta=config.beta,
        gamma=config.gamma,
        gamma_anchor=args.gamma_anchor,
    )
    groups = curation.split_stitch(segments, stitch_config)
    obj = {
        "groups": [{"start": a, "end": b} for a, b in groups],
        "segment_ids": [[segments[i].id for i in range(a, b)] for a, b in groups],
        "config": config.to_json_obj(),
    }
    _atomic_write_text(Path(args.output), dumps_json(obj))
    return EXIT_OK


def _read_mask_partition(args: argparse.Namespace) -> ShotPartition:
    partition = _read_partition(args.labels)
    if getattr(args, "drop_gradual", False):
        partition = partition.compact()
    return partition.require_contiguous()


def _cmd_mask(args: argparse.Namespace) -> int:
    partition = _read_mask_partition(args)
    layout = masks.TokenLayout(
        n_frames=partition.n_frames,
        temporal_compression=args.compression,
        tokens_per_slice=args.tokens_per_slice,
    )
    mask = masks.build_block_diagonal_mask(partition, layout)
    if args.visible_first_frame:
        mask = masks.apply_visible_first_frame(mask, layout)
    _atomic_write_via(Path(args.output), lambda tmp: masks.write_msk(mask, tmp))
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    config = _load_config(args)
    partition = _read_mask_partition(args)
    tensor = analysis.read_atn(args.attn)
    layout = masks.TokenLayout(
        n_frames=partition.n_frames,
        temporal_compression=args.compression,
        tokens_per_slice=args.tokens_per_slice,
    )
    capture = analysis.AttnCapture(tensor, layout)
    per_map = []
    finite_ratios = []
    for layer in range(capture.n_layers):
        for head in range(capture.n_heads):
            fmap = analysis.group_attention_by_frame(capture, layer, head)
            intra, inter, ratio = analysis.intra_inter_ratio(fmap, partition)
            try:
                r = analysis.boundary_correlation(fmap, partition)
            except (NotComputableError, ValidationError):
                r = None
            per_map.append(
                {
                    "layer": layer,
                    "head": head,
                    "intra_mean": intra,
                    "inter_mean": inter,
                    "ratio": None if np.isinf(ratio) else ratio,
                    "boundary_r": r,
                }
            )
            if not np.isinf(ratio):
                finite_ratios.append(ratio)
    obj = {
        "layers": capture.n_layers,
        "heads": capture.n_heads,
        "per_map": per_map,
        "mean_ratio": float(np.mean(finite_ratios)) if finite_ratios else None,
        "config": config.to_json_obj(),
    }
    _atomic_write_text(Path(args.output), dumps_json(obj))
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args)
    seq = frameio.read_ctf(args.video)
    partition = _read_partition(args.labels)
    ref_semantic = (
        metrics.Histogram.from_json(Path(args.ref_semantic).read_text())
        if args.ref_semantic
        else None
    )
    ref_visual = (
        metrics.Histogram.from_json(Path(args.ref_visual).read_text())
        if args.ref_visual
        else None
    )
    report = metrics.eval_report(
        seq,
        partition,
        specified_shots=args.specified,
        reference_semantic=ref_semantic,
        reference_visual=ref_visual,
        shot_extractor=config.shot_extractor,
        subject_extractor=config.subject_extractor,
        background_extractor=config.background_extractor,
    )
    obj = report.to_json_obj()
    obj["config"] = config.to_json_obj()
    _atomic_write_text(Path(args.output), dumps_json(obj))
    if args.require_multishot and report.inter_semantic is None:
        print("inter-shot metrics not computable: single-shot video", file=sys.stderr)
        return EXIT_NOT_COMPUTABLE
    return EXIT_OK


def _cmd_ref_dist(args: argparse.Namespace) -> int:
    config = _load_config(args)
    scores = []
    for line_no, line in enumerate(Path(args.scores).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            scores.append(float(line))
        except ValueError as exc:
            raise ValidationError(f"{args.scores}:{line_no}: not a number: {line!r}") from exc
    histogram = metrics.build_reference_distribution(
        scores, bins=config.bins, epsilon=config.epsilon
    )
    obj = histogram.to_json_obj()
    obj["config"] = config.to_json_obj()
    _atomic_write_text(Path(args.output), dumps_json(obj))
    return EXIT_OK


def _cmd_demo(args: argparse.Namespace) -> int:
    config = _load_config(args)
    partition = _read_mask_partition(args)
    layout = masks.TokenLayout(
        n_frames=partition.n_frames,
        temporal_compression=args.compression,
        tokens_per_slice=args.tokens_per_slice,
    )
    smoothing = dynamics.SmoothingConfig(
        layout=layout,
        iterations=args.iters,
        temperature=args.temperature,
        seed=config.seed,
    )
    seq = dynamics.demo_multishot_generation(
        partition, smoothing, masked=not args.no_mask
    )
    _atomic_write_via(Path(args.output), lambda tmp: frameio.write_ctf(seq, tmp))
    if args.labels_out:
        _write_partition(args.labels_out, partition, config)
    return EXIT_OK


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multishot",
        description="Multi-shot video toolkit: masks, segmentation, curation, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="render a synthetic multi-shot fixture")
    p.add_argument("--spec", required=True, help="SyntheticSpec JSON file")
    p.add_argument("-o", "--output", required=True, help="output CTF video")
    p.add_argument("--labels", help="optional ground-truth partition JSON")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("segment", help="detect shots in a CTF video")
    p.add_argument("video", help="input CTF video")
    p.add_argument("-o", "--output", required=True, help="partition JSON output")
    p.add_argument("--cut-threshold", type=float, dest="cut_threshold")
    p.add_argument("--single", type=float, dest="single_threshold")
    p.add_argument("--all", type=float, dest="all_threshold")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("stitch", help="group segments with the split-stitch rules")
    p.add_argument("--segments", required=True, help="segments JSON file")
    p.add_argument("--emb", help="EMBv1 file backing first_index / end_index entries")
    p.add_argument("--alpha", type=float, dest="alpha")
    p.add_argument("--beta", type=float, dest="beta")
    p.add_argument("--gamma", type=float, dest="gamma")
    p.add_argument(
        "--gamma-anchor",
        choices=("group-head", "pairwise"),
        default="group-head",
        help="what the gamma bound compares the candidate's end against",
    )
    p.add_argument("-o", "--output", required=True, help="groups JSON output")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_stitch)

    p = sub.add_parser("mask", help="build a block-diagonal attention mask")
    p.add_argument("--labels", required=True, help="partition JSON file")
    p.add_argument("--tokens-per-slice", type=int, default=1)
    p.add_argument("--compression", type=int, default=1)
    p.add_argument("--visible-first-frame", action="store_true")
    p.add_argument(
        "--drop-gradual",
        action="store_true",
        help="re-index the shots over kept frames, discarding gradual gaps",
    )
    p.add_argument("-o", "--output", required=True, help="MSKv1 output")
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("analyze", help="attention-map statistics against shot labels")
    p.add_argument("--attn", required=True, help="ATNv1 capture file")
    p.add_argument("--labels", required=True, help="partition JSON file")
    p.add_argument(
        "--drop-gradual",
        action="store_true",
        help="re-index the shots over kept frames, discarding gradual gaps",
    )
    p.add_argument("--tokens-per-slice", type=int, default=1)
    p.add_argument("--compression", type=int, default=1)
    p.add_argument("-o", "--output", required=True, help="statistics JSON output")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("eval", help="metric report for a labeled video")
    p.add_argument("--video", required=True, help="input CTF video")
    p.add_argument("--labels", required=True, help="partition JSON file")
    p.add_argument("--specified", type=int, required=True, help="prompted shot count")
    p.add_argument("--ref-semantic", help="reference histogram JSON (semantic)")
    p.add_argument("--ref-visual", help="reference histogram JSON (visual)")
    p.add_argument(
        "--require-multishot",
        action="store_true",
        help="exit 4 when inter-shot metrics are not computable",
    )
    p.add_argument("-o", "--output", required=True, help="report JSON output")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ref-dist", help="build a reference score histogram")
    p.add_argument("--scores", required=True, help="CSV with one score per line")
    p.add_argument("--bins", type=int, dest="bins")
    p.add_argument("--epsilon", type=float, dest="epsilon")
    p.add_argument("-o", "--output", required=True, help="histogram JSON output")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_ref_dist)

    p = sub.add_parser("demo", help="masked-attention mechanism demo video")
    p.add_argument("--labels", required=True, help="partition JSON with target shots")
    p.add_argument(
        "--drop-gradual",
        action="store_true",
        help="re-index the shots over kept frames, discarding gradual gaps",
    )
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--tokens-per-slice", type=int, default=1)
    p.add_argument("--compression", type=int, default=1)
    p.add_argument("--no-mask", action="store_true", help="run with an all-allowed mask")
    p.add_argument("--labels-out", help="echo the partition sidecar here")
    p.add_argument("-o", "--output", required=True, help="output CTF video")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NotComputableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_COMPUTABLE
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MultishotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
