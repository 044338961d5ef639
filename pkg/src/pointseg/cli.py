"""Command-line entry point: ``pointseg <subcommand> ...``.

Every subcommand prints a one-object JSON run summary to stdout (command,
flags, config hash, seed, warnings, outputs) and exits 0, or prints a
diagnostic to stderr and exits 1 (2 for usage errors).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io as pio
from .datasets import DatasetManifest, SynthConfig, TileEntry, centroid_points, mix_labels, synth_corpus
from .harness import LabeledTile, SweepSpec, run_sweep
from .geometry import voronoi_partition
from .metrics import dice, dq_classic, dq_point, mean_score, pool_reports
from .perturb import PerturbConfig, perturb_pointset
from .postproc import PostprocConfig, instances_from_predictions
from .pseudolabel import (
    KMeansConfig,
    PseudoLabelConfig,
    color_kmeans_labels,
    combine_pseudo_label,
    distance_based_labels,
    refine_pseudo_label,
    split_instances,
)
from .targets import CentroidTargetConfig, HoverMaps, TargetConfig, build_training_record, config_hash


class CLIError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CLIError(f"input file not found: {path}")
    return p


def _kmeans_cfg(args) -> KMeansConfig:
    return KMeansConfig(
        k=args.k, feature_weights=args.weights, max_iters=args.max_iters, tolerance=args.tol, seed=args.seed
    )


def _add_kmeans_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--point-radius", type=int, default=2, help="foreground disk radius around points")
    p.add_argument("--k", type=int, default=3, help="number of color clusters")
    p.add_argument("--weights", type=_floats, default=(1.0, 1.0, 1.0, 0.5), help="R,G,B,distance feature weights")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)


def _read_points_for(path, shape) -> np.ndarray:
    return pio.read_points(_existing(path), shape=shape)


# subcommands -------------------------------------------------------------------


def cmd_gen_labels(args) -> dict:
    image = pio.read_image(_existing(args.image))
    height, width = image.shape[:2]
    points = _read_points_for(args.points, image.shape)
    tri = distance_based_labels(points, width, height, args.point_radius)
    color = color_kmeans_labels(image, points, _kmeans_cfg(args))
    ps = combine_pseudo_label(color, tri)
    pio.write_mask(args.out, ps)
    outputs = {"pseudo_label": args.out}
    if args.trimask_out:
        pio.write_trimask(args.trimask_out, tri)
        outputs["trimask"] = args.trimask_out
    if args.color_out:
        pio.write_mask(args.color_out, color)
        outputs["color"] = args.color_out
    return {"outputs": outputs, "foreground_pixels": int(ps.sum())}


def cmd_refine(args) -> dict:
    ps = pio.read_mask(_existing(args.mask))
    points = _read_points_for(args.points, ps.shape)
    out = refine_pseudo_label(ps, points, args.remove_radius, args.patch_radius)
    pio.write_mask(args.out, out)
    return {"outputs": {"refined": args.out}, "foreground_pixels": int(out.sum())}


def cmd_instances(args) -> dict:
    ps = pio.read_mask(_existing(args.mask))
    points = _read_points_for(args.points, ps.shape)
    partition = voronoi_partition(points, ps.shape[1], ps.shape[0])
    instances = split_instances(ps, partition)
    pio.write_instances(args.out, instances)
    return {"outputs": {"instances": args.out}, "n_instances": int(instances.max())}


def cmd_targets(args) -> dict:
    image = pio.read_image(_existing(args.image))
    instances = pio.read_instances(_existing(args.instances))
    if image.shape[:2] != instances.shape:
        raise CLIError(f"dimension mismatch: image {image.shape[:2]} vs instances {instances.shape}")
    points = _read_points_for(args.points, instances.shape)
    cfg = TargetConfig(CentroidTargetConfig(args.encoding, args.radius))
    record = build_training_record(
        image, instances, points, cfg, label_source=args.label_source, seed=args.seed, tile_id=args.tile_id
    )
    out = Path(args.out_dir)
    pio.write_mask(out / "mask.png", record.mask)
    pio.write_float_raster(out / "hover.npns", record.hover.stack())
    pio.write_float_raster(out / "centroid.npns", record.centroid)
    pio.write_json(out / "record.json", record.metadata)
    return {
        "outputs": {name: str(out / name) for name in ("mask.png", "hover.npns", "centroid.npns", "record.json")},
        "config_hash": record.metadata["config_hash"],
    }


def cmd_perturb(args) -> dict:
    path = _existing(args.instances)
    instances = pio.read_instances(path)
    result = perturb_pointset(instances, PerturbConfig(args.epsilon, args.seed, args.max_redraws))
    out = args.out or str(path.with_name(path.stem + ".points.csv"))
    pio.write_points(out, result.points)
    counts = {"saturated": result.n_saturated, "snapped": result.n_snapped}
    outputs = {"points": out}
    if args.report:
        pio.write_json(args.report, {"epsilon": args.epsilon, "seed": args.seed, "n_points": len(result.points), **counts})
        outputs["report"] = args.report
    return {"outputs": outputs, "n_points": int(len(result.points)), "warning_counts": counts}


def _read_label_any(path) -> np.ndarray:
    path = _existing(path)
    image = pio.open_image(path)
    if image.mode in ("I;16", "I", "I;16B"):
        return np.asarray(image).astype(np.int64)
    array = np.asarray(image)
    if array.ndim != 2:
        raise CLIError(f"{path}: expected a single-channel label image")
    return array.astype(np.int64)


def cmd_metrics(args) -> dict:
    if len(args.pred) != len(args.gt):
        raise CLIError(f"--pred and --gt need the same number of files ({len(args.pred)} vs {len(args.gt)})")
    per_file = []
    if args.mode == "dice":
        values = []
        for p, g in zip(args.pred, args.gt):
            pred, gt = _read_label_any(p), _read_label_any(g)
            if pred.shape != gt.shape:
                raise CLIError(f"dimension mismatch: {p} {pred.shape} vs {g} {gt.shape}")
            values.append(dice(pred > 0, gt > 0))
            per_file.append({"pred": p, "gt": g, "dice": values[-1]})
        return {"mode": "dice", "value": float(np.mean(values)), "per_file": per_file}

    reports = []
    for p, g in zip(args.pred, args.gt):
        pred = _read_label_any(p)
        if args.mode == "dq-point":
            if Path(g).suffix.lower() in (".csv", ".txt", ".json"):
                centroids = _read_points_for(g, pred.shape)
            else:
                centroids = centroid_points(_read_label_any(g))
            report = dq_point(pred, centroids)
        else:
            gt = _read_label_any(g)
            if pred.shape != gt.shape:
                raise CLIError(f"dimension mismatch: {p} {pred.shape} vs {g} {gt.shape}")
            report = dq_classic(pred, gt)
        reports.append(report)
        per_file.append({"pred": p, "gt": g, "tp": report.tp, "fp": report.fp, "fn": report.fn_, "score": report.score})
    pooled = pool_reports(reports)
    value = pooled.score if args.aggregate == "pooled" else mean_score(reports)
    return {
        "mode": args.mode,
        "aggregate": args.aggregate,
        "value": value,
        "tp": pooled.tp,
        "fp": pooled.fp,
        "fn": pooled.fn_,
        "per_file": per_file,
    }


def cmd_mix(args) -> dict:
    path = _existing(args.manifest)
    manifest = pio.read_manifest(path)
    mixed = mix_labels(manifest.tiles, args.rate, args.seed)
    out = args.out or str(path.with_name(path.stem + ".mixed.json"))
    pio.write_manifest(out, mixed)
    return {"outputs": {"manifest": out}, "n_tiles": len(mixed.tiles), "n_pseudo": mixed.n_pseudo}


def cmd_synth(args) -> dict:
    cfg = SynthConfig(
        height=args.height,
        width=args.width,
        nuclei=(args.nuclei_min, args.nuclei_max),
        axes=(args.axis_min, args.axis_max),
        seed=args.seed,
    )
    out = Path(args.out_dir)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tiles = synth_corpus(cfg, args.n_tiles)
    entries = []
    messages = []
    for i, tile in enumerate(tiles):
        tid = f"tile_{i:04d}"
        image_path, label_path, points_path = (
            out / "images" / f"{tid}.png",
            out / "labels" / f"{tid}.png",
            out / "points" / f"{tid}.csv",
        )
        pio.write_image(image_path, tile.image)
        pio.write_instances(label_path, tile.instances)
        pio.write_points(points_path, tile.points)
        entries.append(TileEntry(tid, str(image_path), str(label_path), "true", str(points_path)))
        messages += [f"{tid}: {m}" for m in tile.warnings]
    manifest = DatasetManifest(tuple(entries), 0.0, args.seed)
    pio.write_manifest(out / "manifest.json", manifest)
    return {"outputs": {"manifest": str(out / "manifest.json")}, "n_tiles": len(tiles), "warnings": messages}


def cmd_reconstruct(args) -> dict:
    seg = pio.read_float_raster(_existing(args.seg))
    hover = pio.read_float_raster(_existing(args.hover), squeeze=False)
    if seg.ndim != 2:
        raise CLIError(f"{args.seg}: expected a single-channel float raster")
    if hover.shape[2] != 2:
        raise CLIError(f"{args.hover}: expected a 2-channel float raster (horizontal, vertical)")
    if hover.shape[:2] != seg.shape:
        raise CLIError(f"dimension mismatch: seg {seg.shape} vs hover {hover.shape[:2]}")
    cfg = PostprocConfig(args.seg_threshold, args.gradient_threshold, args.min_area)
    instances = instances_from_predictions(seg, HoverMaps(hover[..., 0], hover[..., 1]), cfg)
    pio.write_instances(args.out, instances)
    return {"outputs": {"instances": args.out}, "n_instances": int(instances.max())}


def cmd_render(args) -> dict:
    image = pio.read_image(_existing(args.image))
    instances = pio.read_instances(_existing(args.instances))
    if image.shape[:2] != instances.shape:
        raise CLIError(f"dimension mismatch: image {image.shape[:2]} vs instances {instances.shape}")
    pio.write_image(args.out, pio.render_overlay(image, instances, args.alpha))
    return {"outputs": {"overlay": args.out}}


def cmd_sweep(args) -> dict:
    manifest = pio.read_manifest(_existing(args.manifest))
    corpus = [
        LabeledTile(pio.read_image(_existing(t.image_path)), pio.read_instances(_existing(t.label_path)), t.tile_id)
        for t in manifest.tiles
    ]
    spec = SweepSpec(args.variable, args.values, args.replicates, args.seed)
    cfg = PseudoLabelConfig(point_radius=args.point_radius)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = run_sweep(spec, corpus, cfg)
    text = report.to_csv()
    if args.out:
        with pio.atomic_write(args.out, "w") as fh:
            fh.write(text)
    return {
        "outputs": {"report": args.out} if args.out else {},
        "note": report.note,
        "rows": [
            {args.variable: r.value, "dice_mean": r.dice_mean, "dice_std": r.dice_std,
             "dq_point_mean": r.dq_mean, "dq_point_std": r.dq_std}
            for r in report.rows
        ],
    }


# parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pointseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-labels", help="pseudo-label from an image and its point annotations")
    p.add_argument("--image", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trimask-out")
    p.add_argument("--color-out")
    _add_kmeans_flags(p)
    p.set_defaults(func=cmd_gen_labels)

    p = sub.add_parser("refine", help="remove stray components and patch uncovered points")
    p.add_argument("--mask", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--remove-radius", type=int, default=5)
    p.add_argument("--patch-radius", type=int, default=3)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("instances", help="split a pseudo-label into instances along Voronoi edges")
    p.add_argument("--mask", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_instances)

    p = sub.add_parser("targets", help="write mask, distance-map and centroid targets for a tile")
    p.add_argument("--image", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--encoding", choices=["disk", "gaussian"], default="disk")
    p.add_argument("--radius", type=float, default=3.0, help="disk radius or gaussian sigma")
    p.add_argument("--label-source", choices=["true", "pseudo"], default="true")
    p.add_argument("--tile-id")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_targets)

    p = sub.add_parser("perturb", help="shift one point per instance by the Gaussian protocol")
    p.add_argument("--instances", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-redraws", type=int, default=1000)
    p.add_argument("--out", help="point file (default: <instances>.points.csv)")
    p.add_argument("--report", help="optional JSON file with warning counts")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("metrics", help="score predictions against ground truth")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--gt", nargs="+", required=True, help="masks/instance maps, or point files for dq-point")
    p.add_argument("--mode", choices=["dice", "dq-point", "dq-classic"], required=True)
    p.add_argument("--aggregate", choices=["pooled", "mean"], default="pooled")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("mix", help="mark a fraction of manifest tiles as pseudo-labelled")
    p.add_argument("--manifest", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output manifest (default: <manifest>.mixed.json)")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("synth", help="generate a synthetic nuclei corpus with ground truth")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-tiles", type=int, default=10)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--nuclei-min", type=int, default=20)
    p.add_argument("--nuclei-max", type=int, default=40)
    p.add_argument("--axis-min", type=float, default=4.0)
    p.add_argument("--axis-max", type=float, default=12.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("reconstruct", help="instance map from segmentation + distance-map rasters")
    p.add_argument("--seg", required=True, help="1-channel float raster of probabilities")
    p.add_argument("--hover", required=True, help="2-channel float raster: horizontal, vertical")
    p.add_argument("--out", required=True)
    p.add_argument("--seg-threshold", type=float, default=0.5)
    p.add_argument("--gradient-threshold", type=float, default=0.4)
    p.add_argument("--min-area", type=int, default=10)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("render", help="color overlay of instances on the tile")
    p.add_argument("--image", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.45)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("sweep", help="epsilon or pseudo-rate sweep over a manifest with ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--variable", choices=["epsilon", "pseudo_rate"], required=True)
    p.add_argument("--values", type=_floats, required=True)
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--point-radius", type=int, default=2)
    p.add_argument("--out", help="CSV report path")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            result = args.func(args)
        except (CLIError, ValueError, OSError) as exc:
            print(f"pointseg {args.command}: error: {exc}", file=sys.stderr)
            return 1
    summary = {
        "command": args.command,
        "flags": flags,
        "config_hash": config_hash(flags),
        "seed": flags.get("seed"),
        "warnings": [str(w.message) for w in caught] + result.pop("warnings", []),
        **result,
    }
    print(json.dumps(summary, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
