"""Single entry point wiring every module into `vippipe` subcommands.

Exit codes: 0 success, 1 data/validation failure, 2 usage error. Diagnostics
go to stderr; data goes to stdout or files. Every subcommand accepts
``--json`` to emit one machine-readable JSON document on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .clip_sampler import ClipConfig, plan_clips
from .config import load_config
from .dataset import dump_dataset, plan_dataset, transform_item, item_record, epoch_param_seed
from .engine import PretrainedSpec, evaluate, train
from .errors import VippipeError
from .frame_io import decode_image, write_clip_dump
from .manifest import Box, DatasetManifest, load_manifest, validate_manifest
from .metrics import (
    ALL_POINT,
    ELEVEN_POINT,
    Detection,
    accuracy,
    average_precision,
    cc,
    iou,
    mean_ap,
    nss,
)
from .report import render_run_report
from .synthetic import SynthSpec, generate_synthetic_dataset


def _formatter(prog: str) -> argparse.HelpFormatter:
    return argparse.HelpFormatter(prog, width=80)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vippipe",
        description="Video experiment pipeline: manifests, clips, transforms, metrics, training.",
        formatter_class=_formatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("validate", help="check a manifest against the schema rules", formatter_class=_formatter)
    p.add_argument("manifest", help="path to a manifest JSON file")
    p.add_argument("--check-files", action="store_true", help="also verify referenced frame/map files exist")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("synth", help="generate a synthetic moving-square dataset", formatter_class=_formatter)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--videos", type=int, default=12)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--length-min", type=int, default=24)
    p.add_argument("--length-max", type=int, default=40)
    p.add_argument("--height", type=int, default=48)
    p.add_argument("--width", type=int, default=48)
    p.add_argument("--train-fraction", type=float, default=2.0 / 3.0)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("plan", help="print clip plans for every video in a manifest", formatter_class=_formatter)
    p.add_argument("--manifest", required=True)
    p.add_argument("--clip-length", type=int, default=16)
    p.add_argument("--num-clips", type=int, default=-1)
    p.add_argument("--clip-stride", type=int, default=0)
    p.add_argument("--clip-offset", type=int, default=0)
    p.add_argument("--random-offset", action="store_true")
    p.add_argument("--mode", choices=["contiguous", "uniform"], default="contiguous")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("preprocess", help="write transformed clips as VIPC dumps plus annotations", formatter_class=_formatter)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="config override (repeatable)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("dump", help="materialize dataset items in iteration order", formatter_class=_formatter)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None, help="YAML run configuration (defaults apply if omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="config override (repeatable)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("train", help="train a micro-model per the config", formatter_class=_formatter)
    p.add_argument("--config", required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("eval", help="evaluate a model, or compute one metric directly", formatter_class=_formatter)
    p.add_argument("--config", default=None, help="model evaluation per config")
    p.add_argument("--pretrained", default=None, help="checkpoint path (overrides the config)")
    p.add_argument("--metric", default=None, choices=["accuracy", "iou", "ap", "map", "nss", "cc"])
    p.add_argument("--pred", default=None, help="prediction JSON file for --metric")
    p.add_argument("--gt", default=None, help="manifest supplying ground truth for --metric")
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--interp", choices=["eleven", "all"], default="eleven")
    p.add_argument("--class-id", type=int, default=None, help="class for --metric ap")
    p.add_argument("--out", default=None, help="directory for eval_report.json")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("report", help="render a run's logs to CSV and figures", formatter_class=_formatter)
    p.add_argument("--run", required=True, help="run directory containing logs.jsonl")
    p.add_argument("--out", default=None, help="output directory (default: <run>/report)")
    p.add_argument("--json", action="store_true")

    return parser


def _emit(payload: dict[str, Any], as_json: bool, text: str | None = None) -> None:
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif text is not None:
        print(text)


def _cmd_validate(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    report = validate_manifest(manifest, check_files=args.check_files)
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        for violation in report.violations:
            print(str(violation), file=sys.stderr)
        print(f"{'OK' if report.ok else 'INVALID'}: {len(manifest.videos)} videos, "
              f"{len(report.violations)} violations")
    return 0 if report.ok else 1


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        n_videos=args.videos,
        length_range=(args.length_min, args.length_max),
        shape=(args.height, args.width),
        n_classes=args.classes,
        seed=args.seed,
        train_fraction=args.train_fraction,
    )
    manifest = generate_synthetic_dataset(spec, args.out)
    payload = {
        "out": str(Path(args.out)),
        "manifest": str(Path(args.out) / "manifest.json"),
        "videos": len(manifest.videos),
        "classes": args.classes,
        "seed": args.seed,
    }
    _emit(payload, args.json, f"wrote {len(manifest.videos)} videos under {args.out}")
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    cfg = ClipConfig(
        clip_length=args.clip_length,
        num_clips=args.num_clips,
        clip_stride=args.clip_stride,
        clip_offset=args.clip_offset,
        random_offset=args.random_offset,
        mode=args.mode,
    )
    plans = []
    for vi, video in enumerate(manifest.videos):
        seed = int(np.random.SeedSequence([args.seed, vi]).generate_state(1, dtype=np.uint64)[0])
        plan = plan_clips(video.length, cfg, seed=seed)
        plans.append({"video": video.path, "clips": [list(c) for c in plan]})
    if args.json:
        print(json.dumps({"plans": plans}, sort_keys=True))
    else:
        for entry in plans:
            for clip in entry["clips"]:
                print(json.dumps(clip))
    return 0


def _cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.set)
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    items = plan_dataset(manifest, cfg.clip, cfg.load_type, cfg.seed)
    param_seed = epoch_param_seed(cfg.seed, 0)
    records = []
    for item in items:
        clip, ann = transform_item(manifest, item, cfg.transform, param_seed)
        name = f"video_{item.video_index:04d}_clip_{item.clip_index:03d}.vipc"
        write_clip_dump(clip, out / name)
        record = item_record(item, manifest.videos[item.video_index], ann)
        record["file"] = name
        records.append(record)
    (out / "annotations.json").write_text(
        json.dumps({"items": records}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    payload = {"items": len(records), "out": str(out)}
    _emit(payload, args.json, f"wrote {len(records)} clips under {out}")
    return 0


def _cmd_dump(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.set)
    manifest = load_manifest(args.manifest)
    payload = dump_dataset(manifest, cfg, args.out)
    _emit(payload, args.json, f"wrote {payload['items']} items under {payload['out']}")
    return 0


def _collect_overrides(rest: list[str]) -> list[str]:
    """Turn leftover ``--key value`` / ``--key=value`` tokens into overrides."""
    overrides: list[str] = []
    i = 0
    while i < len(rest):
        token = rest[i]
        if not token.startswith("--") or len(token) == 2:
            raise SystemExit2(f"unexpected argument {token!r}")
        body = token[2:]
        if "=" in body:
            overrides.append(body)
            i += 1
            continue
        if i + 1 >= len(rest) or rest[i + 1].startswith("--"):
            raise SystemExit2(f"override --{body} needs a value")
        overrides.append(f"{body}={rest[i + 1]}")
        i += 2
    return overrides


class SystemExit2(Exception):
    """Usage error discovered after argparse (still exit code 2)."""


def _cmd_train(args: argparse.Namespace, rest: list[str]) -> int:
    overrides = _collect_overrides(rest)
    cfg = load_config(args.config, overrides)
    if not cfg.json_path:
        raise VippipeError("config key json_path must point at a dataset manifest")
    manifest_path = Path(cfg.json_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    manifest = load_manifest(manifest_path)
    run_dir = train(cfg, manifest)
    _emit({"run_dir": str(run_dir)}, args.json, f"run directory: {run_dir}")
    return 0


def _cmd_eval(args: argparse.Namespace, rest: list[str]) -> int:
    if args.metric is not None:
        if rest:
            raise SystemExit2(f"unexpected argument {rest[0]!r}")
        return _cmd_eval_metric(args)
    if args.config is None:
        raise SystemExit2("eval needs --config (model evaluation) or --metric (direct metric)")
    overrides = _collect_overrides(rest)
    cfg = load_config(args.config, overrides)
    if not cfg.json_path:
        raise VippipeError("config key json_path must point at a dataset manifest")
    manifest_path = Path(cfg.json_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    manifest = load_manifest(manifest_path)
    weights = PretrainedSpec("checkpoint", path=args.pretrained) if args.pretrained else None
    report = evaluate(cfg, manifest, weights=weights, write_dir=args.out)
    _emit(report, args.json, f"{report['metric']} on {report['split']}: {report['value']:.4f}")
    return 0


def _box_from_json(obj: Any, label: int = 0) -> Box:
    if isinstance(obj, dict):
        return Box(
            label=int(obj.get("label", label)),
            xmin=float(obj["xmin"]),
            ymin=float(obj["ymin"]),
            xmax=float(obj["xmax"]),
            ymax=float(obj["ymax"]),
        )
    if isinstance(obj, (list, tuple)) and len(obj) == 4:
        return Box(label=label, xmin=float(obj[0]), ymin=float(obj[1]), xmax=float(obj[2]), ymax=float(obj[3]))
    raise VippipeError(f"cannot parse box from {obj!r}")


def _map_from_json(value: Any, base: Path) -> np.ndarray:
    if isinstance(value, str):
        frame = decode_image((base / value).read_bytes() if not Path(value).is_absolute() else Path(value).read_bytes())
        return frame.data[:, :, 0].astype(np.float64)
    arr = np.asarray(value, dtype=np.float64)
    return arr


def _detections_from_json(raw: Sequence[Any]) -> list[Detection]:
    dets = []
    for obj in raw:
        dets.append(
            Detection(
                image_id=obj["image_id"],
                label=int(obj["label"]),
                box=_box_from_json(obj["box"], label=int(obj["label"])),
                confidence=float(obj["confidence"]),
            )
        )
    return dets


def _manifest_gt_boxes(manifest: DatasetManifest) -> dict[str, list[Box]]:
    gt: dict[str, list[Box]] = {}
    for vi, video in enumerate(manifest.videos):
        for ann in video.frames:
            if ann.boxes:
                gt[f"{vi}:{ann.index}"] = list(ann.boxes)
    return gt


def _cmd_eval_metric(args: argparse.Namespace) -> int:
    if args.pred is None:
        raise SystemExit2("--metric needs --pred FILE")
    pred_path = Path(args.pred)
    pred = json.loads(pred_path.read_text(encoding="utf-8"))
    base = pred_path.parent
    interpolation = ELEVEN_POINT if args.interp == "eleven" else ALL_POINT
    manifest = load_manifest(args.gt) if args.gt else None

    name = args.metric
    if name == "iou":
        value = iou(_box_from_json(pred["box_a"]), _box_from_json(pred["box_b"]))
    elif name == "accuracy":
        if manifest is not None and isinstance(pred, list):
            predictions = [int(p["label"]) for p in pred]
            labels = [manifest.videos[int(p["video"])].action_label for p in pred]
            value = accuracy(predictions, labels)
        else:
            value = accuracy(pred["predictions"], pred["labels"])
    elif name in ("ap", "map"):
        if manifest is not None and isinstance(pred, list):
            dets = _detections_from_json(pred)
            gts = _manifest_gt_boxes(manifest)
        else:
            dets = _detections_from_json(pred["detections"])
            gts = {
                img: [_box_from_json(b) for b in boxes]
                for img, boxes in pred["ground_truth"].items()
            }
        if name == "map":
            value = mean_ap(dets, gts, iou_threshold=args.iou_threshold, interpolation=interpolation)
        else:
            class_id = args.class_id
            if class_id is None:
                present = sorted({b.label for boxes in gts.values() for b in boxes})
                if len(present) != 1:
                    raise VippipeError(f"--class-id required; ground truth has classes {present}")
                class_id = present[0]
            value = average_precision(
                dets, gts, class_id, iou_threshold=args.iou_threshold, interpolation=interpolation
            )
    elif name in ("nss", "cc"):
        if manifest is not None and isinstance(pred, list):
            scores = []
            for entry in pred:
                video = manifest.videos[int(entry["video"])]
                ann = next(a for a in video.frames if a.index == int(entry["frame"]))
                predicted = _map_from_json(entry["map"], base)
                if name == "nss":
                    gt_rel = ann.fixations
                else:
                    gt_rel = ann.saliency_map
                if gt_rel is None:
                    raise VippipeError(f"video {entry['video']} frame {entry['frame']} has no ground-truth map")
                gt_map = decode_image(manifest.resolve(gt_rel).read_bytes()).data[:, :, 0].astype(np.float64)
                scores.append(nss(predicted, gt_map) if name == "nss" else cc(predicted, gt_map))
            value = float(np.mean(scores))
        else:
            predicted = _map_from_json(pred["predicted"], base)
            if name == "nss":
                value = nss(predicted, _map_from_json(pred["fixations"], base))
            else:
                value = cc(predicted, _map_from_json(pred["gt"], base))
    else:  # pragma: no cover - argparse choices guard this
        raise SystemExit2(f"unknown metric {name!r}")

    payload = {"metric": name, "value": value}
    _emit(payload, args.json, f"{name}: {value:.12g}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    paths = render_run_report(args.run, args.out)
    _emit(paths, args.json, "\n".join(f"{k}: {v}" for k, v in sorted(paths.items())))
    return 0


def dispatch(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] in ("train", "eval"):
            args, rest = parser.parse_known_args(argv)
        else:
            args, rest = parser.parse_args(argv), []
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "plan":
            return _cmd_plan(args)
        if args.command == "preprocess":
            return _cmd_preprocess(args)
        if args.command == "dump":
            return _cmd_dump(args)
        if args.command == "train":
            return _cmd_train(args, rest)
        if args.command == "eval":
            return _cmd_eval(args, rest)
        if args.command == "report":
            return _cmd_report(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VippipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


def main() -> None:
    sys.exit(dispatch())
