"""Command line: serve the game service, train and run the detector."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from sketchmon.datakit.evaluate import evaluate
from sketchmon.datakit.gt import ground_truth_boxes
from sketchmon.datakit.schema import load_session, read_manifest, save_session, write_manifest
from sketchmon.datakit.split import SplitSpec, split
from sketchmon.datakit.synth import TOY_RENDER, overfit_dataset
from sketchmon.datakit.trainset import examples_from_sessions
from sketchmon.detector.net import DetectorNet
from sketchmon.detector.runtime import NetDetector
from sketchmon.detector.train import train
from sketchmon.detector.types import NetConfig, TrainConfig, TrainMode
from sketchmon.detector.weights_io import load_weights, save_weights
from sketchmon.gateway.config import ServerConfig
from sketchmon.strokes import CanvasSnapshot, RenderConfig, rasterize


def _net_config(args) -> NetConfig:
    base = NetConfig.toy() if args.profile == "toy" else NetConfig()
    if args.config:
        overrides = json.loads(Path(args.config).read_text()).get("net", {})
        base = dataclasses.replace(base, **overrides)
    return base


def _render_config(net_cfg: NetConfig) -> RenderConfig:
    if net_cfg.input_size == TOY_RENDER.width:
        return TOY_RENDER
    return RenderConfig(width=net_cfg.input_size, height=net_cfg.input_size)


def _load_sessions(dataset: str, wanted_split: str | None):
    root = Path(dataset)
    manifest = root / "manifest.jsonl"
    if manifest.exists():
        entries = read_manifest(manifest)
        if wanted_split:
            entries = [e for e in entries if e.get("split") == wanted_split]
        return [load_session(root / e["path"]) for e in entries]
    return [load_session(p) for p in sorted(root.glob("*.json"))]


def cmd_train(args) -> int:
    net_cfg = _net_config(args)
    train_cfg = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        mode=TrainMode(args.mode),
        seed=args.seed,
    )
    if args.config:
        overrides = json.loads(Path(args.config).read_text()).get("train", {})
        if "mode" in overrides:
            overrides["mode"] = TrainMode(overrides["mode"])
        train_cfg = dataclasses.replace(train_cfg, **overrides)
    sessions = _load_sessions(args.dataset, "train")
    examples = examples_from_sessions(sessions, _render_config(net_cfg))
    print(f"training on {len(examples)} canvases", file=sys.stderr)
    result = train(
        examples,
        net_cfg,
        train_cfg,
        on_epoch=lambda e, l: print(f"epoch {e}: loss {l:.4f}", file=sys.stderr),
    )
    save_weights(result.net, args.out)
    log_path = Path(args.out).with_suffix(".losses.json")
    log_path.write_text(json.dumps(result.loss_log))
    print(f"saved model ({result.net.parameter_count()} parameters) to {args.out}")
    return 0


def _detector_from_args(args) -> NetDetector:
    net_cfg = _net_config(args)
    net = DetectorNet(net_cfg)
    load_weights(net, args.model)
    return NetDetector(net, score_thresh=args.score_thresh)


def cmd_detect(args) -> int:
    det = _detector_from_args(args)
    render_cfg = _render_config(det.net.cfg)
    for session in _load_sessions(args.dataset, None):
        canvas = rasterize(
            CanvasSnapshot(session.session_id, 0, tuple(session.strokes)), render_cfg
        )
        boxes = det.detect(canvas)
        print(
            json.dumps(
                {
                    "image": session.session_id,
                    "boxes": [
                        {
                            "cx": b.cx,
                            "cy": b.cy,
                            "w": b.w,
                            "h": b.h,
                            "category": b.category.value,
                            "conf": b.confidence,
                        }
                        for b in boxes
                    ],
                },
                separators=(",", ":"),
            )
        )
    return 0


def cmd_eval(args) -> int:
    det = _detector_from_args(args)
    render_cfg = _render_config(det.net.cfg)
    sessions = _load_sessions(args.dataset, args.split)
    preds, gts = {}, {}
    for session in sessions:
        canvas = rasterize(
            CanvasSnapshot(session.session_id, 0, tuple(session.strokes)), render_cfg
        )
        preds[session.session_id] = det.detect(canvas)
        gts[session.session_id] = ground_truth_boxes(session, render_cfg)
    report = evaluate(preds, gts, iou_thresh=args.iou)
    print(json.dumps(report.to_obj(), indent=2))
    print(report.format_table(), file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sessions = overfit_dataset(seed=args.seed, count=args.count)
    parts = split(sessions, SplitSpec(seed=args.seed))
    entries = []
    for name, members in parts.items():
        for s in members:
            path = f"{s.session_id}.json"
            save_session(s, out / path)
            entries.append(
                {
                    "path": path,
                    "phrase": s.phrase,
                    "has_annotations": s.has_annotations,
                    "split": name,
                }
            )
    write_manifest(entries, out / "manifest.jsonl")
    print(f"wrote {len(entries)} synthetic sessions to {out}")
    return 0


def cmd_serve(args) -> int:
    from sketchmon.service import run_service

    config = ServerConfig.load(args.config) if args.config else ServerConfig.load()
    run_service(config)
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    parser = argparse.ArgumentParser(prog="sketchmon")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the detector on a session dataset")
    p_train.add_argument("--dataset", required=True, help="directory of session JSON files")
    p_train.add_argument("--out", required=True, help="output weight archive")
    p_train.add_argument("--config", help="JSON file with net/train overrides")
    p_train.add_argument("--profile", choices=["toy", "full"], default="toy")
    p_train.add_argument("--epochs", type=int, default=350)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--mode", choices=[m.value for m in TrainMode], default="multiclass")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(fn=cmd_train)

    p_detect = sub.add_parser("detect", help="run detection; one JSON line per image")
    p_detect.add_argument("--dataset", required=True)
    p_detect.add_argument("--model", required=True)
    p_detect.add_argument("--config", help="JSON file with net overrides")
    p_detect.add_argument("--profile", choices=["toy", "full"], default="toy")
    p_detect.add_argument("--score-thresh", type=float, default=0.5)
    p_detect.set_defaults(fn=cmd_detect)

    p_eval = sub.add_parser("eval", help="score a model against ground truth")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--config", help="JSON file with net overrides")
    p_eval.add_argument("--profile", choices=["toy", "full"], default="toy")
    p_eval.add_argument("--split", default=None, help="train/val/test (manifest datasets)")
    p_eval.add_argument("--iou", type=float, default=0.5)
    p_eval.add_argument("--score-thresh", type=float, default=0.5)
    p_eval.set_defaults(fn=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate a synthetic glyph dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--count", type=int, default=20)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.set_defaults(fn=cmd_synth)

    p_serve = sub.add_parser("serve", help="run the game and monitoring service")
    p_serve.add_argument("--config", help="JSON server config file")
    p_serve.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
