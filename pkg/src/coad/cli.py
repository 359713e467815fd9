"""Command line entry point: ``coad {train,detect,evaluate,embed-cache}``.

Exit codes: 0 success (``detect``: anomaly flagged), 3 clean row from
``detect``, 2 usage or input error, 1 unexpected failure.
"""
from __future__ import annotations

import argparse
import json
import os
import logging
import sys
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from coad.config import VARIANTS, Config
from coad.detector import METHODS, METRICS, detect
from coad.embed import CACHE_ENV, SELECTIONS, FeatureCache, embed_batch
from coad.errors import ConfigurationError
from coad.harness.dataset import DatasetIndex, ManifestError, crop_row, resize

log = logging.getLogger("coad")

EXIT_FLAGGED = 0
EXIT_USAGE = 2
EXIT_CLEAN = 3

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"}

# CLI flag -> Config field
TRAIN_FLAGS = {
    "variant": "variant",
    "epochs": "epochs",
    "lr": "lr",
    "batch_size": "batch_size",
    "seed": "seed",
    "input_size": "input_size",
    "concept_dim": "concept_dim",
    "heads": "heads",
    "ff_width": "ff_width",
    "checkpoint_every": "checkpoint_every",
    "device": "device",
}


class UsageError(Exception):
    pass


def _echo(command: str, resolved: dict) -> None:
    print(json.dumps({"command": command, "resolved": resolved}, sort_keys=True), file=sys.stderr)


def _load_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0


def cmd_train(args) -> int:
    from coad.model.training import train, write_loss_curve

    base = Config.from_file(args.config) if args.config else Config()
    overrides = {field: getattr(args, flag) for flag, field in TRAIN_FLAGS.items() if getattr(args, flag) is not None}
    cfg = base.replace(**overrides)
    index = DatasetIndex.from_manifest(args.manifest)
    if len(index) == 0:
        raise UsageError(f"{args.manifest} has no records")
    out = Path(args.out or f"runs/{cfg.variant}")
    _echo("train", {"manifest": str(args.manifest), "out": str(out), **cfg.to_dict()})
    images = torch.from_numpy(index.load_many([r.id for r in index.records], cfg.input_size))

    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n")
    ckpt = train(images, cfg, checkpoint_dir=out, progress=lambda e, l: log.info("epoch %d loss %.6f", e, l))
    path = ckpt.save(out / "checkpoint.pt")
    write_loss_curve(ckpt.history, out / "loss.csv")
    print(path)
    return 0


def _row_crops(args, size: int) -> list[np.ndarray]:
    if args.row_dir:
        files = sorted(p for p in Path(args.row_dir).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        return [resize(_load_rgb(p), size) for p in files]
    if args.shelf_image and args.layout:
        layout = json.loads(Path(args.layout).read_text())
        boxes = layout["boxes"] if isinstance(layout, dict) else layout
        return crop_row(_load_rgb(Path(args.shelf_image)), boxes, size)
    raise UsageError("give --row-dir, or --shelf-image together with --layout")


def cmd_detect(args) -> int:
    from coad.model.training import Checkpoint

    ckpt = Checkpoint.load(args.checkpoint)
    _echo("detect", {"checkpoint": str(args.checkpoint), "features": args.features, "method": args.method, "metric": args.metric})
    crops = _row_crops(args, ckpt.config.input_size)
    if len(crops) < 2:
        raise UsageError(f"a row needs at least two crops, got {len(crops)}")
    verdict = detect(crops, ckpt.model, args.features, args.method, args.metric)
    print(verdict.to_json(row_id=args.row_id))
    return EXIT_FLAGGED if verdict.flagged else EXIT_CLEAN


def cmd_evaluate(args) -> int:
    from coad.harness.baselines import PretrainedBackbone
    from coad.harness.evaluate import BackboneSource, CheckpointSource, default_methods, evaluate
    from coad.harness.sets import build_eval_sets

    checkpoints = [Path(p) for p in args.checkpoint or []]
    missing = [str(p) for p in checkpoints if not p.is_file()]
    if args.resnet_weights and not Path(args.resnet_weights).is_file():
        missing.append(str(args.resnet_weights))
    if missing:
        raise UsageError("missing checkpoints: " + ", ".join(missing))
    if not checkpoints and not args.resnet_weights:
        raise UsageError("give at least one --checkpoint or --resnet-weights")

    index = DatasetIndex.from_manifest(args.manifest)
    cache = FeatureCache(args.cache_dir) if (args.cache_dir or os.environ.get(CACHE_ENV)) else None
    sources = []
    for path in checkpoints:
        src = CheckpointSource(path, cache=cache)
        if args.features:
            allowed = [s for s in args.features if s in src.selections]
            src.selections = tuple(allowed) or src.selections
        sources.append(src)
    if args.resnet_weights:
        sources.append(BackboneSource(PretrainedBackbone(args.resnet_weights, args.resnet_arch)))
    methods = {m: fn for m, fn in default_methods(args.metric).items() if m in args.methods}

    _echo(
        "evaluate",
        {
            "manifest": str(args.manifest),
            "checkpoints": [str(p) for p in checkpoints],
            "resnet_weights": args.resnet_weights,
            "sets": args.sets,
            "n_majority": args.n_majority,
            "seed": args.seed,
            "methods": list(methods),
            "metric": args.metric,
        },
    )
    sets = build_eval_sets(index, args.sets, args.n_majority, args.seed)
    report = evaluate(sets, index, sources, methods, boxplots=not args.no_boxplots)
    out = Path(args.out)
    paths = report.write(out)
    with open(out / "sets.jsonl", "w") as fh:
        for es in sets:
            fh.write(json.dumps(es.to_record()) + "\n")
    for row in report.grid():
        print(json.dumps(row))
    if report.invalid_sets:
        log.warning("%d sets skipped for unreadable images; see %s", len(report.invalid_sets), paths["invalid"])
    return 0


def cmd_embed_cache(args) -> int:
    from coad.model.training import Checkpoint, checkpoint_digest

    cache = FeatureCache(args.cache_dir)
    ckpt = Checkpoint.load(args.checkpoint)
    digest = checkpoint_digest(args.checkpoint)
    index = DatasetIndex.from_manifest(args.manifest)
    selections = ["both"] if ckpt.config.variant == "vit-ae" else (args.features or list(SELECTIONS))
    ids = [r.id for r in index.records]
    mats = embed_batch(ckpt.model, index.load_many(ids, ckpt.config.input_size), selections)
    for sel in selections:
        print(cache.store(digest, sel, dict(zip(ids, mats[sel]))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coad", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a concept auto-encoder or the ViT-AE baseline")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--config", type=Path, help="flat key=value or JSON config; flags override it")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--input-size", type=int)
    p.add_argument("--M", "--concept-dim", dest="concept_dim", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--ff-width", type=int)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--device")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="flag the misplaced object in one shelf row")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--row-dir", type=Path, help="directory of crops, read in filename order")
    p.add_argument("--shelf-image", type=Path)
    p.add_argument("--layout", type=Path, help="JSON list of [x, y, w, h] boxes for --shelf-image")
    p.add_argument("--features", choices=SELECTIONS, default="color")
    p.add_argument("--method", choices=METHODS, default="boxplot")
    p.add_argument("--metric", choices=METRICS, default="euclidean")
    p.add_argument("--row-id")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="success-rate grid over random evaluation sets")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--checkpoint", action="append", help="repeatable")
    p.add_argument("--resnet-weights", help="state dict of a torchvision classifier")
    p.add_argument("--resnet-arch", default="resnet50")
    p.add_argument("--sets", type=int, default=198)
    p.add_argument("--n-majority", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--features", nargs="+", choices=SELECTIONS)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument("--metric", choices=METRICS, default="euclidean")
    p.add_argument("--cache-dir", help=f"feature cache root (default ${CACHE_ENV} if set)")
    p.add_argument("--no-boxplots", action="store_true")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("embed-cache", help="precompute per-object features into the cache")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--features", nargs="+", choices=SELECTIONS)
    p.add_argument("--cache-dir", help=f"default ${CACHE_ENV}")
    p.set_defaults(func=cmd_embed_cache)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigurationError, ManifestError, FileNotFoundError) as exc:
        print(f"coad {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
