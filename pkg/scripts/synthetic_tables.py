"""Desk-scale version of the success-rate tables on synthetic shelves.

Trains ViT-CM-DWT, ViT-CM and the ViT-AE baseline at 64x64 on the synthetic
colored-shapes set, then scores every (model, features, method) cell on K
held-out evaluation sets. Optionally adds a pretrained ResNet row if a local
state-dict file is given.

    python scripts/synthetic_tables.py runs/synthetic --epochs 100 --sets 72
"""
import argparse
import logging
import time
from pathlib import Path

import torch

from coad.config import Config
from coad.harness import BackboneSource, DatasetIndex, ModelSource, PretrainedBackbone, build_eval_sets, evaluate
from coad.harness.synthetic import write_dataset
from coad.model import train, write_loss_curve

log = logging.getLogger("synthetic_tables")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out", type=Path)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--per-class", type=int, default=50)
    ap.add_argument("--sets", type=int, default=72)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--variants", nargs="+", default=["vit-cm-dwt", "vit-cm", "vit-ae"])
    ap.add_argument("--resnet-weights")
    ap.add_argument("--resnet-arch", default="resnet50")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    train_manifest = write_dataset(args.out / "data" / "train", args.per_class, 64, seed=args.seed)
    eval_manifest = write_dataset(args.out / "data" / "eval", 20, 64, seed=args.seed + 1)
    train_index = DatasetIndex.from_manifest(train_manifest)
    images = torch.from_numpy(train_index.load_many([r.id for r in train_index.records], 64))

    sources = []
    for variant in args.variants:
        cfg = Config(variant=variant, input_size=64, epochs=args.epochs, seed=args.seed)
        start = time.perf_counter()
        ckpt = train(images, cfg)
        log.info("%s trained in %.1fs", variant, time.perf_counter() - start)
        ckpt.save(args.out / f"{variant}.pt")
        write_loss_curve(ckpt.history, args.out / f"{variant}-loss.csv")
        sources.append(ModelSource(ckpt.model))
    if args.resnet_weights:
        sources.append(BackboneSource(PretrainedBackbone(args.resnet_weights, args.resnet_arch)))

    index = DatasetIndex.from_manifest(eval_manifest)
    sets = build_eval_sets(index, args.sets, seed=args.seed)
    report = evaluate(sets, index, sources, boxplots=True)
    report.write(args.out / "report")
    print(f"{'model':<12} {'features':<8} {'cluster':>8} {'boxplot':>8}")
    for row in report.grid():
        print(f"{row['model']:<12} {row['selection']:<8} {row['cluster_rate']:>7}% {row['boxplot_rate']:>7}%")


if __name__ == "__main__":
    main()
