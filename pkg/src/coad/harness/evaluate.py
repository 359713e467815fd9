"""Run detectors over evaluation sets and tabulate success rates."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from coad.detector import AnomalyVerdict, boxplot_outlier, cluster_outlier, pairwise_distances
from coad.embed import SELECTIONS, FeatureCache, embed_batch
from coad.errors import ConfigurationError
from coad.harness.boxplot import emit_boxplot_data
from coad.harness.dataset import DatasetIndex
from coad.harness.sets import EvaluationSet

log = logging.getLogger(__name__)

DISPLAY_NAMES = {"vit-cm-dwt": "ViT-CM-DWT", "vit-cm": "ViT-CM", "vit-ae": "ViT-AE"}

# method name -> detector(features (n, D), evaluation set) -> verdict
Detector = Callable[[np.ndarray, EvaluationSet], AnomalyVerdict]


def _boxplot(metric: str = "euclidean") -> Detector:
    return lambda feats, _set: boxplot_outlier(pairwise_distances(feats, metric))


def _cluster(feats, _set):
    return cluster_outlier(feats)


def default_methods(metric: str = "euclidean") -> dict[str, Detector]:
    return {"cluster": _cluster, "boxplot": _boxplot(metric)}


class FeatureSource:
    """Produces ``{selection: {object_id: vector}}`` for a batch of object ids."""

    name: str
    selections: tuple[str, ...]

    def features(self, index: DatasetIndex, object_ids: Sequence[str]) -> tuple[dict, dict]:
        """Return ``(features, errors)``; ``errors`` maps unreadable ids to a reason."""
        raise NotImplementedError


def _load_images(index: DatasetIndex, object_ids, size):
    ok, images, errors = [], [], {}
    for oid in object_ids:
        try:
            images.append(index.load(oid, size))
            ok.append(oid)
        except (OSError, ValueError, KeyError) as exc:
            errors[oid] = str(exc)
    return ok, images, errors


class ModelSource(FeatureSource):
    def __init__(self, model, name: str | None = None, selections=None, cache: FeatureCache | None = None, digest: str | None = None):
        self.model = model
        self.name = name or DISPLAY_NAMES.get(model.variant, model.variant)
        if selections is None:
            selections = ("both",) if model.variant == "vit-ae" else SELECTIONS
        self.selections = tuple(selections)
        self.cache = cache
        self.digest = digest

    def features(self, index, object_ids):
        out = {s: {} for s in self.selections}
        todo = list(object_ids)
        if self.cache is not None and self.digest is not None:
            cached = {s: self.cache.load(self.digest, s) for s in self.selections}
            todo = [oid for oid in object_ids if not all(oid in cached[s] for s in self.selections)]
            for s in self.selections:
                out[s].update({oid: cached[s][oid] for oid in object_ids if oid in cached[s]})
        ok, images, errors = _load_images(index, todo, self.model.cfg.input_size)
        if ok:
            mats = embed_batch(self.model, images, self.selections)
            for s in self.selections:
                fresh = dict(zip(ok, mats[s]))
                out[s].update(fresh)
                if self.cache is not None and self.digest is not None:
                    self.cache.store(self.digest, s, fresh)
        return out, errors


class CheckpointSource(ModelSource):
    def __init__(self, path, name: str | None = None, selections=None, cache: FeatureCache | None = None):
        from coad.model.training import Checkpoint, checkpoint_digest

        ckpt = Checkpoint.load(path)
        super().__init__(ckpt.model, name, selections, cache, checkpoint_digest(path))
        self.path = Path(path)


class BackboneSource(FeatureSource):
    def __init__(self, backbone, name: str = "ResNet"):
        self.backbone = backbone
        self.name = name
        self.selections = ("both",)

    def features(self, index, object_ids):
        ok, images, errors = _load_images(index, object_ids, self.backbone.input_size)
        feats = dict(zip(ok, self.backbone(images))) if ok else {}
        return {"both": feats}, errors


class ArraySource(FeatureSource):
    """Precomputed vectors, e.g. from a feature cache or a test stub."""

    def __init__(self, name: str, vectors: dict[str, dict[str, np.ndarray]]):
        self.name = name
        self.vectors = vectors
        self.selections = tuple(vectors)

    def features(self, index, object_ids):
        errors = {oid: "no stored vector" for oid in object_ids if any(oid not in v for v in self.vectors.values())}
        return {s: {oid: v[oid] for oid in object_ids if oid in v} for s, v in self.vectors.items()}, errors


@dataclass
class Cell:
    model: str
    selection: str
    method: str
    trials: int = 0
    correct: int = 0

    @property
    def success_rate(self) -> float:
        return self.correct / self.trials if self.trials else float("nan")


@dataclass
class SuccessReport:
    set_size: int
    num_sets: int
    methods: tuple[str, ...]
    cells: list[Cell] = field(default_factory=list)
    trials: list[dict] = field(default_factory=list)
    boxplots: list[dict] = field(default_factory=list)
    invalid_sets: dict[int, str] = field(default_factory=dict)

    def cell(self, model: str, selection: str, method: str) -> Cell:
        for c in self.cells:
            if (c.model, c.selection, c.method) == (model, selection, method):
                return c
        raise KeyError((model, selection, method))

    def rate(self, model: str, selection: str, method: str) -> float:
        return self.cell(model, selection, method).success_rate

    def grid(self) -> list[dict]:
        rows: dict[tuple[str, str], dict] = {}
        for c in self.cells:
            row = rows.setdefault(
                (c.model, c.selection),
                {"model": c.model, "selection": c.selection, "set_size": self.set_size, "trials": c.trials},
            )
            row[f"{c.method}_correct"] = c.correct
            row[f"{c.method}_rate"] = f"{100 * c.success_rate:.2f}"
        return list(rows.values())

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "grid": out_dir / "grid.csv",
            "trials": out_dir / "trials.jsonl",
            "boxplots": out_dir / "boxplots.jsonl",
            "invalid": out_dir / "invalid_sets.json",
        }
        fieldnames = ["model", "selection", "set_size", "trials"]
        for m in self.methods:
            fieldnames += [f"{m}_correct", f"{m}_rate"]
        with open(paths["grid"], "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.grid())
        with open(paths["trials"], "w") as fh:
            for rec in self.trials:
                fh.write(json.dumps(rec) + "\n")
        with open(paths["boxplots"], "w") as fh:
            for rec in self.boxplots:
                fh.write(json.dumps(rec) + "\n")
        paths["invalid"].write_text(json.dumps({str(k): v for k, v in sorted(self.invalid_sets.items())}, indent=1) + "\n")
        return paths


def evaluate(
    sets: Sequence[EvaluationSet],
    index: DatasetIndex,
    sources: Sequence[FeatureSource],
    methods: dict[str, Detector] | None = None,
    boxplots: bool = False,
) -> SuccessReport:
    """Score every (source x selection x method) cell on every set.

    A trial counts as correct when the detector flags an object and that
    object sits at the planted position. Sets with an unreadable image are
    dropped from every cell and listed in ``invalid_sets``.
    """
    if not sets:
        raise ConfigurationError("no evaluation sets")
    methods = methods if methods is not None else default_methods()
    sizes = {len(s) for s in sets}
    report = SuccessReport(set_size=sizes.pop() if len(sizes) == 1 else -1, num_sets=len(sets), methods=tuple(methods))

    needed = sorted({oid for s in sets for oid in s.object_ids})
    per_source = []
    for src in sources:
        feats, errors = src.features(index, needed)
        per_source.append((src, feats, errors))
        for oid, reason in errors.items():
            log.warning("%s: %s", src.name, reason)
        for sel in src.selections:
            for m in methods:
                report.cells.append(Cell(src.name, sel, m))

    for es in sets:
        for src, feats, errors in per_source:
            bad = [oid for oid in es.object_ids if oid in errors]
            if bad:
                report.invalid_sets[es.set_id] = f"{src.name}: unreadable {', '.join(bad)}: {errors[bad[0]]}"
    for es in sorted(sets, key=lambda s: s.set_id):
        if es.set_id in report.invalid_sets:
            continue
        for src, feats, _ in per_source:
            row = {sel: np.stack([feats[sel][oid] for oid in es.object_ids]) for sel in src.selections}
            for sel in src.selections:
                for m, fn in methods.items():
                    verdict = fn(row[sel], es)
                    correct = bool(verdict.flagged and verdict.anomaly_index == es.anomaly_position)
                    cell = report.cell(src.name, sel, m)
                    cell.trials += 1
                    cell.correct += int(correct)
                    rec = verdict.to_record(row_id=str(es.set_id))
                    rec.update(model=src.name, selection=sel, method=m, planted_index=es.anomaly_position, correct=correct)
                    report.trials.append(rec)
            if boxplots:
                data = emit_boxplot_data(row, row_id=str(es.set_id))
                data["model"] = src.name
                data["planted_index"] = es.anomaly_position
                report.boxplots.append(data)
    return report
