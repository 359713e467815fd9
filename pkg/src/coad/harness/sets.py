"""Evaluation sets: n majority-class objects plus one planted anomaly."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from coad.harness.dataset import DatasetIndex


class EvaluationSetError(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationSet:
    set_id: int
    object_ids: tuple[str, ...]
    majority_label: str
    anomaly_label: str
    anomaly_position: int
    seed: int

    def __len__(self):
        return len(self.object_ids)

    def validate(self, index: DatasetIndex) -> None:
        labels = [index.by_id[oid].label for oid in self.object_ids]
        if len(labels) < 4:
            raise EvaluationSetError(f"set {self.set_id}: size {len(labels)} < 4")
        if self.majority_label == self.anomaly_label:
            raise EvaluationSetError(f"set {self.set_id}: anomaly class equals majority class")
        odd = [i for i, lab in enumerate(labels) if lab != self.majority_label]
        if odd != [self.anomaly_position] or labels[self.anomaly_position] != self.anomaly_label:
            raise EvaluationSetError(f"set {self.set_id}: expected exactly one off-class object at {self.anomaly_position}")

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["object_ids"] = list(self.object_ids)
        return rec


def build_eval_sets(
    index: DatasetIndex,
    k: int,
    n_majority: int = 9,
    seed: int = 0,
    pair_filter: Callable[[str, str], bool] | None = None,
    max_retries: int = 100,
) -> list[EvaluationSet]:
    """Draw ``k`` sets from ``index``.

    Each set takes ``n_majority`` distinct images of a uniformly random class
    and one image of a different uniformly random class, inserted at a uniform
    position. Images may recur across sets. ``pair_filter(majority, anomaly)``
    restricts which class pairs are admissible. A class drawn without enough
    images is redrawn, up to ``max_retries`` times per set.
    """
    labels = index.labels
    if len(labels) < 2:
        raise EvaluationSetError("need at least two classes")
    if n_majority < 3:
        raise EvaluationSetError("n_majority must be at least 3 (sets of at least 4)")
    if not any(len(index.by_label[lab]) >= n_majority for lab in labels):
        raise EvaluationSetError(f"no class has {n_majority} images")

    rng = np.random.default_rng(seed)
    sets = []
    for set_id in range(k):
        for _ in range(max_retries):
            majority = labels[rng.integers(len(labels))]
            others = [lab for lab in labels if lab != majority and (pair_filter is None or pair_filter(majority, lab))]
            if len(index.by_label[majority]) < n_majority or not others:
                continue
            anomaly = others[rng.integers(len(others))]
            break
        else:
            raise EvaluationSetError(
                f"set {set_id}: no admissible class pair with {n_majority} majority images after {max_retries} draws"
            )
        pool = index.by_label[majority]
        chosen = [pool[i] for i in rng.choice(len(pool), size=n_majority, replace=False)]
        odd_pool = index.by_label[anomaly]
        odd = odd_pool[rng.integers(len(odd_pool))]
        position = int(rng.integers(n_majority + 1))
        chosen.insert(position, odd)
        es = EvaluationSet(set_id, tuple(chosen), majority, anomaly, position, seed)
        es.validate(index)
        sets.append(es)
    return sets
