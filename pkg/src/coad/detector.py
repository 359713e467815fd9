"""Row-level outlier detection on object feature vectors."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from coad.errors import ConfigurationError, ShapeError

METRICS = ("euclidean", "cosine")
METHODS = ("boxplot", "cluster")
IQR_MULTIPLIER = 1.5

DEGENERATE_ROW = "degenerate-row"


@dataclass
class DistanceMatrix:
    d: np.ndarray
    metric: str = "euclidean"

    def __len__(self):
        return len(self.d)


@dataclass
class AnomalyVerdict:
    method: str
    flagged: bool
    anomaly_index: int | None
    row_scores: list[float]
    details: dict[str, Any] = field(default_factory=dict)
    warning: str | None = None
    selection: str | None = None

    def to_record(self, row_id: str | None = None) -> dict[str, Any]:
        rec = {
            "row_id": row_id,
            "method": self.method,
            "selection": self.selection,
            "flagged": self.flagged,
            "anomaly_index": self.anomaly_index,
            "scores": [float(s) for s in self.row_scores],
        }
        if self.method == "boxplot":
            rec["fence"] = self.details.get("fence")
            rec["q1"] = self.details.get("q1")
            rec["q3"] = self.details.get("q3")
            rec["iqr"] = self.details.get("iqr")
        else:
            rec["cluster_sizes"] = self.details.get("cluster_sizes")
            rec["labels"] = self.details.get("labels")
        if self.warning:
            rec["warning"] = self.warning
        return rec

    def to_json(self, row_id: str | None = None) -> str:
        return json.dumps(self.to_record(row_id))


def _as_matrix(features) -> np.ndarray:
    vecs = [np.asarray(getattr(f, "vector", f), dtype=np.float64) for f in features]
    if any(v.ndim != 1 for v in vecs):
        raise ShapeError("features must be 1-D vectors")
    if len({v.shape for v in vecs}) > 1:
        raise ShapeError(f"feature dimensions differ: {sorted({v.shape[0] for v in vecs})}")
    return np.stack(vecs)


def pairwise_distances(features: Sequence, metric: str = "euclidean") -> DistanceMatrix:
    if metric not in METRICS:
        raise ConfigurationError(f"unknown metric {metric!r}")
    x = _as_matrix(features)
    if len(x) < 2:
        raise ShapeError("need at least two features")
    if metric == "euclidean":
        diff = x[:, None, :] - x[None, :, :]
        d = np.sqrt((diff**2).sum(-1))
    else:
        norms = np.linalg.norm(x, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        u = x / safe[:, None]
        d = 1.0 - np.clip(u @ u.T, -1.0, 1.0)
        d[norms == 0, :] = 1.0
        d[:, norms == 0] = 1.0
    d = np.maximum((d + d.T) / 2, 0.0)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d, metric)


def boxplot_fences(scores) -> dict[str, float]:
    scores = np.asarray(scores, dtype=np.float64)
    q1, q3 = np.quantile(scores, [0.25, 0.75], method="linear")
    iqr = q3 - q1
    return {
        "q1": float(q1),
        "median": float(np.median(scores)),
        "q3": float(q3),
        "iqr": float(iqr),
        "fence": float(q3 + IQR_MULTIPLIER * iqr),
        "lower_fence": float(q1 - IQR_MULTIPLIER * iqr),
    }


def boxplot_outlier(dist: DistanceMatrix | np.ndarray) -> AnomalyVerdict:
    """Flag the object whose summed distance to the others exceeds Q3 + 1.5 IQR.

    ``anomaly_index`` is always the argmax of the row sums (lowest index on
    ties); ``flagged`` says whether it clears the upper fence.
    """
    d = dist.d if isinstance(dist, DistanceMatrix) else np.asarray(dist, dtype=np.float64)
    return score_outlier(d.sum(axis=1))


def score_outlier(scores) -> AnomalyVerdict:
    """Upper-fence test on per-object aggregate distances."""
    scores = np.asarray(scores, dtype=np.float64)
    if len(scores) < 4:
        return AnomalyVerdict("boxplot", False, None, scores.tolist(), warning=DEGENERATE_ROW)
    stats = boxplot_fences(scores)
    idx = int(np.argmax(scores))
    flagged = bool(scores[idx] > stats["fence"])
    return AnomalyVerdict("boxplot", flagged, idx, scores.tolist(), details=stats)


def ward_agglomerate(x: np.ndarray, n_clusters: int = 2) -> np.ndarray:
    """Bottom-up Ward agglomeration; returns a label per row of ``x``.

    Each step merges the pair of clusters with the smallest increase in total
    within-cluster sum of squares, ``|A||B|/(|A|+|B|) * ||mean_A - mean_B||^2``.
    Ties go to the pair with the smallest member indices. Labels are numbered
    by first appearance.
    """
    x = np.asarray(x, dtype=np.float64)
    clusters = [[i] for i in range(len(x))]
    sizes = [1] * len(x)
    means = [row.copy() for row in x]
    while len(clusters) > n_clusters:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                gap = means[a] - means[b]
                cost = sizes[a] * sizes[b] / (sizes[a] + sizes[b]) * float(gap @ gap)
                if best is None or cost < best[0]:
                    best = (cost, a, b)
        _, a, b = best
        total = sizes[a] + sizes[b]
        means[a] = (sizes[a] * means[a] + sizes[b] * means[b]) / total
        sizes[a] = total
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b], sizes[b], means[b]
    labels = np.empty(len(x), dtype=int)
    for k, members in enumerate(sorted(clusters)):
        labels[members] = k
    return labels


def cluster_outlier(features: Sequence) -> AnomalyVerdict:
    """Ward clustering into two groups; a singleton group is the anomaly."""
    x = _as_matrix(features)
    n = len(x)
    if n < 3:
        return AnomalyVerdict("cluster", False, None, [0.0] * n, warning=DEGENERATE_ROW)
    scores = pairwise_distances(x).d.sum(axis=1).tolist()
    labels = ward_agglomerate(x, 2)
    sizes = np.bincount(labels, minlength=2)
    details = {"cluster_sizes": sizes.tolist(), "labels": labels.tolist()}
    small = int(np.argmin(sizes))
    if sizes[small] == 1 and sizes[1 - small] > 1:
        idx = int(np.flatnonzero(labels == small)[0])
        return AnomalyVerdict("cluster", True, idx, scores, details=details)
    return AnomalyVerdict("cluster", False, None, scores, details=details)


def detect_features(features: Sequence, method: str = "boxplot", metric: str = "euclidean") -> AnomalyVerdict:
    if method == "boxplot":
        return boxplot_outlier(pairwise_distances(features, metric))
    if method == "cluster":
        return cluster_outlier(features)
    raise ConfigurationError(f"unknown detection method {method!r}")


def detect(crops, model, selection="color", method: str = "boxplot", metric: str = "euclidean") -> AnomalyVerdict:
    """Encode one row of crops and flag its odd object."""
    from coad.embed import extract_row_features

    if len(crops) < 2:
        raise ValueError("a row needs at least two crops")
    feats = extract_row_features(crops, model, selection)
    verdict = detect_features(feats, method, metric)
    verdict.selection = getattr(selection, "mode", selection)
    return verdict
