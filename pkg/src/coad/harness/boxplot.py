from __future__ import annotations

import numpy as np

from coad.detector import boxplot_fences, pairwise_distances


def boxplot_summary(features, metric: str = "euclidean") -> dict:
    """Mean pairwise distance of each object to the others, with box statistics.

    Features are L2-normalised, so Euclidean distances lie in [0, 2].
    """
    feats = np.asarray([getattr(f, "vector", f) for f in features], dtype=np.float64)
    if len(feats) < 4:
        raise ValueError("box statistics need at least four objects")
    d = pairwise_distances(feats, metric).d
    scores = d.sum(axis=1) / (len(feats) - 1)
    stats = boxplot_fences(scores)
    inside = scores[(scores >= stats["lower_fence"]) & (scores <= stats["fence"])]
    stats["whisker_low"] = float(inside.min()) if inside.size else stats["q1"]
    stats["whisker_high"] = float(inside.max()) if inside.size else stats["q3"]
    stats["scores"] = scores.tolist()
    stats["outliers"] = [i for i, s in enumerate(scores) if s > stats["fence"] or s < stats["lower_fence"]]
    return stats


def emit_boxplot_data(features_by_selection: dict, row_id=None, metric: str = "euclidean") -> dict:
    """Plot-ready box statistics for each feature selection of one row."""
    return {
        "row_id": row_id,
        "metric": metric,
        "selections": {sel: boxplot_summary(f, metric) for sel, f in features_by_selection.items()},
    }
