"""Per-object feature vectors from concept embeddings."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch

from coad.errors import ConfigurationError, ShapeError
from coad.model.network import COLOR_NAMES, ConceptEmbedding

SELECTIONS = ("color", "content", "both")
CACHE_ENV = "COAD_CACHE_DIR"


@dataclass(frozen=True)
class FeatureSelection:
    mode: str = "both"

    def __post_init__(self):
        if self.mode not in SELECTIONS:
            raise ConfigurationError(f"unknown feature selection {self.mode!r}; choose from {SELECTIONS}")

    def block_names(self, embedding: ConceptEmbedding) -> list[str]:
        color = [n for n in COLOR_NAMES if n in embedding.color]
        content = list(embedding.content)
        if self.mode in ("color", "both") and len(color) != 3:
            raise ConfigurationError("embedding has no color blocks")
        if self.mode in ("content", "both") and not content:
            raise ConfigurationError("embedding has no content blocks")
        return {"color": color, "content": content, "both": color + content}[self.mode]


@dataclass
class ObjectFeature:
    vector: np.ndarray
    object_id: str | None = None


class CropError(ValueError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"crop {index}: {reason}")
        self.index = index


def _as_selection(selection) -> FeatureSelection:
    return selection if isinstance(selection, FeatureSelection) else FeatureSelection(selection)


def l2_normalize(x: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.where(norm > 0, x / np.where(norm > 0, norm, 1.0), x)


def pool_blocks(blocks: Sequence, normalize: bool = True) -> np.ndarray:
    """Mean over the patch axis of each block, concatenated, then L2-normalised.

    Blocks are ``(N, M)`` or ``(B, N, M)``; the result is ``(D,)`` or ``(B, D)``.
    """
    pooled = []
    for block in blocks:
        arr = block.detach().cpu().double().numpy() if isinstance(block, torch.Tensor) else np.asarray(block, float)
        if arr.ndim not in (2, 3):
            raise ShapeError(f"concept block must be (N, M) or (B, N, M), got {arr.shape}")
        pooled.append(arr.mean(axis=-2))
    vec = np.concatenate(pooled, axis=-1)
    return l2_normalize(vec) if normalize else vec


def pool(embedding: ConceptEmbedding, selection="both", object_id: str | None = None) -> ObjectFeature:
    sel = _as_selection(selection)
    blocks = embedding.blocks()
    names = sel.block_names(embedding)
    return ObjectFeature(pool_blocks([blocks[n] for n in names]), object_id)


def _validate_crops(crops, size: int) -> torch.Tensor:
    batch = []
    for i, crop in enumerate(crops):
        t = torch.as_tensor(np.asarray(crop) if not isinstance(crop, torch.Tensor) else crop, dtype=torch.float32)
        if tuple(t.shape) != (3, size, size):
            raise CropError(i, f"expected shape (3, {size}, {size}), got {tuple(t.shape)}")
        if not torch.isfinite(t).all():
            raise CropError(i, "non-finite pixel values")
        batch.append(t)
    return torch.stack(batch)


@torch.no_grad()
def embed_batch(model, crops, selections: Iterable = SELECTIONS, batch_size: int = 64) -> dict[str, np.ndarray]:
    """Feature matrices ``{selection: (K, D)}`` for ``crops`` under a frozen model.

    ``vit-ae`` models only provide the ``both`` selection (the whole latent).
    """
    model.eval()
    size = model.cfg.input_size
    images = _validate_crops(crops, size)
    selections = [_as_selection(s).mode for s in selections]
    if model.variant == "vit-ae" and any(s != "both" for s in selections):
        raise ConfigurationError("vit-ae has a single entangled latent; only the 'both' selection exists")
    chunks: dict[str, list[np.ndarray]] = {s: [] for s in selections}
    device = next(model.parameters()).device
    for start in range(0, len(images), batch_size):
        part = images[start : start + batch_size].to(device)
        if model.variant == "vit-ae":
            chunks["both"].append(pool_blocks([model.encode_latent(part)]))
            continue
        emb = model.encode(part)
        blocks = emb.blocks()
        for s in selections:
            names = FeatureSelection(s).block_names(emb)
            chunks[s].append(pool_blocks([blocks[n] for n in names]))
    return {s: np.concatenate(v) for s, v in chunks.items()}


def extract_row_features(crops, model, selection="both", object_ids=None) -> list[ObjectFeature]:
    """Encode then pool each crop of one row, preserving order."""
    if len(crops) < 2:
        raise ValueError("a row needs at least two crops")
    mode = _as_selection(selection).mode
    feats = embed_batch(model, crops, [mode])[mode]
    ids = list(object_ids) if object_ids is not None else [None] * len(feats)
    return [ObjectFeature(vec, oid) for vec, oid in zip(feats, ids)]


class FeatureCache:
    """JSON-lines store of ``{"id", "vector"}`` records, one file per checkpoint digest and selection."""

    def __init__(self, root: str | Path | None = None):
        root = root if root is not None else os.environ.get(CACHE_ENV)
        if root is None:
            raise ConfigurationError(f"no cache directory given and ${CACHE_ENV} is unset")
        self.root = Path(root)

    def path(self, digest: str, selection: str) -> Path:
        return self.root / f"{digest[:16]}-{_as_selection(selection).mode}.jsonl"

    def load(self, digest: str, selection: str) -> dict[str, np.ndarray]:
        path = self.path(digest, selection)
        if not path.exists():
            return {}
        out = {}
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    out[rec["id"]] = np.asarray(rec["vector"], dtype=np.float64)
        return out

    def store(self, digest: str, selection: str, features: dict[str, np.ndarray]) -> Path:
        path = self.path(digest, selection)
        path.parent.mkdir(parents=True, exist_ok=True)
        merged = {**self.load(digest, selection), **features}
        with open(path, "w") as fh:
            for oid in sorted(merged):
                fh.write(json.dumps({"id": oid, "vector": [float(x) for x in merged[oid]]}) + "\n")
        return path
