"""Manifest-driven image index and row cropping."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from coad.errors import ShapeError


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: str
    label: str
    shelf_id: str | None = None
    row_id: str | None = None
    bbox: tuple[float, float, float, float] | None = None


class ManifestError(ValueError):
    pass


class BoxError(ValueError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"box {index}: {reason}")
        self.index = index


class DatasetIndex:
    """Labelled image records keyed by object id; relative paths resolve against ``root``."""

    def __init__(self, records: Iterable[ImageRecord], root: str | Path = "."):
        self.root = Path(root)
        self.records: list[ImageRecord] = []
        self.by_id: dict[str, ImageRecord] = {}
        for rec in records:
            if rec.id in self.by_id:
                raise ManifestError(f"duplicate object id {rec.id!r}")
            if rec.bbox is not None and (len(rec.bbox) != 4 or rec.bbox[2] <= 0 or rec.bbox[3] <= 0):
                raise ManifestError(f"{rec.id}: bbox must be [x, y, w, h] with positive size")
            self.by_id[rec.id] = rec
            self.records.append(rec)
        self.by_label: dict[str, list[str]] = {}
        for rec in self.records:
            self.by_label.setdefault(rec.label, []).append(rec.id)

    def __len__(self):
        return len(self.records)

    @property
    def labels(self) -> list[str]:
        return sorted(self.by_label)

    def resolve(self, rec: ImageRecord) -> Path:
        p = Path(rec.path)
        return p if p.is_absolute() else self.root / p

    @classmethod
    def from_manifest(cls, path: str | Path) -> "DatasetIndex":
        """Read JSON-lines (``.jsonl``) or CSV with columns id, path, label[, shelf_id, row_id, bbox]."""
        path = Path(path)
        if not path.is_file():
            raise ManifestError(f"manifest not found: {path}")
        raw: list[dict] = []
        if path.suffix.lower() == ".csv":
            with open(path, newline="") as fh:
                for row in csv.DictReader(fh):
                    row = {k: v for k, v in row.items() if v not in (None, "")}
                    if "bbox" in row:
                        row["bbox"] = json.loads(row["bbox"]) if row["bbox"].startswith("[") else row["bbox"].split()
                    raw.append(row)
        else:
            with open(path) as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        raw.append(json.loads(line))
                    except json.JSONDecodeError as exc:
                        raise ManifestError(f"{path}:{lineno}: {exc}") from None
        records = []
        for n, row in enumerate(raw, 1):
            missing = {"id", "path", "label"} - row.keys()
            if missing:
                raise ManifestError(f"{path}: record {n} lacks {sorted(missing)}")
            unknown = row.keys() - {"id", "path", "label", "shelf_id", "row_id", "bbox"}
            if unknown:
                raise ManifestError(f"{path}: record {n} has unknown fields {sorted(unknown)}")
            bbox = row.get("bbox")
            records.append(
                ImageRecord(
                    id=str(row["id"]),
                    path=str(row["path"]),
                    label=str(row["label"]),
                    shelf_id=None if row.get("shelf_id") is None else str(row["shelf_id"]),
                    row_id=None if row.get("row_id") is None else str(row["row_id"]),
                    bbox=None if bbox is None else tuple(float(v) for v in bbox),
                )
            )
        return cls(records, root=path.parent)

    def load(self, object_id: str, size: int) -> np.ndarray:
        """``(3, size, size)`` float32 image in [0, 1], cropped to the record's bbox if any."""
        rec = self.by_id[object_id]
        path = self.resolve(rec)
        try:
            with Image.open(path) as im:
                img = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
        except (OSError, ValueError) as exc:
            raise ManifestError(f"{rec.id}: cannot read image {path}: {exc}") from None
        if rec.bbox is not None:
            return crop_row(img, [rec.bbox], size)[0]
        return resize(img, size)

    def load_many(self, object_ids: Sequence[str], size: int) -> np.ndarray:
        return np.stack([self.load(oid, size) for oid in object_ids])


def resize(img: np.ndarray, size: int) -> np.ndarray:
    """``(H, W, 3)`` float image -> ``(3, size, size)`` float32 via bilinear resampling."""
    if img.shape[:2] != (size, size):
        channels = [
            np.asarray(Image.fromarray(np.ascontiguousarray(img[..., c], dtype=np.float32)).resize((size, size), Image.BILINEAR))
            for c in range(3)
        ]
        img = np.stack(channels, axis=-1)
    return np.ascontiguousarray(np.clip(img, 0.0, 1.0).transpose(2, 0, 1), dtype=np.float32)


def crop_row(shelf_image, boxes: Sequence[Sequence[float]], size: int) -> list[np.ndarray]:
    """Cut ``[x, y, w, h]`` boxes out of one shelf row image, ordered left to right.

    ``shelf_image`` is ``(H, W, 3)`` (float in [0, 1] or uint8) or a PIL image.
    Boxes are sorted by x-center; pixel coordinates are rounded to the
    enclosing integer grid.
    """
    if isinstance(shelf_image, Image.Image):
        shelf_image = np.asarray(shelf_image.convert("RGB"))
    img = np.asarray(shelf_image)
    if img.dtype == np.uint8:
        img = img.astype(np.float32) / 255.0
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"shelf image must be (H, W, 3), got {img.shape}")
    if len(boxes) == 0:
        raise ValueError("no boxes given")
    height, width = img.shape[:2]
    spans = []
    for i, box in enumerate(boxes):
        if len(box) != 4:
            raise BoxError(i, "expected [x, y, w, h]")
        x, y, w, h = (float(v) for v in box)
        if w <= 0 or h <= 0:
            raise BoxError(i, "zero or negative area")
        if x < 0 or y < 0 or x + w > width or y + h > height:
            raise BoxError(i, f"[{x}, {y}, {w}, {h}] outside {width}x{height} image")
        x0, y0 = int(np.floor(x)), int(np.floor(y))
        x1, y1 = int(np.ceil(x + w)), int(np.ceil(y + h))
        spans.append((x + w / 2, i, (x0, y0, x1, y1)))
    spans.sort(key=lambda s: (s[0], s[1]))
    return [resize(img[y0:y1, x0:x1], size) for _, _, (x0, y0, x1, y1) in spans]
