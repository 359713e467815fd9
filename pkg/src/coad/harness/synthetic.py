"""Colored-shape product images on shelf-like backgrounds.

Twelve classes, each with its own color. Shapes repeat across classes (three
classes per shape), so some class pairs differ only by color.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

SHAPES = ("circle", "square", "triangle", "stripes")

PALETTE = {
    "red": (0.85, 0.10, 0.10),
    "green": (0.10, 0.70, 0.20),
    "blue": (0.10, 0.20, 0.85),
    "yellow": (0.95, 0.85, 0.10),
    "magenta": (0.80, 0.10, 0.70),
    "cyan": (0.10, 0.80, 0.85),
    "orange": (1.00, 0.50, 0.05),
    "purple": (0.45, 0.15, 0.60),
    "white": (0.95, 0.95, 0.95),
    "navy": (0.05, 0.05, 0.30),
    "brown": (0.50, 0.30, 0.10),
    "pink": (1.00, 0.60, 0.75),
}


@dataclass(frozen=True)
class SyntheticClass:
    label: str
    color: tuple[float, float, float]
    shape: str


CLASSES = tuple(
    SyntheticClass(f"{name}-{SHAPES[i % len(SHAPES)]}", rgb, SHAPES[i % len(SHAPES)])
    for i, (name, rgb) in enumerate(PALETTE.items())
)
CLASS_BY_LABEL = {c.label: c for c in CLASSES}

_SUPERSAMPLE = 4


def _background(size: int, rng: np.random.Generator) -> np.ndarray:
    base = np.array([0.62, 0.58, 0.52]) * rng.uniform(0.8, 1.1)
    ramp = np.linspace(1.05, 0.9, size)[:, None, None]
    img = np.broadcast_to(base, (size, size, 3)) * ramp
    edge = int(size * rng.uniform(0.86, 0.92))
    img = img.copy()
    img[edge:] *= 0.55
    return img


def render_object(cls: SyntheticClass, size: int, rng: np.random.Generator) -> np.ndarray:
    """One ``(size, size, 3)`` float image of ``cls`` with pose/color jitter."""
    big = size * _SUPERSAMPLE
    canvas = Image.new("RGBA", (big, big), (0, 0, 0, 0))
    draw = ImageDraw.Draw(canvas)
    color = np.clip(np.asarray(cls.color) + rng.uniform(-0.04, 0.04, 3), 0, 1) * rng.uniform(0.92, 1.05)
    fill = tuple(int(round(255 * c)) for c in np.clip(color, 0, 1)) + (255,)
    extent = rng.uniform(0.55, 0.75) * big
    cx = big / 2 + rng.uniform(-0.08, 0.08) * big
    cy = big / 2 + rng.uniform(-0.08, 0.08) * big
    x0, y0, x1, y1 = cx - extent / 2, cy - extent / 2, cx + extent / 2, cy + extent / 2
    if cls.shape == "circle":
        draw.ellipse((x0, y0, x1, y1), fill=fill)
    elif cls.shape == "square":
        draw.rectangle((x0, y0, x1, y1), fill=fill)
    elif cls.shape == "triangle":
        draw.polygon([(cx, y0), (x1, y1), (x0, y1)], fill=fill)
    elif cls.shape == "stripes":
        dark = tuple(int(v * 0.45) for v in fill[:3]) + (255,)
        bands = 6
        h = (y1 - y0) / bands
        for k in range(bands):
            draw.rectangle((x0 + extent * 0.15, y0 + k * h, x1 - extent * 0.15, y0 + (k + 1) * h), fill=fill if k % 2 == 0 else dark)
    else:
        raise ValueError(f"unknown shape {cls.shape!r}")
    layer = np.asarray(canvas.resize((size, size), Image.BOX), dtype=np.float64) / 255.0
    alpha = layer[..., 3:]
    img = _background(size, rng) * (1 - alpha) + layer[..., :3] * alpha
    img += rng.normal(0, 0.01, img.shape)
    return np.clip(img, 0, 1).astype(np.float32)


def to_chw(img: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(img.transpose(2, 0, 1))


def generate(per_class: int, size: int, seed: int = 0, classes=CLASSES):
    """Return ``(images (K, 3, size, size), labels)`` in class-major order."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for cls in classes:
        for _ in range(per_class):
            images.append(to_chw(render_object(cls, size, rng)))
            labels.append(cls.label)
    return np.stack(images), labels


def write_dataset(root: str | Path, per_class: int, size: int = 64, seed: int = 0) -> Path:
    """Write PNGs plus a JSON-lines manifest; returns the manifest path."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    images, labels = generate(per_class, size, seed)
    manifest = root / "manifest.jsonl"
    counts: dict[str, int] = {}
    with open(manifest, "w") as fh:
        for img, label in zip(images, labels):
            k = counts.get(label, 0)
            counts[label] = k + 1
            oid = f"{label}-{k:04d}"
            rel = Path("images") / f"{oid}.png"
            Image.fromarray((img.transpose(1, 2, 0) * 255).round().astype(np.uint8)).save(root / rel)
            fh.write(json.dumps({"id": oid, "path": str(rel), "label": label}) + "\n")
    return manifest


def render_shelf_row(labels, cell: int, rng: np.random.Generator, gap: int = 4):
    """A single shelf row image with one object per label, left to right.

    Returns ``(image (H, W, 3) float, boxes [[x, y, w, h], ...])``.
    """
    tiles = [render_object(CLASS_BY_LABEL[label], cell, rng) for label in labels]
    width = len(tiles) * (cell + gap) + gap
    height = cell + 2 * gap
    shelf = np.full((height, width, 3), 0.35, dtype=np.float32)
    boxes = []
    for k, tile in enumerate(tiles):
        x = gap + k * (cell + gap)
        shelf[gap : gap + cell, x : x + cell] = tile
        boxes.append([x, gap, cell, cell])
    return shelf, boxes
