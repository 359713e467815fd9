"""Alternating two-phase training and checkpoint I/O."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from coad.config import Config
from coad.errors import ConfigurationError
from coad.model.network import ConceptAutoEncoder, ViTAutoEncoder, build_model, to_gray

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "coad-checkpoint"
CHECKPOINT_VERSION = 1


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class Checkpoint:
    model: nn.Module
    config: Config
    step: int = 0
    epoch: int = 0
    # (step, phase, loss) per optimisation step
    history: list[tuple[int, str, float]] = field(default_factory=list)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "variant": self.config.variant,
            "config": json.dumps(self.config.to_dict(), sort_keys=True),
            "step": self.step,
            "epoch": self.epoch,
            "history": json.dumps([list(h) for h in self.history]),
            "state_dict": {k: v.detach().cpu().clone() for k, v in self.model.state_dict().items()},
        }
        # via a buffer so the archive's internal name does not depend on the file name
        buf = io.BytesIO()
        torch.save(payload, buf)
        path.write_bytes(buf.getvalue())
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        payload = torch.load(path, map_location="cpu", weights_only=True)
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ConfigurationError(f"{path} is not a checkpoint written by this package")
        if payload["version"] > CHECKPOINT_VERSION:
            raise ConfigurationError(f"{path}: checkpoint version {payload['version']} is newer than supported")
        config = Config.from_mapping(json.loads(payload["config"]))
        model = build_model(config)
        model.load_state_dict(payload["state_dict"])
        model.eval()
        history = [(int(s), str(p), float(v)) for s, p, v in json.loads(payload["history"])]
        return cls(model=model, config=config, step=payload["step"], epoch=payload["epoch"], history=history)


def checkpoint_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def make_optimizer(model: nn.Module, cfg: Config) -> torch.optim.Optimizer:
    return torch.optim.Adam(
        model.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), weight_decay=cfg.weight_decay
    )


def _check_finite(loss: torch.Tensor, phase: str, batch: torch.Tensor) -> None:
    if not torch.isfinite(loss):
        raise TrainingDiverged(
            f"{phase} loss is {loss.item()}; batch shape {tuple(batch.shape)}, "
            f"input range [{batch.min().item():.4g}, {batch.max().item():.4g}], "
            f"non-finite inputs: {int((~torch.isfinite(batch)).sum())}"
        )


def modulated_loss(model: ConceptAutoEncoder, batch: torch.Tensor) -> torch.Tensor:
    """RGB reconstruction loss with content blocks cut out of the graph."""
    tokens = model.patchify(batch)
    content = [c.detach() for c in model.encode_content(tokens)]
    color = model.encode_color(tokens)
    return F.mse_loss(model.decode_rgb(content, color), batch)


def content_loss(model: ConceptAutoEncoder, batch: torch.Tensor) -> torch.Tensor:
    """Grayscale reconstruction loss from unmodulated content; no color path."""
    tokens = model.patchify(batch)
    content = model.encode_content(tokens)
    return F.mse_loss(model.decode_gray(content), to_gray(batch))


def autoencoder_loss(model: ViTAutoEncoder, batch: torch.Tensor) -> torch.Tensor:
    return F.mse_loss(model.reconstruct(batch), batch)


def _step(model, optimizer, batch, loss_fn, phase) -> float:
    optimizer.zero_grad(set_to_none=True)
    loss = loss_fn(model, batch)
    _check_finite(loss, phase, batch)
    loss.backward()
    optimizer.step()
    return loss.item()


def train_step_modulated(model: ConceptAutoEncoder, optimizer, batch: torch.Tensor) -> float:
    return _step(model, optimizer, batch, modulated_loss, "modulated")


def train_step_content(model: ConceptAutoEncoder, optimizer, batch: torch.Tensor) -> float:
    return _step(model, optimizer, batch, content_loss, "content")


def train_step_autoencoder(model: ViTAutoEncoder, optimizer, batch: torch.Tensor) -> float:
    return _step(model, optimizer, batch, autoencoder_loss, "autoencoder")


def train(
    images: torch.Tensor,
    cfg: Config,
    checkpoint_dir: str | Path | None = None,
    progress=None,
) -> Checkpoint:
    """Train ``cfg.variant`` on ``images`` (``(K, 3, H, W)`` in [0, 1]).

    Concept variants alternate a modulated step and a content step on
    consecutive batches; ``vit-ae`` takes a single plain reconstruction step.
    ``progress`` is called as ``progress(epoch, mean_loss)`` after each epoch.
    """
    if len(images) == 0:
        raise ValueError("training set is empty")
    expected = (3, cfg.input_size, cfg.input_size)
    if tuple(images.shape[1:]) != expected:
        raise ValueError(f"training images must be {expected}, got {tuple(images.shape[1:])}")
    if not torch.isfinite(images).all():
        raise ValueError("training images contain non-finite values")

    torch.manual_seed(cfg.seed)
    device = torch.device(cfg.device)
    model = build_model(cfg).to(device)
    model.train()
    optimizer = make_optimizer(model, cfg)
    gen = torch.Generator().manual_seed(cfg.seed)
    ckpt = Checkpoint(model=model, config=cfg)

    if cfg.variant == "vit-ae":
        phases = [("autoencoder", train_step_autoencoder)]
    else:
        phases = [("modulated", train_step_modulated), ("content", train_step_content)]

    for epoch in range(1, cfg.epochs + 1):
        order = torch.randperm(len(images), generator=gen)
        losses = []
        for start in range(0, len(images), cfg.batch_size):
            batch = images[order[start : start + cfg.batch_size]].to(device)
            phase, step_fn = phases[ckpt.step % len(phases)]
            loss = step_fn(model, optimizer, batch)
            ckpt.step += 1
            ckpt.history.append((ckpt.step, phase, loss))
            losses.append(loss)
        ckpt.epoch = epoch
        mean_loss = sum(losses) / len(losses)
        log.info("epoch %d/%d loss %.6f", epoch, cfg.epochs, mean_loss)
        if progress is not None:
            progress(epoch, mean_loss)
        if checkpoint_dir is not None and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            ckpt.save(Path(checkpoint_dir) / f"epoch{epoch:04d}.pt")

    ckpt.model = model.cpu().eval()
    return ckpt


def write_loss_curve(history, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "phase", "loss"])
        for step, phase, loss in history:
            writer.writerow([step, phase, repr(float(loss))])
    return path
