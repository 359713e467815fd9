"""Features from a pretrained image classifier (the labelled-data baseline)."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torchvision

from coad.embed import ObjectFeature, l2_normalize
from coad.errors import ConfigurationError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class PretrainedBackbone:
    """A torchvision classifier with its final layer removed.

    Weights are read from a local state-dict file; nothing is downloaded.
    """

    def __init__(self, weights: str | Path, arch: str = "resnet50", input_size: int = 224):
        weights = Path(weights) if weights is not None else None
        if weights is None or not weights.is_file():
            raise ConfigurationError(f"pretrained backbone weights not found: {weights}")
        try:
            builder = getattr(torchvision.models, arch)
        except AttributeError:
            raise ConfigurationError(f"unknown torchvision architecture {arch!r}") from None
        net = builder(weights=None)
        state = torch.load(weights, map_location="cpu", weights_only=True)
        try:
            net.load_state_dict(state)
        except RuntimeError as exc:
            raise ConfigurationError(f"{weights} does not match {arch}: {exc}") from None
        if not hasattr(net, "fc"):
            raise ConfigurationError(f"{arch} has no 'fc' classifier head to strip")
        self.width = net.fc.in_features
        net.fc = torch.nn.Identity()
        self.net = net.eval()
        self.arch = arch
        self.input_size = input_size
        self._mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
        self._std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)

    @torch.no_grad()
    def __call__(self, crops, batch_size: int = 32) -> np.ndarray:
        images = torch.as_tensor(np.stack([np.asarray(c, dtype=np.float32) for c in crops]))
        out = []
        for start in range(0, len(images), batch_size):
            part = (images[start : start + batch_size] - self._mean) / self._std
            out.append(self.net(part).double().numpy())
        return l2_normalize(np.concatenate(out))


def baseline_pretrained_features(crops, backbone: PretrainedBackbone | str | Path, arch: str = "resnet50") -> list[ObjectFeature]:
    """Penultimate-layer (globally average-pooled) activations, L2-normalised."""
    if not isinstance(backbone, PretrainedBackbone):
        backbone = PretrainedBackbone(backbone, arch)
    return [ObjectFeature(v) for v in backbone(crops)]
