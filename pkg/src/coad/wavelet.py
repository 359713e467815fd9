"""Single-level 2-D Haar transform, orthonormal convention.

Works on numpy arrays and torch tensors alike (the transform is applied to the
last two axes), so the same code serves the reconstruction head of the network
and the reference tests.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import torch

from coad.errors import ShapeError


class WaveletComponents(NamedTuple):
    LL: np.ndarray | torch.Tensor
    HL: np.ndarray | torch.Tensor
    LH: np.ndarray | torch.Tensor
    HH: np.ndarray | torch.Tensor


def dwt2_haar(channel):
    """Level-1 Haar decomposition of ``channel`` over its last two axes.

    For every 2x2 block ``[[a, b], [c, d]]``::

        LL = (a + b + c + d) / 2      HL = (a - b + c - d) / 2
        LH = (a + b - c - d) / 2      HH = (a - b - c + d) / 2
    """
    if channel.ndim < 2:
        raise ShapeError(f"expected at least 2 dims, got shape {tuple(channel.shape)}")
    h, w = channel.shape[-2:]
    if h == 0 or w == 0 or h % 2 or w % 2:
        raise ShapeError(f"Haar DWT needs even, positive height and width; got {h}x{w}")
    a = channel[..., 0::2, 0::2]
    b = channel[..., 0::2, 1::2]
    c = channel[..., 1::2, 0::2]
    d = channel[..., 1::2, 1::2]
    return WaveletComponents(
        LL=(a + b + c + d) / 2,
        HL=(a - b + c - d) / 2,
        LH=(a + b - c - d) / 2,
        HH=(a - b - c + d) / 2,
    )


def idwt2_haar(components) -> np.ndarray | torch.Tensor:
    """Exact inverse of :func:`dwt2_haar`; output has twice the subband height and width."""
    ll, hl, lh, hh = components
    shape = tuple(ll.shape)
    if any(tuple(x.shape) != shape for x in (hl, lh, hh)):
        raise ShapeError(
            "subbands must share one shape, got "
            + ", ".join(str(tuple(x.shape)) for x in (ll, hl, lh, hh))
        )
    if len(shape) < 2:
        raise ShapeError(f"subbands need at least 2 dims, got {shape}")

    a = (ll + hl + lh + hh) / 2
    b = (ll - hl + lh - hh) / 2
    c = (ll + hl - lh - hh) / 2
    d = (ll - hl - lh + hh) / 2

    h, w = shape[-2:]
    lead = shape[:-2]
    if isinstance(ll, torch.Tensor):
        top = torch.stack((a, b), dim=-1).reshape(*lead, h, 2 * w)
        bottom = torch.stack((c, d), dim=-1).reshape(*lead, h, 2 * w)
        return torch.stack((top, bottom), dim=-2).reshape(*lead, 2 * h, 2 * w)
    top = np.stack((a, b), axis=-1).reshape(*lead, h, 2 * w)
    bottom = np.stack((c, d), axis=-1).reshape(*lead, h, 2 * w)
    return np.stack((top, bottom), axis=-2).reshape(*lead, 2 * h, 2 * w)
