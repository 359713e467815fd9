"""Concept-mining vision transformer auto-encoders.

Three variants share the same patch projection:

* ``vit-cm-dwt``: four content encoder layers (one per Haar subband) and three
  color encoder layers (one per RGB channel). A shared bank of four linear
  heads rebuilds subbands, which the inverse Haar transform turns into images.
* ``vit-cm``: a single content encoder layer and one pixel head.
* ``vit-ae``: the undisentangled control, one encoder stack over the full
  token width and one RGB head.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from coad.config import Config
from coad.errors import ConfigurationError, ContractError, ShapeError
from coad.wavelet import idwt2_haar

COLOR_NAMES = ("R", "G", "B")
SUBBAND_NAMES = ("LL", "HL", "LH", "HH")
CONTENT_NAMES = {"vit-cm-dwt": SUBBAND_NAMES, "vit-cm": ("content",)}

# ITU-R BT.601 luma
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass
class ConceptEmbedding:
    """Per-patch concept blocks, each ``(N, M)`` or ``(B, N, M)``."""

    color: dict[str, torch.Tensor]
    content: dict[str, torch.Tensor]

    @property
    def num_concepts(self) -> int:
        return len(self.color) + len(self.content)

    def blocks(self) -> dict[str, torch.Tensor]:
        return {**self.color, **self.content}


def to_gray(images: torch.Tensor) -> torch.Tensor:
    """``(B, 3, H, W)`` RGB to ``(B, 1, H, W)`` luma."""
    w = images.new_tensor(GRAY_WEIGHTS).view(1, 3, 1, 1)
    return (images * w).sum(dim=1, keepdim=True)


def modulate(content, color_block: torch.Tensor) -> list[torch.Tensor]:
    """Hadamard product of every content block with one color block."""
    out = []
    for block in content:
        if block.shape != color_block.shape:
            raise ShapeError(f"content block {tuple(block.shape)} vs color block {tuple(color_block.shape)}")
        out.append(block * color_block)
    return out


def _unpatchify(tokens: torch.Tensor, grid: int, side: int, channels: int = 1) -> torch.Tensor:
    # (B, grid*grid, channels*side*side) -> (B, channels, grid*side, grid*side)
    b = tokens.shape[0]
    x = tokens.reshape(b, grid, grid, channels, side, side)
    x = x.permute(0, 3, 1, 4, 2, 5)
    return x.reshape(b, channels, grid * side, grid * side)


def _encoder_layer(width: int, cfg: Config) -> nn.TransformerEncoderLayer:
    return nn.TransformerEncoderLayer(
        d_model=width,
        nhead=cfg.heads,
        dim_feedforward=cfg.ff_width,
        dropout=cfg.dropout,
        activation="gelu",
        batch_first=True,
        norm_first=True,
    )


class _PatchEmbed(nn.Module):
    def __init__(self, cfg: Config):
        super().__init__()
        self.patch_size = cfg.patch_size
        self.input_size = cfg.input_size
        self.proj = nn.Conv2d(3, cfg.token_width, kernel_size=cfg.patch_size, stride=cfg.patch_size)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ShapeError(f"expected (B, 3, H, W) images, got {tuple(images.shape)}")
        h, w = images.shape[-2:]
        if h % self.patch_size or w % self.patch_size:
            raise ShapeError(f"image {h}x{w} not divisible by patch size {self.patch_size}")
        if (h, w) != (self.input_size, self.input_size):
            raise ShapeError(f"model expects {self.input_size}x{self.input_size} input, got {h}x{w}")
        return self.proj(images).flatten(2).transpose(1, 2)


class ConceptAutoEncoder(nn.Module):
    """Disentangled color/content auto-encoder (``vit-cm-dwt`` or ``vit-cm``)."""

    def __init__(self, cfg: Config):
        super().__init__()
        if cfg.variant not in CONTENT_NAMES:
            raise ConfigurationError(f"ConceptAutoEncoder does not build variant {cfg.variant!r}")
        self.cfg = cfg
        self.variant = cfg.variant
        self.content_names = CONTENT_NAMES[cfg.variant]
        m = cfg.concept_dim
        p = cfg.patch_size
        self.grid = cfg.input_size // p

        self.patch_embed = _PatchEmbed(cfg)
        self.pos_embed = nn.Parameter(torch.zeros(1, cfg.num_patches, m))
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        self.content_encoders = nn.ModuleList(_encoder_layer(m, cfg) for _ in self.content_names)
        self.color_encoders = nn.ModuleList(_encoder_layer(m, cfg) for _ in COLOR_NAMES)
        if self.variant == "vit-cm-dwt":
            self.head_side = p // 2
        else:
            self.head_side = p
        self.decoders = nn.ModuleList(nn.Linear(m, self.head_side**2) for _ in self.content_names)

    def patchify(self, images: torch.Tensor) -> torch.Tensor:
        """``(B, 3, H, W)`` -> ``(B, N, 2M)`` patch tokens."""
        return self.patch_embed(images)

    def split(self, tokens: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Return the (color, content) halves of the token width."""
        m = self.cfg.concept_dim
        return tokens[..., :m], tokens[..., m:]

    def encode_content(self, tokens: torch.Tensor) -> list[torch.Tensor]:
        _, content = self.split(tokens)
        content = content + self.pos_embed
        return [layer(content) for layer in self.content_encoders]

    def encode_color(self, tokens: torch.Tensor) -> list[torch.Tensor]:
        color, _ = self.split(tokens)
        return [layer(color) for layer in self.color_encoders]

    def encode(self, images: torch.Tensor) -> ConceptEmbedding:
        single = images.ndim == 3
        if single:
            images = images.unsqueeze(0)
        tokens = self.patchify(images)
        color = self.encode_color(tokens)
        content = self.encode_content(tokens)
        if single:
            color = [c[0] for c in color]
            content = [c[0] for c in content]
        return ConceptEmbedding(
            color=dict(zip(COLOR_NAMES, color)),
            content=dict(zip(self.content_names, content)),
        )

    def _decode_channel(self, blocks) -> torch.Tensor:
        if len(blocks) != len(self.decoders):
            raise ShapeError(f"expected {len(self.decoders)} content blocks, got {len(blocks)}")
        planes = [_unpatchify(dec(block), self.grid, self.head_side) for dec, block in zip(self.decoders, blocks)]
        if self.variant == "vit-cm-dwt":
            return idwt2_haar(planes)
        return planes[0]

    def decode_gray(self, content) -> torch.Tensor:
        """Unmodulated content blocks -> ``(B, 1, H, W)`` grayscale image."""
        return self._decode_channel(list(content))

    def decode_rgb(self, content, color) -> torch.Tensor:
        """Content modulated by each of the three color blocks -> ``(B, 3, H, W)``."""
        content = list(content)
        color = list(color)
        if len(color) != 3:
            raise ContractError("rgb decoding needs the three color blocks for modulation")
        return torch.cat([self._decode_channel(modulate(content, c)) for c in color], dim=1)

    def decode(self, embedding: ConceptEmbedding, mode: str = "rgb") -> torch.Tensor:
        content = list(embedding.content.values())
        single = content[0].ndim == 2
        if single:
            embedding = ConceptEmbedding(
                color={k: v.unsqueeze(0) for k, v in embedding.color.items()},
                content={k: v.unsqueeze(0) for k, v in embedding.content.items()},
            )
            content = list(embedding.content.values())
        if mode == "gray":
            out = self.decode_gray(content)
        elif mode == "rgb":
            if not embedding.color:
                raise ContractError("mode='rgb' needs color blocks to modulate the content")
            out = self.decode_rgb(content, [embedding.color[k] for k in COLOR_NAMES])
        else:
            raise ContractError(f"unknown decode mode {mode!r}")
        return out[0] if single else out

    def reconstruct(self, images: torch.Tensor, mode: str = "rgb") -> torch.Tensor:
        return self.decode(self.encode(images), mode=mode)


class ViTAutoEncoder(nn.Module):
    """Plain ViT auto-encoder over the full token width (no concept split)."""

    def __init__(self, cfg: Config):
        super().__init__()
        if cfg.variant != "vit-ae":
            raise ConfigurationError(f"ViTAutoEncoder does not build variant {cfg.variant!r}")
        self.cfg = cfg
        self.variant = cfg.variant
        self.grid = cfg.input_size // cfg.patch_size
        self.patch_embed = _PatchEmbed(cfg)
        self.pos_embed = nn.Parameter(torch.zeros(1, cfg.num_patches, cfg.token_width))
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        self.encoder = nn.TransformerEncoder(
            _encoder_layer(cfg.token_width, cfg), num_layers=cfg.ae_layers, enable_nested_tensor=False
        )
        self.decoder = nn.Linear(cfg.token_width, 3 * cfg.patch_size**2)

    def patchify(self, images: torch.Tensor) -> torch.Tensor:
        return self.patch_embed(images)

    def encode(self, images):
        raise ConfigurationError("vit-ae has no concept embedding; use encode_latent")

    def encode_latent(self, images: torch.Tensor) -> torch.Tensor:
        single = images.ndim == 3
        if single:
            images = images.unsqueeze(0)
        latent = self.encoder(self.patchify(images) + self.pos_embed)
        return latent[0] if single else latent

    def decode_latent(self, latent: torch.Tensor) -> torch.Tensor:
        single = latent.ndim == 2
        if single:
            latent = latent.unsqueeze(0)
        out = _unpatchify(self.decoder(latent), self.grid, self.cfg.patch_size, channels=3)
        return out[0] if single else out

    def reconstruct(self, images: torch.Tensor, mode: str = "rgb") -> torch.Tensor:
        if mode != "rgb":
            raise ContractError("vit-ae only reconstructs RGB")
        return self.decode_latent(self.encode_latent(images))


def build_model(cfg: Config) -> nn.Module:
    if cfg.variant == "vit-ae":
        return ViTAutoEncoder(cfg)
    return ConceptAutoEncoder(cfg)
