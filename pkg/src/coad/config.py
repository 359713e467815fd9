"""Flat run configuration shared by training, embedding and evaluation."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from coad.errors import ConfigurationError

VARIANTS = ("vit-cm-dwt", "vit-cm", "vit-ae")

# short names accepted in config files
_ALIASES = {"M": "concept_dim"}


@dataclass(frozen=True)
class Config:
    variant: str = "vit-cm-dwt"
    input_size: int = 224
    patch_size: int = 16
    concept_dim: int = 64
    heads: int = 4
    ff_width: int = 2048
    ae_layers: int = 4
    dropout: float = 0.0
    epochs: int = 100
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    batch_size: int = 16
    seed: int = 0
    checkpoint_every: int = 0
    device: str = "cpu"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.patch_size <= 0 or self.patch_size % 2:
            raise ConfigurationError("patch_size must be a positive even number")
        if self.input_size % self.patch_size:
            raise ConfigurationError(
                f"input_size {self.input_size} is not divisible by patch_size {self.patch_size}"
            )
        if (2 * self.concept_dim) % self.heads and self.variant == "vit-ae":
            raise ConfigurationError("token width must be divisible by heads")
        if self.concept_dim % self.heads and self.variant != "vit-ae":
            raise ConfigurationError("concept_dim must be divisible by heads")
        for name in ("epochs", "batch_size", "concept_dim", "heads", "ff_width", "ae_layers"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.lr <= 0:
            raise ConfigurationError("lr must be positive")

    @property
    def num_patches(self) -> int:
        return (self.input_size // self.patch_size) ** 2

    @property
    def token_width(self) -> int:
        return 2 * self.concept_dim

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def replace(self, **changes) -> "Config":
        return Config.from_mapping({**self.to_dict(), **changes})

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "Config":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in values.items():
            name = _ALIASES.get(key, key)
            if name not in types:
                raise ConfigurationError(f"unknown config key {key!r}")
            kwargs[name] = _coerce(types[name], value, key)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "Config":
        """Read a flat JSON object or ``key = value`` lines (``#`` starts a comment)."""
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            data = json.loads(text)
            if not isinstance(data, dict) or any(isinstance(v, (dict, list)) for v in data.values()):
                raise ConfigurationError(f"{path}: expected a flat JSON object")
            return cls.from_mapping(data)
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            data[key] = value.strip("\"'")
        return cls.from_mapping(data)


def _coerce(type_name, value, key):
    kind = {"int": int, "float": float, "str": str}[type_name if isinstance(type_name, str) else type_name.__name__]
    try:
        if kind is int and isinstance(value, str):
            return int(float(value)) if "e" in value.lower() else int(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"config key {key!r}: cannot read {value!r} as {kind.__name__}") from None
