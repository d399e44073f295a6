"""Configuration objects for the two classifier kinds."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..errors import ConfigError

RECURRENT_BASELINE = "recurrent_baseline"
TRANSFORMER_FINETUNE = "transformer_finetune"
MODEL_KINDS = (RECURRENT_BASELINE, TRANSFORMER_FINETUNE)


@dataclass
class ModelConfig:
    """Architecture plus initialization seed for one classifier.

    Recurrent fields are ignored for transformer configs and vice versa.
    """

    kind: str
    num_classes: int = 4
    seed: int = 0
    # recurrent baseline
    vocab_size: int = 20002  # embedding rows, including PAD and UNK
    embed_dim: int = 128
    conv_filters: int = 64
    conv_kernel: int = 5
    recurrent_units: int = 64
    attention_dim: int = 64
    dropout: float = 0.3
    # transformer fine-tune
    checkpoint_name: str | None = None
    max_positions: int = 512
    head_dropout: float = 0.1

    def validate(self) -> "ModelConfig":
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.kind == RECURRENT_BASELINE:
            dims = {
                "vocab_size": self.vocab_size,
                "embed_dim": self.embed_dim,
                "conv_filters": self.conv_filters,
                "conv_kernel": self.conv_kernel,
                "recurrent_units": self.recurrent_units,
                "attention_dim": self.attention_dim,
            }
            for name, value in dims.items():
                if value <= 0:
                    raise ConfigError(f"{name} must be positive, got {value}")
            if not 0 <= self.dropout < 1:
                raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        else:
            if self.checkpoint_name is None:
                raise ConfigError("transformer config needs checkpoint_name")
            if self.max_positions <= 0:
                raise ConfigError(
                    f"max_positions must be positive, got {self.max_positions}"
                )
            if not 0 <= self.head_dropout < 1:
                raise ConfigError(
                    f"head_dropout must be in [0, 1), got {self.head_dropout}"
                )
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


@dataclass
class EncoderConfig:
    """Shape of one pretrained transformer encoder."""

    vocab_size: int
    hidden_dim: int = 96
    num_layers: int = 2
    num_heads: int = 4
    ff_dim: int = 192
    max_positions: int = 192
    dropout: float = 0.1

    def validate(self) -> "EncoderConfig":
        for name in ("vocab_size", "hidden_dim", "num_layers", "num_heads",
                     "ff_dim", "max_positions"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.hidden_dim % self.num_heads != 0:
            raise ConfigError("hidden_dim must be divisible by num_heads")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderConfig":
        return cls(**data)


# The "distilled" preset is strictly smaller than "full" in every dimension.
ENCODER_PRESETS: dict[str, dict] = {
    "distilled": dict(hidden_dim=96, num_layers=2, num_heads=4, ff_dim=192),
    "full": dict(hidden_dim=144, num_layers=4, num_heads=6, ff_dim=288),
}
