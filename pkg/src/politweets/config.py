"""TOML configuration surface: one file, flat tables, CLI flags override."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .embeddings import EmbeddingMode, EmbeddingTrainConfig
from .io_utils import ToolError
from .models import ModelParams, init_cnn, init_fasttext, init_lstm
from .training import TrainConfig


@dataclass
class ModelSettings:
    kind: str = "cnn"
    max_len: int = 30
    cnn_widths: tuple[int, ...] = (3, 4, 5)
    cnn_filters: int = 100
    cnn_dropout: float = 0.5
    lstm_hidden: int = 128
    fasttext_bigram_buckets: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("cnn", "lstm", "fasttext"):
            raise ToolError(f"unknown model kind '{self.kind}'")
        self.cnn_widths = tuple(int(w) for w in self.cnn_widths)

    @property
    def min_len(self) -> int:
        # encode() pads at least to the widest convolution filter
        return max(self.cnn_widths) if self.kind == "cnn" else 1

    def build(self, rng: np.random.Generator, dim: int, dtype=np.float32) -> ModelParams:
        if self.kind == "cnn":
            return init_cnn(
                rng, dim, self.cnn_widths, self.cnn_filters, self.cnn_dropout, dtype
            )
        if self.kind == "lstm":
            return init_lstm(rng, dim, self.lstm_hidden, dtype)
        return init_fasttext(rng, dim, self.fasttext_bigram_buckets, dtype)


def load_toml(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ToolError(f"{path}: bad TOML ({exc})")


def _filtered(cls, table: dict, context: str):
    valid = {f.name for f in fields(cls)}
    unknown = set(table) - valid
    if unknown:
        raise ToolError(f"unknown {context} option(s): {', '.join(sorted(unknown))}")
    return cls(**table)


def train_config_from(table: dict, overrides: dict | None = None) -> TrainConfig:
    merged = {**table, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    return _filtered(TrainConfig, merged, "[training]")


def model_settings_from(table: dict, overrides: dict | None = None) -> ModelSettings:
    merged = {**table, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    return _filtered(ModelSettings, merged, "[model]")


def embedding_config_from(table: dict, overrides: dict | None = None) -> EmbeddingTrainConfig:
    merged = {**table, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    if "mode" in merged and isinstance(merged["mode"], str):
        merged["mode"] = EmbeddingMode(merged["mode"])
    return _filtered(EmbeddingTrainConfig, merged, "[embedding]")
