"""Word vectors three ways: word2vec-format loader, GloVe-format loader, and
in-repo C-BoW / Skip-Gram training with negative sampling.

Vocabulary indices 0 and 1 are reserved for PAD and UNK.  Pretrained loads
give UNK the mean of the loaded vectors unless the file carries an explicit
"<unk>" row; the PAD row is always zero.  File tokens are NFC-normalised and
lowercased, matching the corpus normaliser.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .io_utils import ToolError
from .numerics import sigmoid

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1


class Vocabulary:
    """Bijective token <-> index map with PAD=0 and UNK=1 always present."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._tokens: list[str] = [PAD_TOKEN, UNK_TOKEN]
        self._index: dict[str, int] = {PAD_TOKEN: PAD_INDEX, UNK_TOKEN: UNK_INDEX}
        for token in tokens:
            self.add(token)

    def add(self, token: str) -> int:
        idx = self._index.get(token)
        if idx is None:
            idx = len(self._tokens)
            self._index[token] = idx
            self._tokens.append(token)
        return idx

    def index(self, token: str) -> int:
        return self._index.get(token, UNK_INDEX)

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __len__(self) -> int:
        return len(self._tokens)

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def sha256(self) -> str:
        digest = hashlib.sha256()
        for token in self._tokens:
            digest.update(token.encode("utf-8"))
            digest.update(b"\n")
        return digest.hexdigest()


class EmbeddingMode(Enum):
    CBOW = "cbow"
    SKIPGRAM = "skipgram"


@dataclass
class EmbeddingTrainConfig:
    mode: EmbeddingMode = EmbeddingMode.CBOW
    dim: int = 300
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_count: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1 or self.window < 1 or self.negatives < 1 or self.epochs < 1:
            raise ToolError("embedding config fields must be positive")
        if self.learning_rate <= 0:
            raise ToolError("learning rate must be positive")
        if self.min_count < 1:
            raise ToolError("min count must be >= 1")


def _norm_token(token: str) -> str:
    return unicodedata.normalize("NFC", token).lower()


def _load_text_vectors(
    path: str | Path,
    restrict_to: set[str] | None,
    expect_header: bool,
) -> tuple[Vocabulary, np.ndarray]:
    vocab = Vocabulary()
    rows: list[np.ndarray] = []
    special_rows: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        lineno = 0
        if expect_header:
            lineno += 1
            header = fh.readline()
            parts = header.split()
            if len(parts) != 2:
                raise ToolError(f"{path}:1: expected header 'vocab_size dim'")
            try:
                dim = int(parts[1])
            except ValueError:
                raise ToolError(f"{path}:1: bad dimension '{parts[1]}'") from None
            if dim < 1:
                raise ToolError(f"{path}:1: dimension must be positive")
        for line in fh:
            lineno += 1
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            token = parts[0]
            values = parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise ToolError(f"{path}:{lineno}: cannot infer dimension from empty row")
            if len(values) != dim:
                raise ToolError(
                    f"{path}:{lineno}: expected {dim} values, found {len(values)}"
                )
            try:
                vector = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise ToolError(f"{path}:{lineno}: non-numeric vector component") from None
            token = _norm_token(token)
            if token in (PAD_TOKEN, UNK_TOKEN):
                special_rows[token] = vector
                continue
            if restrict_to is not None and token not in restrict_to:
                continue
            if token in vocab:
                continue  # first occurrence wins after case folding
            vocab.add(token)
            rows.append(vector)
    if dim is None:
        raise ToolError(f"{path}: cannot infer dimension from an empty file")

    matrix = np.zeros((len(vocab), dim), dtype=np.float64)
    if rows:
        matrix[2:] = np.stack(rows)
    if UNK_TOKEN in special_rows:
        matrix[UNK_INDEX] = special_rows[UNK_TOKEN]
    elif rows:
        matrix[UNK_INDEX] = np.stack(rows).mean(axis=0)
    if PAD_TOKEN in special_rows:
        matrix[PAD_INDEX] = special_rows[PAD_TOKEN]
    if not np.isfinite(matrix).all():
        raise ToolError(f"{path}: non-finite vector components")
    return vocab, matrix


def load_word2vec_text(
    path: str | Path, restrict_to: set[str] | None = None
) -> tuple[Vocabulary, np.ndarray]:
    """Load word2vec text format (leading 'vocab_size dim' header line)."""
    return _load_text_vectors(path, restrict_to, expect_header=True)


def load_glove_text(
    path: str | Path, restrict_to: set[str] | None = None
) -> tuple[Vocabulary, np.ndarray]:
    """Load GloVe text format (no header; dimension inferred from the first row)."""
    return _load_text_vectors(path, restrict_to, expect_header=False)


def save_word2vec_text(path: str | Path, vocab: Vocabulary, matrix: np.ndarray) -> None:
    """Emit vectors in word2vec text format, including the <pad>/<unk> rows."""
    if matrix.shape[0] != len(vocab):
        raise ToolError("matrix row count does not match vocabulary size")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vocab)} {matrix.shape[1]}\n")
        for idx, token in enumerate(vocab.tokens):
            values = " ".join(f"{v:.6f}" for v in matrix[idx])
            fh.write(f"{token} {values}\n")


def encode(
    tokens: Sequence[str], vocab: Vocabulary, max_len: int, min_len: int = 1
) -> np.ndarray:
    """Map tokens to indices with UNK fallback, truncate at max_len, then
    right-pad with PAD up to max(max_len, min_len)."""
    if max_len < 1:
        raise ToolError("max_len must be >= 1")
    length = max(max_len, min_len)
    out = np.full(length, PAD_INDEX, dtype=np.int64)
    for pos, token in enumerate(tokens[:max_len]):
        out[pos] = vocab.index(token)
    return out


def decode(indices: Iterable[int], vocab: Vocabulary) -> list[str]:
    return [vocab.token(int(i)) for i in indices if int(i) != PAD_INDEX]


def vocabulary_from_documents(documents: Sequence[Sequence[str]]) -> Vocabulary:
    """Corpus vocabulary ordered by descending count (lexicographic ties)."""
    counts: dict[str, int] = {}
    for doc in documents:
        for token in doc:
            counts[token] = counts.get(token, 0) + 1
    return Vocabulary(sorted(counts, key=lambda t: (-counts[t], t)))


def random_embeddings(
    vocab: Vocabulary, dim: int, seed: int = 0, scale: float = 0.1
) -> np.ndarray:
    """Seeded uniform(-scale, scale) matrix with a zero PAD row.

    Serves as the untrained baseline and as the starting point for the
    fine-tuned (non-static) embedding channel.
    """
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-scale, scale, (len(vocab), dim))
    matrix[PAD_INDEX] = 0.0
    return matrix


def train_embeddings(
    documents: Sequence[Sequence[str]],
    config: EmbeddingTrainConfig,
    loss_history: list[float] | None = None,
) -> tuple[Vocabulary, np.ndarray]:
    """Train input-side word vectors with negative sampling.

    C-BoW predicts the centre word from the averaged context window;
    Skip-Gram predicts each context word from the centre.  Tokens below
    min_count are replaced by UNK in the stream, so UNK receives a trained
    vector.  Deterministic under config.seed (single-threaded, fixed window).
    If loss_history is given, the per-epoch mean negative-sampling loss is
    appended to it.
    """
    counts: dict[str, int] = {}
    for doc in documents:
        for token in doc:
            counts[token] = counts.get(token, 0) + 1
    kept = sorted(
        (t for t, c in counts.items() if c >= config.min_count),
        key=lambda t: (-counts[t], t),
    )
    if not kept:
        raise ToolError("no token meets min_count; effective vocabulary is empty")
    vocab = Vocabulary(kept)

    unk_count = sum(c for t, c in counts.items() if c < config.min_count)
    freq = np.zeros(len(vocab), dtype=np.float64)
    freq[UNK_INDEX] = unk_count
    for token in kept:
        freq[vocab.index(token)] = counts[token]

    # unigram^0.75 noise distribution over trainable ids (PAD excluded)
    noise = freq**0.75
    noise[PAD_INDEX] = 0.0
    if noise.sum() == 0:
        noise[UNK_INDEX] = 1.0
    noise_cdf = np.cumsum(noise / noise.sum())

    rng = np.random.default_rng(config.seed)
    dim = config.dim
    w_in = (rng.random((len(vocab), dim)) - 0.5) / dim
    w_in[PAD_INDEX] = 0.0
    w_out = np.zeros((len(vocab), dim), dtype=np.float64)

    encoded_docs = [
        np.array([vocab.index(t) for t in doc], dtype=np.int64)
        for doc in documents
        if len(doc) > 0
    ]
    total_centers = sum(len(d) for d in encoded_docs) * config.epochs
    if total_centers == 0:
        raise ToolError("no training positions in the corpus")

    lr0 = config.learning_rate
    min_lr = lr0 * 1e-4
    processed = 0
    neg = config.negatives

    for _ in range(config.epochs):
        epoch_loss = 0.0
        epoch_terms = 0
        for doc in encoded_docs:
            n = len(doc)
            for pos in range(n):
                lr = max(min_lr, lr0 * (1.0 - processed / total_centers))
                processed += 1
                lo = max(0, pos - config.window)
                hi = min(n, pos + config.window + 1)
                context = np.concatenate([doc[lo:pos], doc[pos + 1 : hi]])
                if len(context) == 0:
                    continue
                center = doc[pos]
                negatives = np.searchsorted(noise_cdf, rng.random(neg))
                if config.mode is EmbeddingMode.CBOW:
                    v = w_in[context].mean(axis=0)
                    targets = np.concatenate(([center], negatives))
                    labels = np.zeros(len(targets))
                    labels[0] = 1.0
                    scores = sigmoid(w_out[targets] @ v)
                    epoch_loss -= float(
                        np.log(np.clip(np.where(labels == 1.0, scores, 1.0 - scores), 1e-10, None)).sum()
                    )
                    epoch_terms += 1
                    g = (scores - labels) * lr  # (1+neg,)
                    dv = g @ w_out[targets]
                    w_out[targets] -= np.outer(g, v)
                    np.add.at(w_in, context, -dv / len(context))
                else:
                    v = w_in[center]
                    for ctx in context:
                        targets = np.concatenate(([ctx], negatives))
                        labels = np.zeros(len(targets))
                        labels[0] = 1.0
                        scores = sigmoid(w_out[targets] @ v)
                        epoch_loss -= float(
                            np.log(
                                np.clip(np.where(labels == 1.0, scores, 1.0 - scores), 1e-10, None)
                            ).sum()
                        )
                        epoch_terms += 1
                        g = (scores - labels) * lr
                        dv = g @ w_out[targets]
                        w_out[targets] -= np.outer(g, v)
                        v = v - dv
                    w_in[center] = v
                w_in[PAD_INDEX] = 0.0
        if loss_history is not None:
            loss_history.append(epoch_loss / max(1, epoch_terms))

    w_in[PAD_INDEX] = 0.0
    return vocab, w_in
