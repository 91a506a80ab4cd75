"""The three classifier architectures: CNN, LSTM and a FastText-style model.

Every model maps an encoded token sequence to a political-probability in
(0, 1) through a single sigmoid output neuron.  Forward passes are pure
numpy; the matching analytic gradients live in the training module.

Checkpoint container format (version 1): a .npz file holding
  - ``meta``: one JSON string with {"format_version", "kind", "hyper",
    "vocab_hash"} where ``hyper`` carries the architecture hyperparameters
    (widths/filters/dropout for cnn, hidden for lstm, bigram_buckets for
    fasttext) and ``vocab_hash`` is the sha256 of the embedding vocabulary;
  - one array entry per trainable parameter, named as in ``param_arrays``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Label
from .embeddings import PAD_INDEX
from .io_utils import ToolError
from .numerics import sigmoid

CHECKPOINT_VERSION = 1

# deterministic multiplicative hash for bigram buckets
_BIGRAM_MIX = 1_000_003


@dataclass
class CnnParams:
    widths: tuple[int, ...]
    filters: int
    conv_w: list[np.ndarray]  # one (width, dim, filters) tensor per width
    conv_b: list[np.ndarray]  # one (filters,) vector per width
    dense_w: np.ndarray  # (len(widths) * filters,)
    dense_b: np.ndarray  # scalar array
    dropout: float = 0.5

    @property
    def kind(self) -> str:
        return "cnn"


@dataclass
class LstmParams:
    hidden: int
    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray  # (dim, hidden) each
    u_i: np.ndarray
    u_f: np.ndarray
    u_o: np.ndarray
    u_g: np.ndarray  # (hidden, hidden) each
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray  # (hidden,) each
    dense_w: np.ndarray  # (hidden,)
    dense_b: np.ndarray  # scalar array

    @property
    def kind(self) -> str:
        return "lstm"


@dataclass
class FastTextParams:
    w: np.ndarray  # (dim,)
    b: np.ndarray  # scalar array
    bucket_vectors: np.ndarray | None = None  # (bigram_buckets, dim) when enabled

    @property
    def kind(self) -> str:
        return "fasttext"

    @property
    def bigram_buckets(self) -> int:
        return 0 if self.bucket_vectors is None else self.bucket_vectors.shape[0]


ModelParams = CnnParams | LstmParams | FastTextParams


def init_cnn(
    rng: np.random.Generator,
    dim: int,
    widths: Sequence[int] = (3, 4, 5),
    filters: int = 100,
    dropout: float = 0.5,
    dtype=np.float32,
) -> CnnParams:
    widths = tuple(sorted(int(w) for w in widths))
    if not widths or min(widths) < 1 or filters < 1:
        raise ToolError("cnn needs at least one positive filter width and filter count")
    if not 0.0 <= dropout < 1.0:
        raise ToolError("dropout must lie in [0, 1)")
    conv_w = [rng.uniform(-0.05, 0.05, (w, dim, filters)).astype(dtype) for w in widths]
    conv_b = [np.zeros(filters, dtype=dtype) for _ in widths]
    dense_w = rng.uniform(-0.05, 0.05, len(widths) * filters).astype(dtype)
    dense_b = np.zeros((), dtype=dtype)
    return CnnParams(widths, filters, conv_w, conv_b, dense_w, dense_b, dropout)


def init_lstm(
    rng: np.random.Generator, dim: int, hidden: int = 128, dtype=np.float32
) -> LstmParams:
    if hidden < 1:
        raise ToolError("hidden size must be positive")

    def w(shape):
        return rng.uniform(-0.05, 0.05, shape).astype(dtype)

    return LstmParams(
        hidden=hidden,
        w_i=w((dim, hidden)),
        w_f=w((dim, hidden)),
        w_o=w((dim, hidden)),
        w_g=w((dim, hidden)),
        u_i=w((hidden, hidden)),
        u_f=w((hidden, hidden)),
        u_o=w((hidden, hidden)),
        u_g=w((hidden, hidden)),
        b_i=np.zeros(hidden, dtype=dtype),
        b_f=np.ones(hidden, dtype=dtype),  # forget-gate bias starts open
        b_o=np.zeros(hidden, dtype=dtype),
        b_g=np.zeros(hidden, dtype=dtype),
        dense_w=w((hidden,)),
        dense_b=np.zeros((), dtype=dtype),
    )


def init_fasttext(
    rng: np.random.Generator, dim: int, bigram_buckets: int = 0, dtype=np.float32
) -> FastTextParams:
    buckets = None
    if bigram_buckets:
        buckets = rng.uniform(-0.05, 0.05, (bigram_buckets, dim)).astype(dtype)
    return FastTextParams(
        w=rng.uniform(-0.05, 0.05, dim).astype(dtype),
        b=np.zeros((), dtype=dtype),
        bucket_vectors=buckets,
    )


def param_arrays(params: ModelParams) -> dict[str, np.ndarray]:
    """Flat name -> array view of every trainable parameter."""
    if isinstance(params, CnnParams):
        out: dict[str, np.ndarray] = {}
        for i in range(len(params.widths)):
            out[f"conv_w_{i}"] = params.conv_w[i]
            out[f"conv_b_{i}"] = params.conv_b[i]
        out["dense_w"] = params.dense_w
        out["dense_b"] = params.dense_b
        return out
    if isinstance(params, LstmParams):
        return {
            "w_i": params.w_i, "w_f": params.w_f, "w_o": params.w_o, "w_g": params.w_g,
            "u_i": params.u_i, "u_f": params.u_f, "u_o": params.u_o, "u_g": params.u_g,
            "b_i": params.b_i, "b_f": params.b_f, "b_o": params.b_o, "b_g": params.b_g,
            "dense_w": params.dense_w, "dense_b": params.dense_b,
        }
    if isinstance(params, FastTextParams):
        out = {"w": params.w, "b": params.b}
        if params.bucket_vectors is not None:
            out["bucket_vectors"] = params.bucket_vectors
        return out
    raise ToolError(f"unknown parameter object {type(params).__name__}")


def set_param_arrays(params: ModelParams, arrays: dict[str, np.ndarray]) -> None:
    """Write arrays back into the parameter object (shapes must match)."""
    if isinstance(params, CnnParams):
        for i in range(len(params.widths)):
            params.conv_w[i] = arrays[f"conv_w_{i}"]
            params.conv_b[i] = arrays[f"conv_b_{i}"]
        params.dense_w = arrays["dense_w"]
        params.dense_b = arrays["dense_b"]
    elif isinstance(params, LstmParams):
        for name in ("w_i", "w_f", "w_o", "w_g", "u_i", "u_f", "u_o", "u_g",
                     "b_i", "b_f", "b_o", "b_g", "dense_w", "dense_b"):
            setattr(params, name, arrays[name])
    elif isinstance(params, FastTextParams):
        params.w = arrays["w"]
        params.b = arrays["b"]
        if params.bucket_vectors is not None:
            params.bucket_vectors = arrays["bucket_vectors"]
    else:
        raise ToolError(f"unknown parameter object {type(params).__name__}")


def cast_params(params: ModelParams, dtype) -> ModelParams:
    arrays = {name: arr.astype(dtype) for name, arr in param_arrays(params).items()}
    clone = clone_params(params)
    set_param_arrays(clone, arrays)
    return clone


def clone_params(params: ModelParams) -> ModelParams:
    if isinstance(params, CnnParams):
        return CnnParams(
            params.widths, params.filters,
            [w.copy() for w in params.conv_w], [b.copy() for b in params.conv_b],
            params.dense_w.copy(), params.dense_b.copy(), params.dropout,
        )
    if isinstance(params, LstmParams):
        return LstmParams(
            params.hidden,
            params.w_i.copy(), params.w_f.copy(), params.w_o.copy(), params.w_g.copy(),
            params.u_i.copy(), params.u_f.copy(), params.u_o.copy(), params.u_g.copy(),
            params.b_i.copy(), params.b_f.copy(), params.b_o.copy(), params.b_g.copy(),
            params.dense_w.copy(), params.dense_b.copy(),
        )
    if isinstance(params, FastTextParams):
        return FastTextParams(
            params.w.copy(), params.b.copy(),
            None if params.bucket_vectors is None else params.bucket_vectors.copy(),
        )
    raise ToolError(f"unknown parameter object {type(params).__name__}")


def _as_batch(indices: np.ndarray) -> tuple[np.ndarray, bool]:
    arr = np.asarray(indices, dtype=np.int64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ToolError("indices must be a 1-D sequence or a 2-D batch")


@dataclass
class CnnCache:
    indices: np.ndarray
    embedded: np.ndarray
    per_width: list[tuple[np.ndarray, np.ndarray, np.ndarray]]  # (windows, pre, argmax)
    pooled: np.ndarray
    drop_mask: np.ndarray | None
    dropped: np.ndarray
    prob: np.ndarray


def cnn_forward_cached(
    indices: np.ndarray,
    embeddings: np.ndarray,
    params: CnnParams,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, CnnCache]:
    idx, _ = _as_batch(indices)
    batch, length = idx.shape
    if length < max(params.widths):
        raise ToolError(
            f"sequence length {length} shorter than widest filter {max(params.widths)}"
        )
    if embeddings.shape[1] != params.conv_w[0].shape[1]:
        raise ToolError("embedding dimension does not match convolution filters")
    embedded = embeddings[idx]  # (B, L, d)
    per_width = []
    pooled_parts = []
    for w_tensor, b_vec in zip(params.conv_w, params.conv_b):
        width, dim, filters = w_tensor.shape
        steps = length - width + 1
        windows = np.stack([embedded[:, j : j + steps, :] for j in range(width)], axis=2)
        windows = windows.reshape(batch, steps, width * dim)
        pre = windows @ w_tensor.reshape(width * dim, filters) + b_vec  # (B, T, F)
        act = np.maximum(pre, 0.0)
        argmax = act.argmax(axis=1)  # (B, F)
        pooled = np.take_along_axis(act, argmax[:, None, :], axis=1)[:, 0, :]
        per_width.append((windows, pre, argmax))
        pooled_parts.append(pooled)
    pooled = np.concatenate(pooled_parts, axis=1)

    drop_mask = None
    dropped = pooled
    if train_mode and params.dropout > 0.0:
        if rng is None:
            raise ToolError("dropout in train mode needs an rng")
        keep = 1.0 - params.dropout
        drop_mask = (rng.random(pooled.shape) < keep).astype(pooled.dtype) / keep
        dropped = pooled * drop_mask

    z = dropped @ params.dense_w + params.dense_b
    prob = sigmoid(z)
    return prob, CnnCache(idx, embedded, per_width, pooled, drop_mask, dropped, prob)


def cnn_forward(
    indices: np.ndarray,
    embeddings: np.ndarray,
    params: CnnParams,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray | float:
    """Multi-width valid convolution, ReLU, max-over-time pool, dropout
    (train mode only), dense layer, sigmoid."""
    idx, squeeze = _as_batch(indices)
    prob, _ = cnn_forward_cached(idx, embeddings, params, train_mode, rng)
    return float(prob[0]) if squeeze else prob


@dataclass
class LstmCache:
    indices: np.ndarray
    embedded: np.ndarray
    active: np.ndarray  # (B, L) bool
    gates: list[tuple[np.ndarray, ...]]  # per step: (i, f, o, g, c_prev, c, tanh_c, h_prev)
    h_final: np.ndarray
    prob: np.ndarray


def lstm_forward_cached(
    indices: np.ndarray, embeddings: np.ndarray, params: LstmParams
) -> tuple[np.ndarray, LstmCache]:
    idx, _ = _as_batch(indices)
    batch, length = idx.shape
    if embeddings.shape[1] != params.w_i.shape[0]:
        raise ToolError("embedding dimension does not match LSTM input weights")
    embedded = embeddings[idx]
    active = idx != PAD_INDEX
    dtype = embeddings.dtype

    # input projections for every step in one shot
    xi = embedded @ params.w_i + params.b_i
    xf = embedded @ params.w_f + params.b_f
    xo = embedded @ params.w_o + params.b_o
    xg = embedded @ params.w_g + params.b_g

    hidden = params.hidden
    h = np.zeros((batch, hidden), dtype=dtype)
    c = np.zeros((batch, hidden), dtype=dtype)
    gates = []
    for t in range(length):
        h_prev = h
        gi = sigmoid(xi[:, t] + h @ params.u_i)
        gf = sigmoid(xf[:, t] + h @ params.u_f)
        go = sigmoid(xo[:, t] + h @ params.u_o)
        gg = np.tanh(xg[:, t] + h @ params.u_g)
        c_prev = c
        c_new = gf * c + gi * gg
        tanh_c = np.tanh(c_new)
        h_new = go * tanh_c
        mask = active[:, t][:, None]
        c = np.where(mask, c_new, c)
        h = np.where(mask, h_new, h)
        gates.append((gi, gf, go, gg, c_prev, c_new, tanh_c, h_prev))

    z = h @ params.dense_w + params.dense_b
    prob = sigmoid(z)
    return prob, LstmCache(idx, embedded, active, gates, h, prob)


def lstm_forward(
    indices: np.ndarray, embeddings: np.ndarray, params: LstmParams
) -> np.ndarray | float:
    """Standard LSTM recurrence over the non-PAD prefix; final hidden state
    feeds the dense sigmoid output.  PAD positions leave the state untouched."""
    idx, squeeze = _as_batch(indices)
    prob, _ = lstm_forward_cached(idx, embeddings, params)
    return float(prob[0]) if squeeze else prob


def bigram_bucket_ids(idx: np.ndarray, buckets: int) -> tuple[np.ndarray, np.ndarray]:
    """Hash consecutive non-PAD index pairs into bucket ids.

    Returns (ids (B, L-1), valid mask (B, L-1)).
    """
    left, right = idx[:, :-1], idx[:, 1:]
    valid = (left != PAD_INDEX) & (right != PAD_INDEX)
    ids = (left * _BIGRAM_MIX + right) % buckets
    return np.where(valid, ids, 0), valid


@dataclass
class FastTextCache:
    indices: np.ndarray
    active: np.ndarray
    counts: np.ndarray  # tokens + bigrams per example
    mean: np.ndarray
    bigram_ids: np.ndarray | None
    bigram_valid: np.ndarray | None
    prob: np.ndarray


def fasttext_forward_cached(
    indices: np.ndarray, embeddings: np.ndarray, params: FastTextParams
) -> tuple[np.ndarray, FastTextCache]:
    idx, _ = _as_batch(indices)
    if embeddings.shape[1] != params.w.shape[0]:
        raise ToolError("embedding dimension does not match linear weights")
    embedded = embeddings[idx]
    active = idx != PAD_INDEX
    total = embedded * active[:, :, None]
    sums = total.sum(axis=1)
    counts = active.sum(axis=1).astype(embeddings.dtype)

    bigram_ids = bigram_valid = None
    if params.bucket_vectors is not None and idx.shape[1] >= 2:
        bigram_ids, bigram_valid = bigram_bucket_ids(idx, params.bigram_buckets)
        sums = sums + (params.bucket_vectors[bigram_ids] * bigram_valid[:, :, None]).sum(axis=1)
        counts = counts + bigram_valid.sum(axis=1)

    denom = np.maximum(counts, 1.0)  # all-PAD rows keep a zero mean
    mean = sums / denom[:, None]
    z = mean @ params.w + params.b
    prob = sigmoid(z)
    return prob, FastTextCache(idx, active, denom, mean, bigram_ids, bigram_valid, prob)


def fasttext_forward(
    indices: np.ndarray, embeddings: np.ndarray, params: FastTextParams
) -> np.ndarray | float:
    """Mean of the non-PAD token embeddings (plus hashed-bigram vectors when
    enabled) through a linear layer and sigmoid."""
    idx, squeeze = _as_batch(indices)
    prob, _ = fasttext_forward_cached(idx, embeddings, params)
    return float(prob[0]) if squeeze else prob


def forward(
    params: ModelParams,
    indices: np.ndarray,
    embeddings: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray | float:
    """Dispatch to the architecture-specific forward pass."""
    if isinstance(params, CnnParams):
        return cnn_forward(indices, embeddings, params, train_mode, rng)
    if isinstance(params, LstmParams):
        return lstm_forward(indices, embeddings, params)
    if isinstance(params, FastTextParams):
        return fasttext_forward(indices, embeddings, params)
    raise ToolError(f"unknown parameter object {type(params).__name__}")


def predict(prob: float, threshold: float = 0.5) -> Label:
    """Political iff prob >= threshold (inclusive boundary)."""
    if not 0.0 <= prob <= 1.0:
        raise ToolError(f"probability {prob} outside [0, 1]")
    return Label.POLITICAL if prob >= threshold else Label.NON_POLITICAL


def _hyper(params: ModelParams) -> dict:
    if isinstance(params, CnnParams):
        return {
            "widths": list(params.widths),
            "filters": params.filters,
            "dropout": params.dropout,
        }
    if isinstance(params, LstmParams):
        return {"hidden": params.hidden}
    return {"bigram_buckets": params.bigram_buckets}


def save_checkpoint(
    path: str | Path, params: ModelParams, vocab_hash: str, extra: dict | None = None
) -> None:
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "kind": params.kind,
        "hyper": _hyper(params),
        "vocab_hash": vocab_hash,
    }
    if extra:
        meta["extra"] = extra
    arrays = {name: np.asarray(arr) for name, arr in param_arrays(params).items()}
    with open(path, "wb") as fh:  # keep the exact path (savez would append .npz)
        np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)


@dataclass
class Checkpoint:
    kind: str
    params: ModelParams
    vocab_hash: str
    meta: dict


def load_checkpoint(path: str | Path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as data:
        if "meta" not in data:
            raise ToolError(f"{path}: not a model checkpoint (missing meta entry)")
        meta = json.loads(str(data["meta"]))
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ToolError(
                f"{path}: unsupported checkpoint version {meta.get('format_version')}"
            )
        arrays = {name: data[name] for name in data.files if name != "meta"}
    kind = meta["kind"]
    hyper = meta["hyper"]
    if kind == "cnn":
        widths = tuple(hyper["widths"])
        params: ModelParams = CnnParams(
            widths=widths,
            filters=hyper["filters"],
            conv_w=[arrays[f"conv_w_{i}"] for i in range(len(widths))],
            conv_b=[arrays[f"conv_b_{i}"] for i in range(len(widths))],
            dense_w=arrays["dense_w"],
            dense_b=arrays["dense_b"],
            dropout=hyper["dropout"],
        )
    elif kind == "lstm":
        params = LstmParams(hidden=hyper["hidden"], **{
            name: arrays[name]
            for name in ("w_i", "w_f", "w_o", "w_g", "u_i", "u_f", "u_o", "u_g",
                         "b_i", "b_f", "b_o", "b_g", "dense_w", "dense_b")
        })
    elif kind == "fasttext":
        params = FastTextParams(
            w=arrays["w"],
            b=arrays["b"],
            bucket_vectors=arrays.get("bucket_vectors"),
        )
    else:
        raise ToolError(f"{path}: unknown model kind '{kind}'")
    return Checkpoint(kind, params, meta["vocab_hash"], meta)
