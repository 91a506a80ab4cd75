"""Classifier training: binary cross-entropy, analytic backpropagation for
all three architectures, RMSProp updates, and a finite-difference gradient
checker.

Training runs in 32-bit by default; gradient checks force 64-bit.  Embedding
rows are frozen unless fine-tuning is enabled, in which case every row except
PAD becomes trainable (PAD stays permanently zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .embeddings import PAD_INDEX
from .io_utils import ToolError, write_csv
from .models import (
    CnnParams,
    FastTextParams,
    LstmParams,
    ModelParams,
    cast_params,
    cnn_forward_cached,
    fasttext_forward_cached,
    lstm_forward_cached,
    param_arrays,
)
from .numerics import PROB_CLIP

EMBEDDING_GRAD_KEY = "__embeddings__"


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    rho: float = 0.9
    epsilon: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    fine_tune_embeddings: bool = False

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ToolError("learning rate must be >= 0")
        if not 0.0 < self.rho < 1.0:
            raise ToolError("rho must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ToolError("epsilon must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ToolError("epochs and batch size must be positive")


@dataclass
class RmspropState:
    cache: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class LabeledExample:
    tweet_id: str
    indices: np.ndarray
    y: int  # 1 = political
    deputy_id: str = ""
    month: str = ""


def bce_loss(prob, y):
    """-[y ln p + (1-y) ln(1-p)] with p clipped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(prob, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    y = np.asarray(y, dtype=np.float64)
    loss = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(loss) if loss.ndim == 0 else loss


def _dloss_dz(prob: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-example gradient of the clipped BCE w.r.t. the pre-sigmoid logit.

    Inside the clip band this is exactly (p - y); where the clip is active the
    loss is locally constant, so the gradient is zero.
    """
    inside = (prob >= PROB_CLIP) & (prob <= 1.0 - PROB_CLIP)
    return np.where(inside, prob - y, 0.0).astype(prob.dtype)


def _check_finite(grads: dict[str, np.ndarray]) -> None:
    for name, grad in grads.items():
        if not np.isfinite(grad).all():
            raise ToolError(f"non-finite gradient in parameter '{name}'")


def _cnn_backward(
    params: CnnParams,
    cache,
    y: np.ndarray,
    want_embedding_grads: bool,
) -> tuple[dict[str, np.ndarray], np.ndarray | None]:
    batch = cache.prob.shape[0]
    dz = _dloss_dz(cache.prob, y) / batch  # mean-batch loss
    grads: dict[str, np.ndarray] = {
        "dense_b": np.asarray(dz.sum(), dtype=params.dense_b.dtype),
        "dense_w": cache.dropped.T @ dz,
    }
    dpooled = np.outer(dz, params.dense_w)
    if cache.drop_mask is not None:
        dpooled = dpooled * cache.drop_mask

    dembedded = np.zeros_like(cache.embedded) if want_embedding_grads else None
    offset = 0
    for i, (windows, pre, argmax) in enumerate(cache.per_width):
        w_tensor = params.conv_w[i]
        width, dim, filters = w_tensor.shape
        steps = pre.shape[1]
        dpool = dpooled[:, offset : offset + filters]
        offset += filters
        dact = np.zeros_like(pre)
        np.put_along_axis(dact, argmax[:, None, :], dpool[:, None, :], axis=1)
        dpre = dact * (pre > 0)
        grads[f"conv_w_{i}"] = (
            windows.reshape(-1, width * dim).T @ dpre.reshape(-1, filters)
        ).reshape(width, dim, filters)
        grads[f"conv_b_{i}"] = dpre.sum(axis=(0, 1))
        if dembedded is not None:
            dwin = (dpre @ w_tensor.reshape(width * dim, filters).T).reshape(
                batch, steps, width, dim
            )
            for j in range(width):
                dembedded[:, j : j + steps, :] += dwin[:, :, j, :]
    return grads, dembedded


def _lstm_backward(
    params: LstmParams,
    cache,
    y: np.ndarray,
    want_embedding_grads: bool,
) -> tuple[dict[str, np.ndarray], np.ndarray | None]:
    batch, length, dim = cache.embedded.shape
    hidden = params.hidden
    dtype = cache.embedded.dtype
    dz = _dloss_dz(cache.prob, y) / batch

    grads: dict[str, np.ndarray] = {
        "dense_b": np.asarray(dz.sum(), dtype=dtype),
        "dense_w": cache.h_final.T @ dz,
    }
    dh = np.outer(dz, params.dense_w)
    dc = np.zeros((batch, hidden), dtype=dtype)

    dpre = {g: np.zeros((batch, length, hidden), dtype=dtype) for g in "ifog"}
    h_prevs = np.zeros((batch, length, hidden), dtype=dtype)

    for t in range(length - 1, -1, -1):
        gi, gf, go, gg, c_prev, c_new, tanh_c, h_prev = cache.gates[t]
        mask = cache.active[:, t][:, None].astype(dtype)
        dh_t = dh * mask
        dc_t = dc * mask

        dgo = dh_t * tanh_c
        dc_inner = dc_t + dh_t * go * (1.0 - tanh_c**2)
        dgf = dc_inner * c_prev
        dgi = dc_inner * gg
        dgg = dc_inner * gi

        dpre_i = dgi * gi * (1.0 - gi)
        dpre_f = dgf * gf * (1.0 - gf)
        dpre_o = dgo * go * (1.0 - go)
        dpre_g = dgg * (1.0 - gg**2)
        dpre["i"][:, t] = dpre_i
        dpre["f"][:, t] = dpre_f
        dpre["o"][:, t] = dpre_o
        dpre["g"][:, t] = dpre_g
        h_prevs[:, t] = h_prev

        dh_rec = (
            dpre_i @ params.u_i.T
            + dpre_f @ params.u_f.T
            + dpre_o @ params.u_o.T
            + dpre_g @ params.u_g.T
        )
        dh = dh_rec + dh * (1.0 - mask)
        dc = dc_inner * gf + dc * (1.0 - mask)

    emb_flat = cache.embedded.reshape(-1, dim)
    hp_flat = h_prevs.reshape(-1, hidden)
    for gate in "ifog":
        flat = dpre[gate].reshape(-1, hidden)
        grads[f"w_{gate}"] = emb_flat.T @ flat
        grads[f"u_{gate}"] = hp_flat.T @ flat
        grads[f"b_{gate}"] = flat.sum(axis=0)

    dembedded = None
    if want_embedding_grads:
        dembedded = (
            dpre["i"] @ params.w_i.T
            + dpre["f"] @ params.w_f.T
            + dpre["o"] @ params.w_o.T
            + dpre["g"] @ params.w_g.T
        )
    return grads, dembedded


def _fasttext_backward(
    params: FastTextParams,
    cache,
    y: np.ndarray,
    want_embedding_grads: bool,
) -> tuple[dict[str, np.ndarray], np.ndarray | None]:
    batch = cache.prob.shape[0]
    dz = _dloss_dz(cache.prob, y) / batch
    grads: dict[str, np.ndarray] = {
        "b": np.asarray(dz.sum(), dtype=params.b.dtype),
        "w": cache.mean.T @ dz,
    }
    dmean = np.outer(dz, params.w)
    dsum = dmean / cache.counts[:, None]

    if params.bucket_vectors is not None:
        bucket_grad = np.zeros_like(params.bucket_vectors)
        if cache.bigram_ids is not None:
            rows, cols = np.nonzero(cache.bigram_valid)
            np.add.at(bucket_grad, cache.bigram_ids[rows, cols], dsum[rows])
        grads["bucket_vectors"] = bucket_grad

    dembedded = None
    if want_embedding_grads:
        dembedded = dsum[:, None, :] * cache.active[:, :, None]
    return grads, dembedded


def forward_cached(
    params: ModelParams,
    indices: np.ndarray,
    embeddings: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
):
    if isinstance(params, CnnParams):
        return cnn_forward_cached(indices, embeddings, params, train_mode, rng)
    if isinstance(params, LstmParams):
        return lstm_forward_cached(indices, embeddings, params)
    if isinstance(params, FastTextParams):
        return fasttext_forward_cached(indices, embeddings, params)
    raise ToolError(f"unknown parameter object {type(params).__name__}")


def backward(
    params: ModelParams,
    indices: np.ndarray,
    y: np.ndarray,
    embeddings: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    want_embedding_grads: bool = False,
    cache=None,
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Analytic gradients of the mean batch BCE w.r.t. every trainable
    parameter.  With want_embedding_grads the dict gains an entry for the
    embedding matrix (PAD row forced to zero).  Returns (grads, probs)."""
    idx = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    y = np.asarray(y, dtype=embeddings.dtype).reshape(-1)
    if cache is None:
        _, cache = forward_cached(params, idx, embeddings, train_mode, rng)
    if isinstance(params, CnnParams):
        grads, dembedded = _cnn_backward(params, cache, y, want_embedding_grads)
    elif isinstance(params, LstmParams):
        grads, dembedded = _lstm_backward(params, cache, y, want_embedding_grads)
    else:
        grads, dembedded = _fasttext_backward(params, cache, y, want_embedding_grads)

    if want_embedding_grads:
        emb_grad = np.zeros_like(embeddings)
        np.add.at(emb_grad, cache.indices, dembedded)
        emb_grad[PAD_INDEX] = 0.0
        grads[EMBEDDING_GRAD_KEY] = emb_grad
    _check_finite(grads)
    return grads, cache.prob


def rmsprop_step(
    arrays: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: RmspropState,
    config: TrainConfig,
) -> tuple[dict[str, np.ndarray], RmspropState]:
    """cache <- rho*cache + (1-rho)*g^2 ; param <- param - lr*g/sqrt(cache+eps).

    Updates the arrays and state in place and returns them.
    """
    for name, grad in grads.items():
        if name not in arrays:
            raise ToolError(f"gradient for unknown parameter '{name}'")
        param = arrays[name]
        if param.shape != grad.shape:
            raise ToolError(f"shape mismatch for '{name}': {param.shape} vs {grad.shape}")
        cache = state.cache.get(name)
        if cache is None:
            cache = np.zeros_like(param, dtype=np.float64)
            state.cache[name] = cache
        cache *= config.rho
        cache += (1.0 - config.rho) * np.asarray(grad, dtype=np.float64) ** 2
        param -= (
            config.learning_rate * np.asarray(grad, dtype=np.float64)
            / np.sqrt(cache + config.epsilon)
        ).astype(param.dtype)
    return arrays, state


@dataclass
class TrainResult:
    params: ModelParams
    loss_history: list[float]
    embeddings: np.ndarray  # fine-tuned copy, or the input matrix unchanged


def train(
    params: ModelParams,
    examples: Sequence[LabeledExample],
    embeddings: np.ndarray,
    config: TrainConfig,
) -> TrainResult:
    """Mini-batch RMSProp training with seeded per-epoch shuffling.

    Deterministic under config.seed (single-threaded).  Raises on an empty or
    single-class dataset, since Macro F1 is undefined downstream.
    """
    if not examples:
        raise ToolError("training set is empty")
    labels = {ex.y for ex in examples}
    if labels != {0, 1}:
        raise ToolError("training set must contain both classes")

    idx_matrix = np.stack([ex.indices for ex in examples]).astype(np.int64)
    y_vec = np.array([ex.y for ex in examples], dtype=embeddings.dtype)

    if config.fine_tune_embeddings:
        embeddings = embeddings.copy()

    rng = np.random.default_rng(config.seed)
    arrays = param_arrays(params)
    if config.fine_tune_embeddings:
        arrays = dict(arrays)
        arrays[EMBEDDING_GRAD_KEY] = embeddings
    state = RmspropState()
    n = len(examples)
    history: list[float] = []

    for _ in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            rows = order[start : start + config.batch_size]
            batch_idx = idx_matrix[rows]
            batch_y = y_vec[rows]
            probs, cache = forward_cached(params, batch_idx, embeddings, True, rng)
            grads, _ = backward(
                params,
                batch_idx,
                batch_y,
                embeddings,
                want_embedding_grads=config.fine_tune_embeddings,
                cache=cache,
            )
            epoch_loss += float(bce_loss(probs, batch_y).sum())
            rmsprop_step(arrays, grads, state, config)
        history.append(epoch_loss / n)

    return TrainResult(params, history, embeddings)


def history_to_csv(path: str | Path, history: Sequence[float]) -> None:
    write_csv(
        path,
        ["epoch", "mean_loss"],
        ((epoch + 1, f"{loss:.6f}") for epoch, loss in enumerate(history)),
    )


def gradient_check(
    params: ModelParams,
    indices: np.ndarray,
    y: np.ndarray,
    embeddings: np.ndarray,
    delta: float = 1e-4,
    max_coords: int | None = None,
    seed: int = 0,
    include_embeddings: bool = False,
) -> float:
    """Max relative error of analytic gradients vs central finite differences.

    Runs entirely in 64-bit.  When max_coords is given and the model has more
    coordinates, a seeded random subset of that size is checked.  The relative
    error denominator is floored at 1e-6 so coordinates whose true gradient
    sits at the finite-difference noise floor do not dominate.
    """
    if isinstance(params, CnnParams) and params.dropout > 0.0:
        raise ToolError("stochastic forward: disable dropout before gradient checks")

    p64 = cast_params(params, np.float64)
    emb64 = embeddings.astype(np.float64)
    idx = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    y64 = np.asarray(y, dtype=np.float64).reshape(-1)

    grads, _ = backward(
        p64, idx, y64, emb64, want_embedding_grads=include_embeddings
    )
    arrays = param_arrays(p64)
    if include_embeddings:
        arrays = dict(arrays)
        arrays[EMBEDDING_GRAD_KEY] = emb64

    def loss_value() -> float:
        probs, _ = forward_cached(p64, idx, emb64)
        return float(bce_loss(probs, y64).mean())

    coords: list[tuple[str, int]] = []
    for name in sorted(arrays):
        start = 0
        if name == EMBEDDING_GRAD_KEY:
            # the PAD row is frozen by design, not zero-gradient by calculus
            start = emb64.shape[1] * (PAD_INDEX + 1)
        coords.extend((name, i) for i in range(start, arrays[name].size))
    if max_coords is not None and len(coords) > max_coords:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in sorted(picks)]

    worst = 0.0
    for name, flat in coords:
        arr = arrays[name]
        original = arr.flat[flat]
        arr.flat[flat] = original + delta
        loss_plus = loss_value()
        arr.flat[flat] = original - delta
        loss_minus = loss_value()
        arr.flat[flat] = original
        numeric = (loss_plus - loss_minus) / (2.0 * delta)
        analytic = float(grads[name].flat[flat])
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, err)
    return worst
