"""Biterm topic model for short texts, fitted by collapsed Gibbs sampling.

A biterm is an unordered pair of word positions co-occurring inside a
document's context window (whole document by default).  The sampler keeps
two counters: n_z (biterms per topic) and n_wz (word occurrences per topic);
their conservation laws (sum n_z == number of biterms, and per topic
sum_w n_wz == 2 * n_z) are re-checked after fitting, or after every sweep in
validating mode.

Model file format (version 1): .npz with a JSON ``meta`` entry
{"format_version", "k", "alpha", "beta", "iterations", "seed", "window"} and
arrays ``phi`` (K x M), ``theta`` (K,) and ``vocab`` (M unicode entries).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .io_utils import ToolError

MODEL_FORMAT_VERSION = 1


@dataclass
class BtmConfig:
    k: int = 10
    alpha: float | None = None  # defaults to 50 / k
    beta: float = 0.005
    iterations: int = 1000
    seed: int = 0
    window: int | None = None  # None = whole document

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ToolError("number of topics must be >= 2")
        if self.alpha is None:
            self.alpha = 50.0 / self.k
        if self.alpha <= 0 or self.beta <= 0:
            raise ToolError("alpha and beta must be positive")
        if self.iterations < 1:
            raise ToolError("iterations must be >= 1")
        if self.window is not None and self.window < 2:
            raise ToolError("window must be >= 2 (or None for whole-document)")


def extract_biterms(
    doc_indices: Sequence[int], window: int | None = None
) -> list[tuple[int, int]]:
    """Unordered word-index pairs from one document.

    Whole-document window yields all C(len, 2) position pairs; a finite
    window w pairs positions within distance < w.  Documents with fewer than
    two tokens yield nothing.
    """
    n = len(doc_indices)
    out: list[tuple[int, int]] = []
    for i in range(n):
        hi = n if window is None else min(n, i + window)
        for j in range(i + 1, hi):
            a, b = doc_indices[i], doc_indices[j]
            out.append((a, b) if a <= b else (b, a))
    return out


class BtmSampler:
    """Collapsed Gibbs sampler over biterm topic assignments.

    The sweep is strictly sequential over biterms; parallel chains should use
    independent sampler instances with their own seeds.
    """

    def __init__(
        self,
        documents: Sequence[Sequence[int]],
        vocab_size: int,
        config: BtmConfig,
    ):
        self.config = config
        self.vocab_size = vocab_size
        self.biterms: list[tuple[int, int]] = []
        self.doc_of: list[int] = []
        for d, doc in enumerate(documents):
            for pair in extract_biterms(doc, config.window):
                self.biterms.append(pair)
                self.doc_of.append(d)
        if not self.biterms:
            raise ToolError("corpus contains no biterms (documents too short?)")

        self.rng = np.random.default_rng(config.seed)
        self.n_z = np.zeros(config.k, dtype=np.int64)
        self.n_wz = np.zeros((vocab_size, config.k), dtype=np.int64)
        self.z = self.rng.integers(0, config.k, size=len(self.biterms))
        for (w1, w2), topic in zip(self.biterms, self.z):
            self.n_z[topic] += 1
            self.n_wz[w1, topic] += 1
            self.n_wz[w2, topic] += 1

    def sweep(self) -> None:
        """One full Gibbs sweep: resample every biterm's topic in order."""
        alpha = self.config.alpha
        beta = self.config.beta
        m_beta = self.vocab_size * beta
        uniforms = self.rng.random(len(self.biterms))
        n_z = self.n_z
        n_wz = self.n_wz
        for i, (w1, w2) in enumerate(self.biterms):
            topic = self.z[i]
            n_z[topic] -= 1
            n_wz[w1, topic] -= 1
            n_wz[w2, topic] -= 1

            two_nz = 2.0 * n_z + m_beta
            probs = (
                (n_z + alpha)
                * (n_wz[w1] + beta)
                * (n_wz[w2] + beta)
                / (two_nz * (two_nz + 1.0))
            )
            cum = np.cumsum(probs)
            new_topic = int(np.searchsorted(cum, uniforms[i] * cum[-1], side="right"))
            if new_topic >= self.config.k:  # guard against float edge at 1.0
                new_topic = self.config.k - 1

            self.z[i] = new_topic
            n_z[new_topic] += 1
            n_wz[w1, new_topic] += 1
            n_wz[w2, new_topic] += 1

    def check_conservation(self) -> None:
        if int(self.n_z.sum()) != len(self.biterms):
            raise ToolError("count conservation violated: sum n_z != |biterms|")
        per_topic = self.n_wz.sum(axis=0)
        if not np.array_equal(per_topic, 2 * self.n_z):
            raise ToolError("count conservation violated: sum_w n_wz != 2 n_z")
        if (self.n_z < 0).any() or (self.n_wz < 0).any():
            raise ToolError("count conservation violated: negative counter")

    def phi(self) -> np.ndarray:
        beta = self.config.beta
        denom = 2.0 * self.n_z + self.vocab_size * beta
        return ((self.n_wz + beta) / denom).T  # (K, M)

    def theta(self) -> np.ndarray:
        alpha = self.config.alpha
        return (self.n_z + alpha) / (len(self.biterms) + self.config.k * alpha)


@dataclass
class BtmModel:
    phi: np.ndarray  # (K, M), rows sum to 1
    theta: np.ndarray  # (K,), sums to 1
    vocab: list[str]
    config: BtmConfig

    @property
    def k(self) -> int:
        return self.phi.shape[0]

    def __post_init__(self) -> None:
        self._index = {tok: i for i, tok in enumerate(self.vocab)}

    def top_words(self, topic: int, n: int = 5) -> list[tuple[str, float]]:
        """Top-n words of one topic by phi, ties broken lexicographically."""
        if not 0 <= topic < self.k:
            raise ToolError(f"topic {topic} out of range [0, {self.k})")
        order = sorted(range(len(self.vocab)), key=lambda w: (-self.phi[topic, w], self.vocab[w]))
        return [(self.vocab[w], float(self.phi[topic, w])) for w in order[:n]]

    def infer_document(self, doc_tokens: Sequence[str]) -> np.ndarray:
        """P(z|d) = sum_b P(z|b) P(b|d) with P(b|d) uniform over the
        document's biterm list; documents without biterms fall back to theta."""
        indices = [self._index[t] for t in doc_tokens if t in self._index]
        biterms = extract_biterms(indices, self.config.window)
        if not biterms:
            return self.theta.copy()
        dist = np.zeros(self.k, dtype=np.float64)
        for w1, w2 in biterms:
            joint = self.theta * self.phi[:, w1] * self.phi[:, w2]
            total = joint.sum()
            if total > 0:
                dist += joint / total
        dist /= len(biterms)
        return dist


def build_vocab(documents: Sequence[Sequence[str]]) -> list[str]:
    return sorted({token for doc in documents for token in doc})


def gibbs_fit(
    documents: Sequence[Sequence[str]],
    config: BtmConfig,
    validate_every_sweep: bool = False,
) -> tuple[BtmModel, BtmSampler]:
    """Fit a biterm topic model on tokenised documents.

    Point estimates come from the counters at the final sweep of a single
    chain (no burn-in discard); the verification harness separately checks
    the sampler against enumerated posteriors on tiny instances.
    """
    vocab = build_vocab(documents)
    if not vocab:
        raise ToolError("corpus is empty")
    index = {tok: i for i, tok in enumerate(vocab)}
    indexed = [[index[t] for t in doc] for doc in documents]
    sampler = BtmSampler(indexed, len(vocab), config)
    for _ in range(config.iterations):
        sampler.sweep()
        if validate_every_sweep:
            sampler.check_conservation()
    sampler.check_conservation()
    model = BtmModel(sampler.phi(), sampler.theta(), vocab, config)
    return model, sampler


def corpus_topic_shares(
    model: BtmModel, documents: Sequence[Sequence[str]]
) -> tuple[list[float], list[int]]:
    """Percentage of documents attributed (argmax P(z|d)) to each topic.

    Returns (exact percentages, integer display percentages).  The integer
    column is rounded per topic, so its sum can drift from 100 by at most K/2.
    """
    if not documents:
        raise ToolError("no documents to attribute")
    counts = np.zeros(model.k, dtype=np.int64)
    for doc in documents:
        dist = model.infer_document(doc)
        counts[int(np.argmax(dist))] += 1
    exact = (100.0 * counts / len(documents)).tolist()
    return exact, [round(x) for x in exact]


def save_model(path: str | Path, model: BtmModel) -> None:
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "k": model.config.k,
        "alpha": model.config.alpha,
        "beta": model.config.beta,
        "iterations": model.config.iterations,
        "seed": model.config.seed,
        "window": model.config.window,
    }
    with open(path, "wb") as fh:  # keep the exact path (savez would append .npz)
        np.savez(
            fh,
            meta=np.array(json.dumps(meta, sort_keys=True)),
            phi=model.phi,
            theta=model.theta,
            vocab=np.array(model.vocab),
        )


def load_model(path: str | Path) -> BtmModel:
    with np.load(path, allow_pickle=False) as data:
        if "meta" not in data:
            raise ToolError(f"{path}: not a topic model file (missing meta entry)")
        meta = json.loads(str(data["meta"]))
        if meta.get("format_version") != MODEL_FORMAT_VERSION:
            raise ToolError(f"{path}: unsupported model version {meta.get('format_version')}")
        config = BtmConfig(
            k=meta["k"],
            alpha=meta["alpha"],
            beta=meta["beta"],
            iterations=meta["iterations"],
            seed=meta["seed"],
            window=meta["window"],
        )
        return BtmModel(
            phi=data["phi"], theta=data["theta"], vocab=data["vocab"].tolist(), config=config
        )
