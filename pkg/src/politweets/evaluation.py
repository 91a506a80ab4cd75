"""Scoring: Macro F1, stratified k-fold cross-validation, external-test
evaluation, and the per-deputy / per-month bias breakdown.

Zero-division convention: a class with precision + recall = 0 (or with no
predicted and no actual positives) contributes F1 = 0 to the macro average.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import Label
from .io_utils import ToolError, fmt_float, write_csv
from .models import ModelParams, forward
from .training import LabeledExample, TrainConfig, train


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else 0.0


def confusion(truths: Sequence[Label], predictions: Sequence[Label], positive: Label) -> ConfusionMatrix:
    cm = ConfusionMatrix()
    for truth, pred in zip(truths, predictions):
        if truth == positive:
            if pred == positive:
                cm.tp += 1
            else:
                cm.fn += 1
        else:
            if pred == positive:
                cm.fp += 1
            else:
                cm.tn += 1
    return cm


def macro_f1(truths: Sequence[Label], predictions: Sequence[Label]) -> float:
    """Unweighted mean of the two per-class F1 scores."""
    if len(truths) != len(predictions):
        raise ToolError(
            f"length mismatch: {len(truths)} truths vs {len(predictions)} predictions"
        )
    if not truths:
        raise ToolError("cannot score an empty evaluation set")
    f1_pol = confusion(truths, predictions, Label.POLITICAL).f1()
    f1_non = confusion(truths, predictions, Label.NON_POLITICAL).f1()
    return (f1_pol + f1_non) / 2.0


def stratified_folds(labels: Sequence[int], k: int, seed: int) -> np.ndarray:
    """Assign each example to one of k folds, classwise round-robin after a
    seeded shuffle: per-fold class counts stay within 1 of each other."""
    labels = np.asarray(labels)
    if len(labels) < k:
        raise ToolError(f"dataset of {len(labels)} examples cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=np.int64)
    for value in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == value)
        if len(members) < k:
            raise ToolError(
                f"class {value} has only {len(members)} examples; needs >= {k} for stratified folds"
            )
        members = members[rng.permutation(len(members))]
        folds[members] = np.arange(len(members)) % k
    return folds


@dataclass
class CvResult:
    fold_scores: list[float]
    mean: float
    resubstitution: float  # training-set score of a model trained on everything


def _predict_labels(
    params: ModelParams, examples: Sequence[LabeledExample], embeddings: np.ndarray,
    threshold: float = 0.5,
) -> list[Label]:
    idx = np.stack([ex.indices for ex in examples])
    probs = forward(params, idx, embeddings)
    return [
        Label.POLITICAL if p >= threshold else Label.NON_POLITICAL for p in np.atleast_1d(probs)
    ]


def _truth_labels(examples: Sequence[LabeledExample]) -> list[Label]:
    return [Label.POLITICAL if ex.y == 1 else Label.NON_POLITICAL for ex in examples]


def kfold_cv(
    examples: Sequence[LabeledExample],
    embeddings: np.ndarray,
    make_params: Callable[[], ModelParams],
    config: TrainConfig,
    k: int = 10,
    seed: int = 0,
) -> CvResult:
    """Stratified k-fold cross-validation: per fold, train on k-1 folds and
    score the held-out fold with Macro F1.  Also reports the resubstitution
    score of a model trained on the full set (both are emitted downstream,
    clearly labelled, since "training set" scores are ambiguous between the
    two readings)."""
    fold_of = stratified_folds([ex.y for ex in examples], k, seed)
    scores: list[float] = []
    for fold in range(k):
        train_set = [ex for ex, f in zip(examples, fold_of) if f != fold]
        held_out = [ex for ex, f in zip(examples, fold_of) if f == fold]
        fold_config = TrainConfig(**{**config.__dict__, "seed": config.seed + fold})
        result = train(make_params(), train_set, embeddings, fold_config)
        preds = _predict_labels(result.params, held_out, result.embeddings)
        scores.append(macro_f1(_truth_labels(held_out), preds))

    full = train(make_params(), list(examples), embeddings, config)
    resub_preds = _predict_labels(full.params, examples, full.embeddings)
    resub = macro_f1(_truth_labels(examples), resub_preds)
    return CvResult(scores, float(np.mean(scores)), resub)


@dataclass
class GroupScore:
    group: str
    n: int
    score: float


@dataclass
class GroupSummary:
    scores: list[GroupScore]
    insufficient: list[str]
    median: float
    minimum: float
    maximum: float
    q1: float
    q3: float

    @classmethod
    def from_scores(cls, scores: list[GroupScore], insufficient: list[str]) -> "GroupSummary":
        values = [s.score for s in scores]
        if not values:
            nan = float("nan")
            return cls(scores, insufficient, nan, nan, nan, nan, nan)
        return cls(
            scores,
            insufficient,
            median=float(np.median(values)),
            minimum=float(np.min(values)),
            maximum=float(np.max(values)),
            q1=float(np.percentile(values, 25)),
            q3=float(np.percentile(values, 75)),
        )


def per_group_f1(
    examples: Sequence[LabeledExample],
    truths: Sequence[Label],
    predictions: Sequence[Label],
    group_key: str,
    min_group_size: int = 5,
) -> GroupSummary:
    """Macro F1 within each deputy or month group of at least min_group_size
    examples; smaller groups are reported as insufficient."""
    if group_key not in ("deputy", "month"):
        raise ToolError(f"group key must be 'deputy' or 'month', got '{group_key}'")
    buckets: dict[str, list[int]] = {}
    for i, ex in enumerate(examples):
        key = ex.deputy_id if group_key == "deputy" else ex.month
        buckets.setdefault(key, []).append(i)

    scores: list[GroupScore] = []
    insufficient: list[str] = []
    for group in sorted(buckets):
        rows = buckets[group]
        if len(rows) < min_group_size:
            insufficient.append(group)
            continue
        g_truth = [truths[i] for i in rows]
        g_pred = [predictions[i] for i in rows]
        scores.append(GroupScore(group, len(rows), macro_f1(g_truth, g_pred)))
    return GroupSummary.from_scores(scores, insufficient)


@dataclass
class EvalReport:
    overall_macro_f1: float
    n_examples: int
    fold_scores: list[float] = field(default_factory=list)
    cv_mean: float | None = None
    resubstitution: float | None = None
    by_deputy: GroupSummary | None = None
    by_month: GroupSummary | None = None

    def to_dict(self) -> dict:
        def summary_dict(summary: GroupSummary | None) -> dict | None:
            if summary is None:
                return None
            return {
                "groups": [
                    {"group": s.group, "n": s.n, "macro_f1": round(s.score, 6)}
                    for s in summary.scores
                ],
                "insufficient": summary.insufficient,
                "median": round(summary.median, 6),
                "min": round(summary.minimum, 6),
                "max": round(summary.maximum, 6),
                "q1": round(summary.q1, 6),
                "q3": round(summary.q3, 6),
            }

        return {
            "overall_macro_f1": round(self.overall_macro_f1, 6),
            "n_examples": self.n_examples,
            "fold_scores": [round(s, 6) for s in self.fold_scores],
            "cv_mean_macro_f1": round(self.cv_mean, 6) if self.cv_mean is not None else None,
            "resubstitution_macro_f1": (
                round(self.resubstitution, 6) if self.resubstitution is not None else None
            ),
            "by_deputy": summary_dict(self.by_deputy),
            "by_month": summary_dict(self.by_month),
        }

    def to_markdown(self) -> str:
        lines = [
            "| metric | value |",
            "| --- | --- |",
            f"| test macro F1 | {fmt_float(self.overall_macro_f1)} |",
            f"| examples | {self.n_examples} |",
        ]
        if self.cv_mean is not None:
            lines.append(f"| CV mean macro F1 | {fmt_float(self.cv_mean)} |")
        if self.resubstitution is not None:
            lines.append(f"| resubstitution macro F1 | {fmt_float(self.resubstitution)} |")
        for name, summary in (("deputy", self.by_deputy), ("month", self.by_month)):
            if summary is None or not summary.scores:
                continue
            lines.append("")
            lines.append(f"Per-{name} macro F1 (groups with >= minimum size):")
            lines.append("")
            lines.append("| group | n | macro F1 |")
            lines.append("| --- | --- | --- |")
            for s in summary.scores:
                lines.append(f"| {s.group} | {s.n} | {fmt_float(s.score)} |")
            lines.append(
                f"| summary | median {fmt_float(summary.median)} | "
                f"min {fmt_float(summary.minimum)} / max {fmt_float(summary.maximum)} |"
            )
        return "\n".join(lines) + "\n"


def groups_to_csv(path, summary: GroupSummary) -> None:
    write_csv(
        path,
        ["group", "n", "macro_f1"],
        ((s.group, s.n, fmt_float(s.score)) for s in summary.scores),
    )


def evaluate_test(
    params: ModelParams,
    embeddings: np.ndarray,
    test_examples: Sequence[LabeledExample],
    train_ids: set[str] | None = None,
    min_group_size: int = 5,
) -> EvalReport:
    """Score a trained model on a labelled external test set.

    Raises when the test set is empty or shares tweet ids with the training
    set (the offending ids are listed)."""
    if not test_examples:
        raise ToolError("test set is empty")
    if train_ids:
        overlap = sorted({ex.tweet_id for ex in test_examples} & train_ids)
        if overlap:
            shown = ", ".join(overlap[:10])
            raise ToolError(
                f"test set overlaps training ids ({len(overlap)} ids: {shown}"
                + (", ..." if len(overlap) > 10 else "") + ")"
            )
    truths = _truth_labels(test_examples)
    preds = _predict_labels(params, test_examples, embeddings)
    return EvalReport(
        overall_macro_f1=macro_f1(truths, preds),
        n_examples=len(test_examples),
        by_deputy=per_group_f1(test_examples, truths, preds, "deputy", min_group_size),
        by_month=per_group_f1(test_examples, truths, preds, "month", min_group_size),
    )
