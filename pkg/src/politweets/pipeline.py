"""Pipeline glue: dataset assembly, whole-corpus classification, word
frequencies for word-cloud rendering, and the experiment matrix behind the
meta-parameter comparison charts."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Sequence

import numpy as np

from .config import ModelSettings
from .corpus import Deputy, Label, LabeledTweet, LabelSource, Tweet
from .embeddings import Vocabulary, encode
from .evaluation import CvResult, evaluate_test, kfold_cv, macro_f1
from .io_utils import ToolError, fmt_float
from .models import Checkpoint, ModelParams, forward
from .sampling import SampleDraw, SampleMode, draw_sample, make_plan, monthly_histogram
from .training import LabeledExample, TrainConfig, train


def encode_tweet(tweet: Tweet, vocab: Vocabulary, settings: ModelSettings) -> np.ndarray:
    return encode(list(tweet.tokens), vocab, settings.max_len, settings.min_len)


def examples_from_tweets(
    tweets: Sequence[Tweet], vocab: Vocabulary, settings: ModelSettings
) -> list[LabeledExample]:
    """Turn manually labelled tweets into encoded training examples."""
    examples = []
    for tweet in tweets:
        if tweet.label is None:
            raise ToolError(f"tweet {tweet.id} has no label")
        examples.append(
            LabeledExample(
                tweet_id=tweet.id,
                indices=encode_tweet(tweet, vocab, settings),
                y=1 if tweet.label is Label.POLITICAL else 0,
                deputy_id=tweet.deputy_id,
                month=tweet.month,
            )
        )
    return examples


def split_holdout(
    tweets: Sequence[Tweet], test_frac: float = 0.2, seed: int = 0
) -> tuple[list[Tweet], list[Tweet]]:
    """Seeded stratified holdout, taken before sampling any training pools."""
    if not 0.0 < test_frac < 1.0:
        raise ToolError("test fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    by_label: dict[Label | None, list[int]] = {}
    for i, t in enumerate(tweets):
        by_label.setdefault(t.label, []).append(i)
    test_rows: set[int] = set()
    for label in sorted(by_label, key=lambda l: l.value if l else ""):
        rows = by_label[label]
        n_test = round(len(rows) * test_frac)
        picks = rng.choice(len(rows), size=n_test, replace=False)
        test_rows.update(rows[i] for i in picks)
    train_pool = [t for i, t in enumerate(tweets) if i not in test_rows]
    test_set = [t for i, t in enumerate(tweets) if i in test_rows]
    return train_pool, test_set


def require_vocab_match(checkpoint: Checkpoint, vocab: Vocabulary) -> None:
    if checkpoint.vocab_hash != vocab.sha256():
        raise ToolError(
            "vocabulary mismatch: the checkpoint was trained against a different "
            "embedding vocabulary"
        )


@dataclass
class CohortRow:
    cohort: str
    n_tweets: int
    n_deputies: int
    avg_per_deputy: float
    pct_political: float
    n_political: int


@dataclass
class ClassifiedCorpus:
    labeled: list[LabeledTweet]
    political: list[Tweet]
    non_political: list[Tweet]
    cohort_table: list[CohortRow]


def classify_corpus(
    params: ModelParams,
    vocab: Vocabulary,
    embeddings: np.ndarray,
    tweets: Sequence[Tweet],
    deputies: dict[str, Deputy],
    settings: ModelSettings,
    threshold: float = 0.5,
    batch_size: int = 512,
) -> ClassifiedCorpus:
    """Predict a label for every tweet and split the corpus in two, with a
    per-cohort summary table (tweet volume, deputies, average per deputy,
    % political, political volume)."""
    if not tweets:
        raise ToolError("empty corpus")
    labeled: list[LabeledTweet] = []
    political: list[Tweet] = []
    non_political: list[Tweet] = []
    for start in range(0, len(tweets), batch_size):
        chunk = tweets[start : start + batch_size]
        idx = np.stack([encode_tweet(t, vocab, settings) for t in chunk])
        probs = np.atleast_1d(forward(params, idx, embeddings))
        for tweet, prob in zip(chunk, probs):
            label = Label.POLITICAL if prob >= threshold else Label.NON_POLITICAL
            labeled.append(LabeledTweet(tweet, label, LabelSource.PREDICTED))
            (political if label is Label.POLITICAL else non_political).append(tweet)

    by_cohort: dict[str, dict] = {}
    for item in labeled:
        deputy = deputies.get(item.tweet.deputy_id)
        if deputy is None:
            continue
        stats = by_cohort.setdefault(
            deputy.cohort.value, {"tweets": 0, "political": 0, "deputies": set()}
        )
        stats["tweets"] += 1
        stats["deputies"].add(deputy.id)
        if item.label is Label.POLITICAL:
            stats["political"] += 1

    table = []
    for cohort in ("reelected", "newcomer", "loser"):
        stats = by_cohort.get(cohort)
        if stats is None:
            continue
        n_dep = len(stats["deputies"])
        table.append(
            CohortRow(
                cohort=cohort,
                n_tweets=stats["tweets"],
                n_deputies=n_dep,
                avg_per_deputy=stats["tweets"] / n_dep if n_dep else 0.0,
                pct_political=100.0 * stats["political"] / stats["tweets"],
                n_political=stats["political"],
            )
        )
    return ClassifiedCorpus(labeled, political, non_political, table)


def cohort_table_csv_rows(table: Sequence[CohortRow]) -> list[list[str]]:
    return [
        [
            row.cohort,
            str(row.n_tweets),
            str(row.n_deputies),
            fmt_float(row.avg_per_deputy, 3),
            fmt_float(row.pct_political, 2),
            str(row.n_political),
        ]
        for row in table
    ]


def export_word_frequencies(
    tweets: Sequence[Tweet],
    date_from: date | None = None,
    date_to: date | None = None,
) -> list[tuple[str, int]]:
    """Token counts over the tweets inside the inclusive date range, sorted by
    count descending with lexicographic tie-break."""
    counts: dict[str, int] = {}
    for tweet in tweets:
        day = tweet.posted_at.date()
        if date_from is not None and day < date_from:
            continue
        if date_to is not None and day > date_to:
            continue
        for token in tweet.tokens:
            counts[token] = counts.get(token, 0) + 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


# ---------------------------------------------------------------------------
# experiment matrix
# ---------------------------------------------------------------------------

EmbeddingProvider = Callable[[], tuple[Vocabulary, np.ndarray]]


@dataclass
class MatrixCell:
    size: int = 2000
    sampling: str = "unbiased"
    model: str = "cnn"
    embedding: str = "corpus-cbow"

    def name(self) -> str:
        return f"size={self.size},sampling={self.sampling},model={self.model},embedding={self.embedding}"


@dataclass
class MatrixRow:
    cell: MatrixCell
    status: str  # "ok" | "failed"
    cv_mean: float | None = None
    test_f1: float | None = None
    resubstitution: float | None = None
    error: str = ""


@dataclass
class RunOutcome:
    params: ModelParams
    embeddings_used: np.ndarray
    train_ids: set[str]
    cv: CvResult | None
    test_f1: float | None
    draw: SampleDraw


def run_cell(
    train_pool: Sequence[Tweet],
    test_set: Sequence[Tweet],
    vocab: Vocabulary,
    embeddings: np.ndarray,
    settings: ModelSettings,
    train_config: TrainConfig,
    size: int,
    mode: SampleMode,
    seed: int,
    k_folds: int = 10,
    bias_months_k: int = 3,
    bias_deputies_k: int = 10,
    concentration: float = 0.5,
    with_cv: bool = True,
) -> RunOutcome:
    """One seeded end-to-end run: sample a labelled pool, cross-validate,
    train on the full sample and score the external test set."""
    hist = monthly_histogram(list(train_pool))
    plan = make_plan(
        hist, size, mode, seed,
        bias_months_k=bias_months_k,
        bias_deputies_k=bias_deputies_k,
        concentration=concentration,
    )
    draw = draw_sample(list(train_pool), plan)
    chosen = {i for ids in draw.ids_by_class.values() for i in ids}
    sample_tweets = [t for t in train_pool if t.id in chosen]
    examples = examples_from_tweets(sample_tweets, vocab, settings)

    dim = embeddings.shape[1]

    def make_params() -> ModelParams:
        return settings.build(np.random.default_rng(seed), dim)

    cv = None
    if with_cv:
        cv = kfold_cv(examples, embeddings, make_params, train_config, k=k_folds, seed=seed)

    result = train(make_params(), examples, embeddings, train_config)
    test_f1 = None
    if test_set:
        test_examples = examples_from_tweets(list(test_set), vocab, settings)
        report = evaluate_test(
            result.params, result.embeddings, test_examples,
            train_ids={ex.tweet_id for ex in examples},
        )
        test_f1 = report.overall_macro_f1
    return RunOutcome(
        params=result.params,
        embeddings_used=result.embeddings,
        train_ids={ex.tweet_id for ex in examples},
        cv=cv,
        test_f1=test_f1,
        draw=draw,
    )


def run_experiment_matrix(
    train_pool: Sequence[Tweet],
    test_set: Sequence[Tweet],
    cells: Sequence[MatrixCell],
    embedding_providers: dict[str, EmbeddingProvider],
    model_settings: dict[str, ModelSettings],
    train_config: TrainConfig,
    seed: int,
    k_folds: int = 10,
) -> list[MatrixRow]:
    """Run every cell; failures are recorded per row and do not stop the rest."""
    rows: list[MatrixRow] = []
    cache: dict[str, tuple[Vocabulary, np.ndarray]] = {}
    for cell in cells:
        try:
            if cell.embedding not in embedding_providers:
                raise ToolError(f"no embedding provider named '{cell.embedding}'")
            if cell.embedding not in cache:
                cache[cell.embedding] = embedding_providers[cell.embedding]()
            vocab, matrix = cache[cell.embedding]
            settings = model_settings.get(cell.model)
            if settings is None:
                raise ToolError(f"no model settings for kind '{cell.model}'")
            outcome = run_cell(
                train_pool, test_set, vocab, matrix, settings, train_config,
                size=cell.size, mode=SampleMode(cell.sampling), seed=seed,
                k_folds=k_folds,
            )
            rows.append(
                MatrixRow(
                    cell=cell,
                    status="ok",
                    cv_mean=outcome.cv.mean if outcome.cv else None,
                    test_f1=outcome.test_f1,
                    resubstitution=outcome.cv.resubstitution if outcome.cv else None,
                )
            )
        except Exception as exc:  # cell failures must not sink the matrix
            rows.append(MatrixRow(cell=cell, status="failed", error=str(exc)))
    return rows


def matrix_rows_csv(rows: Sequence[MatrixRow]) -> tuple[list[str], list[list[str]]]:
    header = [
        "size", "sampling", "model", "embedding", "status",
        "cv_macro_f1", "test_macro_f1", "resubstitution_macro_f1", "error",
    ]
    body = []
    for row in rows:
        body.append(
            [
                str(row.cell.size),
                row.cell.sampling,
                row.cell.model,
                row.cell.embedding,
                row.status,
                fmt_float(row.cv_mean) if row.cv_mean is not None else "",
                fmt_float(row.test_f1) if row.test_f1 is not None else "",
                fmt_float(row.resubstitution) if row.resubstitution is not None else "",
                row.error.replace(",", ";"),
            ]
        )
    return header, body


def matrix_rows_markdown(rows: Sequence[MatrixRow]) -> str:
    header, body = matrix_rows_csv(rows)
    lines = ["| " + " | ".join(header[:-1]) + " |", "| " + " | ".join(["---"] * (len(header) - 1)) + " |"]
    for fields_ in body:
        lines.append("| " + " | ".join(fields_[:-1]) + " |")
    return "\n".join(lines) + "\n"
