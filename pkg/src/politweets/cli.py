"""Command-line interface tying the pipeline together.

Subcommands: synth, ingest, sample, train-embeddings, train, evaluate,
bias-report, classify, wordcloud, btm (fit/report), matrix.  Every stochastic
subcommand takes --seed and produces byte-identical machine output for
identical inputs.  Failures exit nonzero with a structured JSON error on
stderr.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict
from datetime import date
from pathlib import Path

import click
import numpy as np

from . import btm as btm_mod
from . import figures
from . import synth as synth_mod
from .config import (
        embedding_config_from,
    load_toml,
    model_settings_from,
    train_config_from,
)
from .corpus import (
    Label,
    load_corpus_file,
    load_deputies,
    load_stopwords,
    prepare_corpus,
    tweet_from_record,
    tweet_to_record,
)
from .embeddings import (
    load_glove_text,
    load_word2vec_text,
    save_word2vec_text,
    train_embeddings,
)
from .evaluation import evaluate_test, groups_to_csv, kfold_cv
from .io_utils import ToolError, fmt_float, write_csv, write_json, write_jsonl
from .models import load_checkpoint, save_checkpoint
from .pipeline import (
    MatrixCell,
    classify_corpus,
    cohort_table_csv_rows,
    examples_from_tweets,
    export_word_frequencies,
    matrix_rows_csv,
    matrix_rows_markdown,
    require_vocab_match,
    run_experiment_matrix,
    split_holdout,
)
from .sampling import SampleMode, draw_sample, make_plan, monthly_histogram
from .training import history_to_csv, train

SIZE_MENU = (100, 500, 1000, 2000)


def _fail(message: str, kind: str = "error") -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    sys.exit(1)


def _load_embeddings(path: str, fmt: str, restrict_to: set[str] | None = None):
    if fmt == "word2vec":
        return load_word2vec_text(path, restrict_to)
    if fmt == "glove":
        return load_glove_text(path, restrict_to)
    raise ToolError(f"unknown embedding format '{fmt}'")


def _config_tables(config_path: str | None) -> dict:
    return load_toml(config_path) if config_path else {}


def _labeled_subset(tweets, plan_path: str | None):
    if plan_path is None:
        subset = [t for t in tweets if t.label is not None]
        if not subset:
            raise ToolError("corpus has no labelled tweets; pass --plan or label the corpus")
        return subset
    wanted: set[str] = set()
    with open(plan_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                wanted.add(str(json.loads(line)["tweet_id"]))
    subset = [t for t in tweets if t.id in wanted]
    missing = wanted - {t.id for t in subset}
    if missing:
        raise ToolError(f"plan references {len(missing)} ids absent from the corpus")
    unlabeled = sum(1 for t in subset if t.label is None)
    if unlabeled:
        raise ToolError(f"{unlabeled} planned tweets have no label yet")
    return subset


@click.group()
def cli() -> None:
    """Political-tweet classification and topic-model toolkit."""


@cli.command()
@click.option("--out-tweets", required=True, type=click.Path())
@click.option("--out-deputies", required=True, type=click.Path())
@click.option("--tweets", "n_tweets", default=8000, show_default=True)
@click.option("--deputies", "n_deputies", default=40, show_default=True)
@click.option("--start-month", default="2014-01", show_default=True)
@click.option("--months", "n_months", default=12, show_default=True)
@click.option("--overlap", default=0.3, show_default=True)
@click.option("--vocab-size", default=120, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(out_tweets, out_deputies, n_tweets, n_deputies, start_month, n_months,
          overlap, vocab_size, seed) -> None:
    """Generate a labelled synthetic corpus (tweets + deputies JSONL)."""
    corpus = synth_mod.generate(
        synth_mod.SynthConfig(
            n_tweets=n_tweets,
            n_deputies=n_deputies,
            start_month=start_month,
            n_months=n_months,
            overlap=overlap,
            vocab_size=vocab_size,
            seed=seed,
        )
    )
    synth_mod.write_corpus(corpus, out_tweets, out_deputies)
    click.echo(f"wrote {len(corpus.tweets)} tweets and {len(corpus.deputies)} deputies")


@cli.command()
@click.option("--tweets", "tweets_path", required=True, type=click.Path(exists=True))
@click.option("--deputies", "deputies_path", required=True, type=click.Path(exists=True))
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--errors", "errors_path", type=click.Path())
def ingest(tweets_path, deputies_path, stopwords_path, out, errors_path) -> None:
    """Parse raw files, normalise, dedupe and attach cohorts."""
    stopwords = load_stopwords(stopwords_path) if stopwords_path else None
    tweets, deputies, result = prepare_corpus(tweets_path, deputies_path, stopwords)
    write_jsonl(out, (tweet_to_record(t, deputies) for t in tweets))
    n_err = len(result.tweet_errors) + len(result.deputy_errors)
    if errors_path:
        write_jsonl(
            errors_path,
            [
                {"file": "deputies", "line": e.line, "reason": e.reason}
                for e in result.deputy_errors
            ]
            + [
                {"file": "tweets", "line": e.line, "reason": e.reason}
                for e in result.tweet_errors
            ],
        )
    click.echo(f"wrote {len(tweets)} tweets ({n_err} rejected lines)")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--size", type=click.Choice([str(s) for s in SIZE_MENU]), required=True)
@click.option("--mode", type=click.Choice([m.value for m in SampleMode]), default="unbiased",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--bias-months-k", default=3, show_default=True)
@click.option("--bias-deputies-k", default=10, show_default=True)
@click.option("--concentration", default=0.5, show_default=True)
def sample(corpus_path, size, mode, seed, out, bias_months_k, bias_deputies_k,
           concentration) -> None:
    """Draw a labelling pool that mimics (or deliberately skews) the monthly
    tweet distribution."""
    tweets = load_corpus_file(corpus_path)
    hist = monthly_histogram(tweets)
    plan = make_plan(
        hist, int(size), SampleMode(mode), seed,
        bias_months_k=bias_months_k, bias_deputies_k=bias_deputies_k,
        concentration=concentration,
    )
    draw = draw_sample(tweets, plan)
    rows = []
    for cls in sorted(draw.ids_by_class, key=lambda c: (c is None, c.value if c else "")):
        for tweet_id in draw.ids_by_class[cls]:
            rows.append({"tweet_id": tweet_id, "class": cls.value if cls else None})
    write_jsonl(out, rows)
    for warning in draw.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"wrote {len(rows)} sampled ids")


@cli.command("train-embeddings")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["cbow", "skipgram"]), default="cbow",
              show_default=True)
@click.option("--dim", type=int, default=None)
@click.option("--window", type=int, default=None)
@click.option("--negatives", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--min-count", type=int, default=None)
@click.option("--lr", "learning_rate", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def train_embeddings_cmd(corpus_path, mode, dim, window, negatives, epochs, min_count,
                         learning_rate, seed, config_path, out) -> None:
    """Train C-BoW or Skip-Gram vectors on the corpus; word2vec text output."""
    tables = _config_tables(config_path)
    config = embedding_config_from(
        tables.get("embedding", {}),
        {
            "mode": mode,
            "dim": dim,
            "window": window,
            "negatives": negatives,
            "epochs": epochs,
            "min_count": min_count,
            "learning_rate": learning_rate,
            "seed": seed,
        },
    )
    tweets = load_corpus_file(corpus_path)
    docs = [list(t.tokens) for t in tweets if t.tokens]
    vocab, matrix = train_embeddings(docs, config)
    save_word2vec_text(out, vocab, matrix)
    click.echo(f"trained {len(vocab)} x {matrix.shape[1]} vectors on {len(docs)} documents")


def _model_flags(fn):
    fn = click.option("--model", "model_kind", type=click.Choice(["cnn", "lstm", "fasttext"]),
                      default=None)(fn)
    fn = click.option("--max-len", type=int, default=None)(fn)
    fn = click.option("--embeddings", "embeddings_path", required=True,
                      type=click.Path(exists=True))(fn)
    fn = click.option("--embedding-format", type=click.Choice(["word2vec", "glove"]),
                      default="word2vec", show_default=True)(fn)
    fn = click.option("--config", "config_path", type=click.Path(exists=True))(fn)
    return fn


def _train_flags(fn):
    fn = click.option("--epochs", type=int, default=None)(fn)
    fn = click.option("--batch-size", type=int, default=None)(fn)
    fn = click.option("--lr", "learning_rate", type=float, default=None)(fn)
    fn = click.option("--fine-tune", "fine_tune", is_flag=True, default=None)(fn)
    return fn


def _build_settings_and_config(tables, model_kind, max_len, epochs, batch_size,
                               learning_rate, fine_tune, seed):
    settings = model_settings_from(
        tables.get("model", {}), {"kind": model_kind, "max_len": max_len}
    )
    train_config = train_config_from(
        tables.get("training", {}),
        {
            "epochs": epochs,
            "batch_size": batch_size,
            "learning_rate": learning_rate,
            "fine_tune_embeddings": fine_tune,
            "seed": seed,
        },
    )
    return settings, train_config


@cli.command("train")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", type=click.Path(exists=True))
@_model_flags
@_train_flags
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--history", "history_path", type=click.Path())
@click.option("--out-embeddings", "out_embeddings", type=click.Path(),
              help="Where to write fine-tuned vectors (required with --fine-tune).")
@click.option("--figures", "figures_dir", type=click.Path())
def train_cmd(corpus_path, plan_path, model_kind, max_len, embeddings_path,
              embedding_format, config_path, epochs, batch_size, learning_rate,
              fine_tune, seed, out, history_path, out_embeddings, figures_dir) -> None:
    """Train one classifier on a labelled sample and save a checkpoint."""
    tables = _config_tables(config_path)
    settings, train_config = _build_settings_and_config(
        tables, model_kind, max_len, epochs, batch_size, learning_rate, fine_tune, seed
    )
    if train_config.fine_tune_embeddings and not out_embeddings:
        raise ToolError("--fine-tune updates the embedding matrix; pass --out-embeddings")

    tweets = load_corpus_file(corpus_path)
    subset = _labeled_subset(tweets, plan_path)
    vocab, matrix = _load_embeddings(embeddings_path, embedding_format)
    examples = examples_from_tweets(subset, vocab, settings)
    params = settings.build(np.random.default_rng(seed), matrix.shape[1])
    result = train(params, examples, matrix.astype(np.float32), train_config)

    save_checkpoint(
        out, result.params, vocab.sha256(),
        extra={"settings": asdict(settings), "training": asdict(train_config)},
    )
    if history_path:
        history_to_csv(history_path, result.loss_history)
    if train_config.fine_tune_embeddings:
        save_word2vec_text(out_embeddings, vocab, result.embeddings)
    if figures_dir:
        figures.plot_loss_history(result.loss_history, Path(figures_dir) / "loss_history.png")
    click.echo(
        f"trained {settings.kind} on {len(examples)} examples; "
        f"final loss {result.loss_history[-1]:.6f}"
    )


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", type=click.Path(exists=True))
@_model_flags
@_train_flags
@click.option("--folds", default=10, show_default=True)
@click.option("--test", "test_path", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--md", "md_path", type=click.Path())
@click.option("--csv-dir", "csv_dir", type=click.Path())
@click.option("--min-group-size", default=5, show_default=True)
@click.option("--figures", "figures_dir", type=click.Path())
def evaluate(corpus_path, plan_path, model_kind, max_len, embeddings_path,
             embedding_format, config_path, epochs, batch_size, learning_rate,
             fine_tune, folds, test_path, seed, out, md_path, csv_dir,
             min_group_size, figures_dir) -> None:
    """k-fold cross-validation on the labelled sample, plus external-test
    scoring with per-deputy / per-month breakdowns."""
    tables = _config_tables(config_path)
    settings, train_config = _build_settings_and_config(
        tables, model_kind, max_len, epochs, batch_size, learning_rate, fine_tune, seed
    )
    tweets = load_corpus_file(corpus_path)
    subset = _labeled_subset(tweets, plan_path)
    vocab, matrix = _load_embeddings(embeddings_path, embedding_format)
    matrix32 = matrix.astype(np.float32)
    examples = examples_from_tweets(subset, vocab, settings)

    def make_params():
        return settings.build(np.random.default_rng(seed), matrix.shape[1])

    cv = kfold_cv(examples, matrix32, make_params, train_config, k=folds, seed=seed)

    report = None
    if test_path:
        test_tweets = [t for t in load_corpus_file(test_path) if t.label is not None]
        test_examples = examples_from_tweets(test_tweets, vocab, settings)
        full = train(make_params(), examples, matrix32, train_config)
        report = evaluate_test(
            full.params, full.embeddings, test_examples,
            train_ids={ex.tweet_id for ex in examples},
            min_group_size=min_group_size,
        )
        report.fold_scores = cv.fold_scores
        report.cv_mean = cv.mean
        report.resubstitution = cv.resubstitution
        payload = report.to_dict()
    else:
        payload = {
            "fold_scores": [round(s, 6) for s in cv.fold_scores],
            "cv_mean_macro_f1": round(cv.mean, 6),
            "resubstitution_macro_f1": round(cv.resubstitution, 6),
        }

    write_json(out, payload)
    if md_path and report is not None:
        Path(md_path).write_text(report.to_markdown(), encoding="utf-8")
    if csv_dir and report is not None:
        csv_dir = Path(csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        groups_to_csv(csv_dir / "by_deputy.csv", report.by_deputy)
        groups_to_csv(csv_dir / "by_month.csv", report.by_month)
    if figures_dir and report is not None:
        figures.plot_group_scores(
            {"deputy": report.by_deputy, "month": report.by_month},
            Path(figures_dir) / "group_scores.png",
        )
    click.echo(f"cv mean macro F1 {cv.mean:.4f}"
               + (f", test macro F1 {report.overall_macro_f1:.4f}" if report else ""))


@cli.command("bias-report")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--embedding-format", type=click.Choice(["word2vec", "glove"]),
              default="word2vec", show_default=True)
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--csv-dir", "csv_dir", type=click.Path())
@click.option("--md", "md_path", type=click.Path())
@click.option("--min-group-size", default=5, show_default=True)
@click.option("--figures", "figures_dir", type=click.Path())
def bias_report(model_path, embeddings_path, embedding_format, test_path, out,
                csv_dir, md_path, min_group_size, figures_dir) -> None:
    """Per-deputy and per-month Macro F1 of a trained model on a labelled set."""
    checkpoint = load_checkpoint(model_path)
    vocab, matrix = _load_embeddings(embeddings_path, embedding_format)
    require_vocab_match(checkpoint, vocab)
    settings = model_settings_from(checkpoint.meta.get("extra", {}).get("settings", {}))
    test_tweets = [t for t in load_corpus_file(test_path) if t.label is not None]
    if not test_tweets:
        raise ToolError("test corpus has no labelled tweets")
    test_examples = examples_from_tweets(test_tweets, vocab, settings)
    report = evaluate_test(
        checkpoint.params, matrix.astype(np.float32), test_examples,
        min_group_size=min_group_size,
    )
    write_json(out, report.to_dict())
    if md_path:
        Path(md_path).write_text(report.to_markdown(), encoding="utf-8")
    if csv_dir:
        csv_dir = Path(csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        groups_to_csv(csv_dir / "by_deputy.csv", report.by_deputy)
        groups_to_csv(csv_dir / "by_month.csv", report.by_month)
    if figures_dir:
        figures.plot_group_scores(
            {"deputy": report.by_deputy, "month": report.by_month},
            Path(figures_dir) / "group_scores.png",
        )
    click.echo(
        f"test macro F1 {report.overall_macro_f1:.4f}; deputy median "
        f"{report.by_deputy.median:.4f}, month median {report.by_month.median:.4f}"
    )


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--embedding-format", type=click.Choice(["word2vec", "glove"]),
              default="word2vec", show_default=True)
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--deputies", "deputies_path", required=True, type=click.Path(exists=True))
@click.option("--out-political", required=True, type=click.Path())
@click.option("--out-nonpolitical", required=True, type=click.Path())
@click.option("--out-all", "out_all", type=click.Path())
@click.option("--summary", "summary_path", type=click.Path())
@click.option("--threshold", default=0.5, show_default=True)
def classify(model_path, embeddings_path, embedding_format, corpus_path, deputies_path,
             out_political, out_nonpolitical, out_all, summary_path, threshold) -> None:
    """Split the whole corpus into predicted political / non-political files."""
    checkpoint = load_checkpoint(model_path)
    vocab, matrix = _load_embeddings(embeddings_path, embedding_format)
    require_vocab_match(checkpoint, vocab)
    settings = model_settings_from(checkpoint.meta.get("extra", {}).get("settings", {}))
    tweets = load_corpus_file(corpus_path)
    deputies, _ = load_deputies(deputies_path)

    classified = classify_corpus(
        checkpoint.params, vocab, matrix.astype(np.float32), tweets, deputies,
        settings, threshold,
    )

    def record(item):
        rec = tweet_to_record(item.tweet, deputies)
        rec["predicted_label"] = item.label.value
        return rec

    write_jsonl(out_political, (record(i) for i in classified.labeled
                                if i.label is Label.POLITICAL))
    write_jsonl(out_nonpolitical, (record(i) for i in classified.labeled
                                   if i.label is Label.NON_POLITICAL))
    if out_all:
        write_jsonl(out_all, (record(i) for i in classified.labeled))
    if summary_path:
        write_csv(
            summary_path,
            ["cohort", "tweets", "deputies", "avg_per_deputy", "pct_political", "political"],
            cohort_table_csv_rows(classified.cohort_table),
        )
    click.echo(
        f"{len(classified.political)} political / {len(classified.non_political)} "
        f"non-political tweets"
    )


@cli.command()
@click.option("--classified", "classified_path", required=True, type=click.Path(exists=True))
@click.option("--class", "class_filter", type=click.Choice([l.value for l in Label]))
@click.option("--from", "date_from", default="2014-07-01", show_default=True,
              help="Inclusive start date (election-period default).")
@click.option("--to", "date_to", default="2014-10-31", show_default=True,
              help="Inclusive end date (election-period default).")
@click.option("--out", required=True, type=click.Path())
@click.option("--top", type=int, default=None, help="Keep only the top-N rows.")
@click.option("--figures", "figures_dir", type=click.Path())
def wordcloud(classified_path, class_filter, date_from, date_to, out, top,
              figures_dir) -> None:
    """Export word frequencies (CSV) for word-cloud rendering."""
    rows = []
    with open(classified_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    if class_filter:
        rows = [r for r in rows if r.get("predicted_label") == class_filter
                or r.get("label") == class_filter]
    tweets = [tweet_from_record(r) for r in rows]
    freqs = export_word_frequencies(
        tweets, date.fromisoformat(date_from), date.fromisoformat(date_to)
    )
    if top is not None:
        freqs = freqs[:top]
    write_csv(out, ["token", "count"], freqs)
    if not freqs:
        click.echo("warning: empty selection, header-only CSV written", err=True)
    if figures_dir:
        figures.plot_word_frequencies(
            freqs, Path(figures_dir) / "word_frequencies.png",
            title=f"Most frequent words ({class_filter or 'all'})",
        )
    click.echo(f"wrote {len(freqs)} token counts")


@cli.group()
def btm() -> None:
    """Biterm topic model subcommands."""


@btm.command("fit")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--k", default=10, show_default=True)
@click.option("--alpha", type=float, default=None, help="Topic prior; defaults to 50/K.")
@click.option("--beta", default=0.005, show_default=True)
@click.option("--iters", "iterations", default=1000, show_default=True)
@click.option("--window", type=int, default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def btm_fit(corpus_path, k, alpha, beta, iterations, window, seed, out) -> None:
    """Fit the biterm topic model on a (sub)corpus."""
    tweets = load_corpus_file(corpus_path)
    docs = [list(t.tokens) for t in tweets if len(t.tokens) >= 2]
    config = btm_mod.BtmConfig(
        k=k, alpha=alpha, beta=beta, iterations=iterations, seed=seed, window=window
    )
    model, sampler = btm_mod.gibbs_fit(docs, config)
    btm_mod.save_model(out, model)
    click.echo(
        f"fitted {k} topics on {len(sampler.biterms)} biterms "
        f"({len(docs)} documents, vocabulary {len(model.vocab)})"
    )


@btm.command("report")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--top", default=5, show_default=True)
@click.option("--shares", is_flag=True, help="Attribute documents and report topic shares.")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True),
              help="Corpus to attribute when --shares is set.")
@click.option("--out", "md_path", required=True, type=click.Path())
@click.option("--csv", "csv_path", type=click.Path())
@click.option("--figures", "figures_dir", type=click.Path())
def btm_report(model_path, top, shares, corpus_path, md_path, csv_path, figures_dir) -> None:
    """Emit the top-words-per-topic table (plus optional document shares)."""
    model = btm_mod.load_model(model_path)
    share_exact = share_display = None
    if shares:
        if not corpus_path:
            raise ToolError("--shares needs --corpus to attribute documents")
        tweets = load_corpus_file(corpus_path)
        docs = [list(t.tokens) for t in tweets]
        share_exact, share_display = btm_mod.corpus_topic_shares(model, docs)

    header = ["topic", "top_words"] + (["pct_tweets", "pct_tweets_exact"] if shares else [])
    lines = ["| # | top words |" + (" % tweets |" if shares else ""),
             "| --- | --- |" + (" --- |" if shares else "")]
    csv_rows = []
    for z in range(model.k):
        words = " ".join(w for w, _ in model.top_words(z, top))
        md_row = f"| {z + 1} | {words} |"
        csv_row = [str(z + 1), words]
        if shares:
            md_row += f" {share_display[z]} |"
            csv_row += [str(share_display[z]), fmt_float(share_exact[z])]
        lines.append(md_row)
        csv_rows.append(csv_row)
    Path(md_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if csv_path:
        write_csv(csv_path, header, csv_rows)
    if figures_dir and shares:
        figures.plot_topic_shares(share_exact, Path(figures_dir) / "topic_shares.png")
    click.echo(f"wrote report for {model.k} topics")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--grid", "grid_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--md", "md_path", type=click.Path())
@click.option("--figures", "figures_dir", type=click.Path())
def matrix(corpus_path, grid_path, seed, out, md_path, figures_dir) -> None:
    """Run the meta-parameter experiment grid; one CSV row per cell."""
    tables = load_toml(grid_path)
    grid = tables.get("grid", {})
    sizes = [int(s) for s in grid.get("sizes", [2000])]
    modes = list(grid.get("modes", ["unbiased"]))
    model_kinds = list(grid.get("models", ["cnn"]))
    embedding_names = list(grid.get("embeddings", ["corpus-cbow"]))
    matrix_opts = tables.get("matrix", {})
    test_frac = float(matrix_opts.get("test_frac", 0.2))
    k_folds = int(matrix_opts.get("k_folds", 10))

    train_config = train_config_from(tables.get("training", {}), {"seed": seed})
    model_settings = {}
    for kind in model_kinds:
        kind_table = dict(tables.get("model", {}).get(kind, {}))
        kind_table["kind"] = kind
        model_settings[kind] = model_settings_from(kind_table)

    tweets = load_corpus_file(corpus_path)
    train_pool, test_set = split_holdout(tweets, test_frac, seed)
    docs = [list(t.tokens) for t in tweets if t.tokens]

    def corpus_provider(mode: str):
        def provide():
            config = embedding_config_from(tables.get("embedding", {}), {"mode": mode, "seed": seed})
            return train_embeddings(docs, config)

        return provide

    def random_provider():
        from .embeddings import random_embeddings, vocabulary_from_documents

        dim = int(tables.get("embedding", {}).get("dim", 300))
        vocab = vocabulary_from_documents(docs)
        return vocab, random_embeddings(vocab, dim, seed)

    providers = {
        "corpus-cbow": corpus_provider("cbow"),
        "corpus-skipgram": corpus_provider("skipgram"),
        "random": random_provider,
    }
    for name, spec in dict(tables.get("embedding_files", {})).items():
        fmt, _, path = str(spec).partition(":")
        if fmt not in ("word2vec", "glove") or not path:
            raise ToolError(
                f"embedding_files.{name} must look like 'word2vec:/path' or 'glove:/path'"
            )
        providers[name] = lambda fmt=fmt, path=path: _load_embeddings(path, fmt)

    cells = [
        MatrixCell(size=size, sampling=mode, model=kind, embedding=emb)
        for size in sizes
        for mode in modes
        for kind in model_kinds
        for emb in embedding_names
    ]
    rows = run_experiment_matrix(
        train_pool, test_set, cells, providers, model_settings, train_config,
        seed=seed, k_folds=k_folds,
    )
    header, body = matrix_rows_csv(rows)
    write_csv(out, header, body)
    if md_path:
        Path(md_path).write_text(matrix_rows_markdown(rows), encoding="utf-8")
    if figures_dir:
        for dimension, values in (
            ("size", sizes), ("sampling", modes), ("model", model_kinds),
            ("embedding", embedding_names),
        ):
            if len(values) > 1:
                figures.plot_matrix_bars(
                    rows, dimension, Path(figures_dir) / f"by_{dimension}.png"
                )
    n_failed = sum(1 for r in rows if r.status == "failed")
    click.echo(f"ran {len(rows)} cells ({n_failed} failed)")


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        _fail(exc.format_message(), kind="usage")
    except click.exceptions.Abort:
        sys.exit(130)
    except ToolError as exc:
        _fail(str(exc), kind="tool")
    except FileNotFoundError as exc:
        _fail(str(exc), kind="io")
    except Exception as exc:  # structured errors for anything unexpected
        _fail(f"{type(exc).__name__}: {exc}", kind="internal")


if __name__ == "__main__":
    main()
