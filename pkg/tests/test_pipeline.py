from datetime import date

import numpy as np
import pytest

from politweets.config import ModelSettings
from politweets.corpus import Label
from politweets.embeddings import Vocabulary, random_embeddings
from politweets.io_utils import ToolError
from politweets.models import init_fasttext, save_checkpoint, load_checkpoint
from politweets.pipeline import (
    MatrixCell,
    classify_corpus,
    encode_tweet,
    examples_from_tweets,
    export_word_frequencies,
    matrix_rows_csv,
    require_vocab_match,
    run_experiment_matrix,
    split_holdout,
)
from politweets.corpus import Cohort, Deputy
from politweets.training import TrainConfig

from conftest import make_tweet


def _deputies():
    return {
        "dep001": Deputy("dep001", "@a", True, True, Cohort.REELECTED),
        "dep002": Deputy("dep002", "@b", True, False, Cohort.LOSER),
        "dep003": Deputy("dep003", "@c", False, True, Cohort.NEWCOMER),
    }


def _toy_world(n=60, seed=0):
    # vocabulary with a planted class direction so a linear model separates it
    rng = np.random.default_rng(seed)
    pol = [f"pol{i}" for i in range(10)]
    non = [f"cot{i}" for i in range(10)]
    vocab = Vocabulary(pol + non)
    emb = random_embeddings(vocab, 6, seed=seed)
    for w in pol:
        emb[vocab.index(w), 0] = 0.5
    for w in non:
        emb[vocab.index(w), 0] = -0.5
    tweets = []
    deputies = list(_deputies())
    for i in range(n):
        label = Label.POLITICAL if i % 2 else Label.NON_POLITICAL
        words = pol if i % 2 else non
        tokens = tuple(words[j] for j in rng.integers(0, 10, size=4))
        tweets.append(
            make_tweet(
                f"t{i:03d}",
                deputy_id=deputies[i % 3],
                posted_at=f"2014-{1 + i % 4:02d}-10T00:00:00+00:00",
                text=" ".join(tokens),
                tokens=tokens,
                label=label,
            )
        )
    return tweets, vocab, emb.astype(np.float32)


class TestEncodeAndExamples:
    def test_encode_tweet_obeys_settings(self):
        tweets, vocab, _ = _toy_world(4)
        settings = ModelSettings(kind="cnn", max_len=3, cnn_widths=(2, 5))
        out = encode_tweet(tweets[0], vocab, settings)
        assert len(out) == 5  # padded to the widest filter

    def test_unlabeled_tweet_rejected(self):
        tweets, vocab, _ = _toy_world(2)
        bare = make_tweet("x", tokens=("pol1",))
        with pytest.raises(ToolError):
            examples_from_tweets([bare], vocab, ModelSettings(kind="fasttext"))


class TestSplitHoldout:
    def test_stratified_and_disjoint(self):
        tweets, _, _ = _toy_world(100)
        pool, test = split_holdout(tweets, 0.2, seed=1)
        assert len(test) == 20
        assert len(pool) == 80
        assert not ({t.id for t in pool} & {t.id for t in test})
        assert sum(1 for t in test if t.label is Label.POLITICAL) == 10

    def test_deterministic(self):
        tweets, _, _ = _toy_world(50)
        a = split_holdout(tweets, 0.2, seed=3)
        b = split_holdout(tweets, 0.2, seed=3)
        assert [t.id for t in a[1]] == [t.id for t in b[1]]

    def test_bad_fraction(self):
        tweets, _, _ = _toy_world(10)
        with pytest.raises(ToolError):
            split_holdout(tweets, 1.5, seed=0)


def _trained(tweets, vocab, emb, seed=0):
    settings = ModelSettings(kind="fasttext", max_len=6)
    examples = examples_from_tweets(tweets, vocab, settings)
    from politweets.training import train

    params = init_fasttext(np.random.default_rng(seed), dim=emb.shape[1])
    result = train(params, examples, emb,
                   TrainConfig(epochs=15, batch_size=16, learning_rate=0.1, seed=seed))
    return result.params, settings


class TestClassifyCorpus:
    def test_partition_property(self):
        tweets, vocab, emb = _toy_world(60)
        params, settings = _trained(tweets, vocab, emb)
        classified = classify_corpus(params, vocab, emb, tweets, _deputies(), settings)
        assert len(classified.political) + len(classified.non_political) == len(tweets)
        assert len(classified.labeled) == len(tweets)
        ids = {t.id for t in classified.political} | {t.id for t in classified.non_political}
        assert len(ids) == len(tweets)

    def test_cohort_table_shape_and_consistency(self):
        tweets, vocab, emb = _toy_world(60)
        params, settings = _trained(tweets, vocab, emb)
        classified = classify_corpus(params, vocab, emb, tweets, _deputies(), settings)
        assert [row.cohort for row in classified.cohort_table] == [
            "reelected", "newcomer", "loser"
        ]
        total = sum(row.n_tweets for row in classified.cohort_table)
        assert total == len(tweets)
        for row in classified.cohort_table:
            assert 0.0 <= row.pct_political <= 100.0
            assert row.n_political <= row.n_tweets
            assert row.avg_per_deputy == pytest.approx(row.n_tweets / row.n_deputies)

    def test_accuracy_on_separable_corpus(self):
        tweets, vocab, emb = _toy_world(80)
        params, settings = _trained(tweets, vocab, emb)
        classified = classify_corpus(params, vocab, emb, tweets, _deputies(), settings)
        correct = sum(
            1 for item in classified.labeled if item.label is item.tweet.label
        )
        assert correct / len(tweets) >= 0.95

    def test_cohort_shares_track_ground_truth(self):
        # with a near-perfect model the predicted per-cohort % political must
        # sit within 2 points of the labelled ground truth
        tweets, vocab, emb = _toy_world(90)
        params, settings = _trained(tweets, vocab, emb)
        deputies = _deputies()
        classified = classify_corpus(params, vocab, emb, tweets, deputies, settings)
        truth = {}
        for t in tweets:
            cohort = deputies[t.deputy_id].cohort.value
            total, pol = truth.get(cohort, (0, 0))
            truth[cohort] = (total + 1, pol + (t.label is Label.POLITICAL))
        for row in classified.cohort_table:
            total, pol = truth[row.cohort]
            assert abs(row.pct_political - 100.0 * pol / total) <= 2.0

    def test_vocab_hash_guard(self, tmp_path):
        tweets, vocab, emb = _toy_world(10)
        params, settings = _trained(tweets, vocab, emb)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, vocab.sha256())
        checkpoint = load_checkpoint(path)
        require_vocab_match(checkpoint, vocab)  # same vocabulary passes
        other = Vocabulary(["totally", "different"])
        with pytest.raises(ToolError, match="vocabulary mismatch"):
            require_vocab_match(checkpoint, other)


class TestWordFrequencies:
    def test_counting_and_ordering(self):
        tweets = [
            make_tweet("a", tokens=("campanha", "voto")),
            make_tweet("b", tokens=("campanha",)),
            make_tweet("c", tokens=("campanha", "voto", "abc")),
        ]
        freqs = export_word_frequencies(tweets)
        assert freqs[0] == ("campanha", 3)
        assert freqs[1] == ("voto", 2)
        assert freqs[2] == ("abc", 1)

    def test_tie_broken_lexicographically(self):
        tweets = [make_tweet("a", tokens=("zz", "aa"))]
        assert export_word_frequencies(tweets) == [("aa", 1), ("zz", 1)]

    def test_date_range_inclusive(self):
        tweets = [
            make_tweet("a", posted_at="2014-07-01T00:00:00+00:00", tokens=("dentro",)),
            make_tweet("b", posted_at="2014-10-31T23:59:00+00:00", tokens=("dentro",)),
            make_tweet("c", posted_at="2014-11-01T00:00:00+00:00", tokens=("fora1",)),
        ]
        freqs = export_word_frequencies(tweets, date(2014, 7, 1), date(2014, 10, 31))
        assert freqs == [("dentro", 2)]

    def test_empty_selection(self):
        tweets = [make_tweet("a", tokens=("x1",))]
        assert export_word_frequencies(tweets, date(2020, 1, 1), date(2020, 2, 1)) == []


class TestExperimentMatrix:
    def test_rows_cover_cells_and_failures_recorded(self):
        tweets, vocab, emb = _toy_world(120)
        pool, test = split_holdout(tweets, 0.2, seed=0)
        cells = [
            MatrixCell(size=40, sampling="unbiased", model="fasttext", embedding="toy"),
            MatrixCell(size=40, sampling="unbiased", model="fasttext", embedding="missing"),
        ]
        rows = run_experiment_matrix(
            pool, test, cells,
            embedding_providers={"toy": lambda: (vocab, emb)},
            model_settings={"fasttext": ModelSettings(kind="fasttext", max_len=6)},
            train_config=TrainConfig(epochs=8, batch_size=16, learning_rate=0.1, seed=0),
            seed=0, k_folds=4,
        )
        assert [r.status for r in rows] == ["ok", "failed"]
        assert rows[0].cv_mean is not None and rows[0].test_f1 is not None
        assert "missing" in rows[1].error
        header, body = matrix_rows_csv(rows)
        assert len(body) == 2
        assert body[0][4] == "ok" and body[1][4] == "failed"

    def test_model_grid_yields_one_row_per_model(self):
        tweets, vocab, emb = _toy_world(120)
        pool, test = split_holdout(tweets, 0.2, seed=1)
        settings = {
            "cnn": ModelSettings(kind="cnn", max_len=6, cnn_widths=(2,),
                                 cnn_filters=4, cnn_dropout=0.0),
            "lstm": ModelSettings(kind="lstm", max_len=6, lstm_hidden=4),
            "fasttext": ModelSettings(kind="fasttext", max_len=6),
        }
        cells = [
            MatrixCell(size=40, sampling="unbiased", model=kind, embedding="toy")
            for kind in ("cnn", "lstm", "fasttext")
        ]
        rows = run_experiment_matrix(
            pool, test, cells,
            embedding_providers={"toy": lambda: (vocab, emb)},
            model_settings=settings,
            train_config=TrainConfig(epochs=4, batch_size=16, learning_rate=0.05, seed=1),
            seed=1, k_folds=4,
        )
        assert len(rows) == 3
        assert all(r.status == "ok" for r in rows)
