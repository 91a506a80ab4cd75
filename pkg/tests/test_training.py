import math

import numpy as np
import pytest

from politweets.embeddings import PAD_INDEX
from politweets.io_utils import ToolError
from politweets.models import (
    init_cnn,
    init_fasttext,
    init_lstm,
    param_arrays,
)
from politweets.training import (
    EMBEDDING_GRAD_KEY,
    LabeledExample,
    RmspropState,
    TrainConfig,
    backward,
    bce_loss,
    gradient_check,
    history_to_csv,
    rmsprop_step,
    train,
)


def _embeddings(rows=20, dim=6, seed=0, dtype=np.float64):
    rng = np.random.default_rng(seed)
    emb = rng.uniform(-0.5, 0.5, (rows, dim)).astype(dtype)
    emb[PAD_INDEX] = 0.0
    return emb


class TestBceLoss:
    def test_perfect_prediction_clipped(self):
        assert bce_loss(1.0, 1) <= 1.2e-7
        assert bce_loss(0.0, 0) <= 1.2e-7

    def test_half_is_ln2(self):
        assert bce_loss(0.5, 1) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_point_nine(self):
        # -ln 0.9 computed by hand
        assert bce_loss(0.9, 1) == pytest.approx(0.10536051565782628, abs=1e-12)

    def test_nonnegative_and_clip_band(self):
        rng = np.random.default_rng(2)
        probs = rng.random(1000)
        losses = bce_loss(probs, rng.integers(0, 2, size=1000))
        assert np.all(losses >= 0.0)
        assert np.all(losses <= -math.log(1e-7) + 1e-9)


class TestRmsprop:
    def test_hand_computed_step(self):
        # g=2, cache=0, rho=0.9, lr=0.001, eps=1e-8:
        # cache -> 0.4, delta = -0.001 * 2 / sqrt(0.4 + 1e-8)
        arrays = {"w": np.array([1.0])}
        grads = {"w": np.array([2.0])}
        state = RmspropState()
        config = TrainConfig(learning_rate=0.001, rho=0.9, epsilon=1e-8)
        rmsprop_step(arrays, grads, state, config)
        assert state.cache["w"][0] == pytest.approx(0.4, abs=1e-15)
        expected = 1.0 - 0.001 * 2.0 / math.sqrt(0.4 + 1e-8)
        assert arrays["w"][0] == pytest.approx(expected, abs=1e-12)
        assert arrays["w"][0] == pytest.approx(1.0 - 0.00316228, abs=1e-7)

    def test_zero_gradient_decays_cache_only(self):
        arrays = {"w": np.array([1.5])}
        state = RmspropState()
        state.cache["w"] = np.array([0.8])
        config = TrainConfig(learning_rate=0.01, rho=0.9)
        rmsprop_step(arrays, {"w": np.array([0.0])}, state, config)
        assert arrays["w"][0] == 1.5
        assert state.cache["w"][0] == pytest.approx(0.72)

    def test_second_identical_step_smaller(self):
        config = TrainConfig(learning_rate=0.01, rho=0.9)
        arrays = {"w": np.array([0.0])}
        state = RmspropState()
        rmsprop_step(arrays, {"w": np.array([1.0])}, state, config)
        first = abs(arrays["w"][0])
        before = arrays["w"][0]
        rmsprop_step(arrays, {"w": np.array([1.0])}, state, config)
        second = abs(arrays["w"][0] - before)
        assert second < first

    def test_cache_stays_nonnegative(self):
        rng = np.random.default_rng(0)
        arrays = {"w": rng.normal(size=8)}
        state = RmspropState()
        config = TrainConfig()
        for _ in range(50):
            rmsprop_step(arrays, {"w": rng.normal(size=8)}, state, config)
            assert np.all(state.cache["w"] >= 0.0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ToolError):
            rmsprop_step(
                {"w": np.zeros(3)}, {"w": np.zeros(4)}, RmspropState(), TrainConfig()
            )


class TestBackward:
    def test_logistic_identity_single_example(self):
        # FastText on one token is a logistic model: dL/dw = (p - y) * x
        emb = _embeddings()
        params = init_fasttext(np.random.default_rng(1), dim=6, dtype=np.float64)
        idx = np.array([[4, PAD_INDEX]])
        y = np.array([1.0])
        grads, probs = backward(params, idx, y, emb)
        p = float(probs[0])
        np.testing.assert_allclose(grads["w"], (p - 1.0) * emb[4], atol=1e-12)
        np.testing.assert_allclose(grads["b"], p - 1.0, atol=1e-12)

    def test_duplicated_example_same_gradient(self):
        emb = _embeddings()
        params = init_cnn(np.random.default_rng(2), dim=6, widths=(2,), filters=3,
                          dropout=0.0, dtype=np.float64)
        one = np.array([[2, 3, 4, 5]])
        two = np.array([[2, 3, 4, 5], [2, 3, 4, 5]])
        g1, _ = backward(params, one, np.array([1.0]), emb)
        g2, _ = backward(params, two, np.array([1.0, 1.0]), emb)
        for name in g1:
            np.testing.assert_allclose(g2[name], g1[name], atol=1e-12)

    def test_pad_embedding_row_gets_zero_gradient(self):
        emb = _embeddings()
        for params in (
            init_fasttext(np.random.default_rng(0), dim=6, dtype=np.float64),
            init_lstm(np.random.default_rng(0), dim=6, hidden=3, dtype=np.float64),
            init_cnn(np.random.default_rng(0), dim=6, widths=(2,), filters=3,
                     dropout=0.0, dtype=np.float64),
        ):
            grads, _ = backward(
                params, np.array([[2, 3, PAD_INDEX, PAD_INDEX]]), np.array([1.0]),
                emb, want_embedding_grads=True,
            )
            assert np.all(grads[EMBEDDING_GRAD_KEY][PAD_INDEX] == 0.0)


class TestGradientCheck:
    def test_fasttext_tight(self):
        emb = _embeddings(seed=3)
        params = init_fasttext(np.random.default_rng(3), dim=6, dtype=np.float64)
        idx = np.array([[2, 5, 9, PAD_INDEX], [3, 4, PAD_INDEX, PAD_INDEX]])
        err = gradient_check(params, idx, np.array([1.0, 0.0]), emb)
        assert err < 1e-6

    def test_cnn_with_dropout_disabled(self):
        emb = _embeddings(seed=4)
        params = init_cnn(np.random.default_rng(4), dim=6, widths=(2, 3), filters=4,
                          dropout=0.0, dtype=np.float64)
        idx = np.array([[2, 7, 5, 11, 3], [8, 9, 10, PAD_INDEX, PAD_INDEX]])
        err = gradient_check(params, idx, np.array([0.0, 1.0]), emb)
        assert err < 1e-4

    def test_lstm(self):
        emb = _embeddings(seed=5)
        params = init_lstm(np.random.default_rng(5), dim=6, hidden=4, dtype=np.float64)
        idx = np.array([[2, 7, 5, PAD_INDEX], [8, 9, 10, 11]])
        err = gradient_check(params, idx, np.array([1.0, 0.0]), emb)
        assert err < 1e-4

    def test_fasttext_with_bigram_buckets(self):
        emb = _embeddings(seed=6)
        params = init_fasttext(np.random.default_rng(6), dim=6, bigram_buckets=8,
                               dtype=np.float64)
        idx = np.array([[2, 5, 9, PAD_INDEX]])
        err = gradient_check(params, idx, np.array([1.0]), emb)
        assert err < 1e-6

    def test_embedding_gradients_when_fine_tuning(self):
        emb = _embeddings(seed=7)
        params = init_lstm(np.random.default_rng(7), dim=6, hidden=3, dtype=np.float64)
        idx = np.array([[2, 3, 4, PAD_INDEX]])
        err = gradient_check(params, idx, np.array([1.0]), emb, include_embeddings=True)
        assert err < 1e-4

    def test_dropout_rejected_as_stochastic(self):
        emb = _embeddings()
        params = init_cnn(np.random.default_rng(0), dim=6, widths=(2,), filters=3,
                          dropout=0.5, dtype=np.float64)
        with pytest.raises(ToolError, match="stochastic forward"):
            gradient_check(params, np.array([[2, 3, 4]]), np.array([1.0]), emb)

    def test_coordinate_subset_is_seeded(self):
        emb = _embeddings(seed=8)
        params = init_lstm(np.random.default_rng(8), dim=6, hidden=4, dtype=np.float64)
        idx = np.array([[2, 3, 4, 5]])
        a = gradient_check(params, idx, np.array([1.0]), emb, max_coords=25, seed=1)
        b = gradient_check(params, idx, np.array([1.0]), emb, max_coords=25, seed=1)
        assert a == b


def _separable_examples(n=120, dim=8, seed=0):
    # linearly separable by construction: embedding coordinate 0 carries the
    # class sign, the remaining coordinates are noise
    rng = np.random.default_rng(seed)
    emb = rng.uniform(-0.2, 0.2, (40, dim))
    emb[2:21, 0] = 0.6
    emb[21:40, 0] = -0.6
    emb[PAD_INDEX] = 0.0
    examples = []
    for i in range(n):
        y = i % 2
        tokens = rng.integers(2, 21, size=5) if y else rng.integers(21, 40, size=5)
        idx = np.full(6, PAD_INDEX, dtype=np.int64)
        idx[:5] = tokens
        examples.append(LabeledExample(f"t{i}", idx, y))
    return examples, emb.astype(np.float32)


class TestTrain:
    def test_separable_fasttext_converges(self):
        examples, emb = _separable_examples()
        params = init_fasttext(np.random.default_rng(1), dim=8)
        config = TrainConfig(epochs=20, batch_size=16, learning_rate=0.1, seed=2)
        result = train(params, examples, emb, config)
        assert result.loss_history[-1] < 0.1
        assert len(result.loss_history) == 20

    def test_same_seed_identical_history(self):
        examples, emb = _separable_examples()
        config = TrainConfig(epochs=5, batch_size=16, learning_rate=0.05, seed=7)
        r1 = train(init_fasttext(np.random.default_rng(1), dim=8), examples, emb, config)
        r2 = train(init_fasttext(np.random.default_rng(1), dim=8), examples, emb, config)
        assert r1.loss_history == r2.loss_history
        np.testing.assert_array_equal(r1.params.w, r2.params.w)

    def test_zero_learning_rate_is_identity(self):
        examples, emb = _separable_examples()
        params = init_fasttext(np.random.default_rng(1), dim=8)
        before = {k: v.copy() for k, v in param_arrays(params).items()}
        config = TrainConfig(epochs=3, batch_size=16, learning_rate=0.0, seed=1)
        result = train(params, examples, emb, config)
        for name, arr in param_arrays(result.params).items():
            np.testing.assert_array_equal(arr, before[name])
        assert max(result.loss_history) - min(result.loss_history) < 1e-12

    def test_single_class_rejected(self):
        examples, emb = _separable_examples()
        ones = [ex for ex in examples if ex.y == 1]
        with pytest.raises(ToolError):
            train(init_fasttext(np.random.default_rng(0), dim=8), ones, emb, TrainConfig())

    def test_empty_rejected(self):
        _, emb = _separable_examples()
        with pytest.raises(ToolError):
            train(init_fasttext(np.random.default_rng(0), dim=8), [], emb, TrainConfig())

    def test_loss_decreases_over_first_steps(self):
        # frozen batch: loss strictly decreases over the first 5 RMSProp steps
        # (one non-decreasing step tolerated)
        examples, emb = _separable_examples(n=32)
        params = init_fasttext(np.random.default_rng(3), dim=8)
        config = TrainConfig(epochs=5, batch_size=32, learning_rate=0.05, seed=3,
                             shuffle=False)
        result = train(params, examples, emb, config)
        increases = sum(
            1 for a, b in zip(result.loss_history, result.loss_history[1:]) if b >= a
        )
        assert increases <= 1

    def test_fine_tune_keeps_pad_zero_and_input_matrix_untouched(self):
        examples, emb = _separable_examples()
        original = emb.copy()
        params = init_fasttext(np.random.default_rng(1), dim=8)
        config = TrainConfig(epochs=3, batch_size=16, learning_rate=0.05, seed=1,
                             fine_tune_embeddings=True)
        result = train(params, examples, emb, config)
        np.testing.assert_array_equal(emb, original)  # caller's matrix untouched
        assert np.all(result.embeddings[PAD_INDEX] == 0.0)
        assert not np.array_equal(result.embeddings, original)

    def test_cnn_and_lstm_train_end_to_end(self):
        examples, emb = _separable_examples(n=64)
        cnn = init_cnn(np.random.default_rng(2), dim=8, widths=(2,), filters=8,
                       dropout=0.5)
        lstm = init_lstm(np.random.default_rng(2), dim=8, hidden=8)
        for params in (cnn, lstm):
            config = TrainConfig(epochs=6, batch_size=16, learning_rate=0.01, seed=4)
            result = train(params, examples, emb, config)
            assert result.loss_history[-1] < result.loss_history[0]


def test_history_csv(tmp_path):
    path = tmp_path / "hist.csv"
    history_to_csv(path, [0.5, 0.25])
    assert path.read_text().splitlines() == [
        "epoch,mean_loss", "1,0.500000", "2,0.250000"
    ]
