import numpy as np
import pytest

from politweets.embeddings import (
    PAD_INDEX,
    UNK_INDEX,
    EmbeddingMode,
    EmbeddingTrainConfig,
    Vocabulary,
    decode,
    encode,
    load_glove_text,
    load_word2vec_text,
    random_embeddings,
    save_word2vec_text,
    train_embeddings,
    vocabulary_from_documents,
)
from politweets.io_utils import ToolError


class TestVocabulary:
    def test_reserved_indices(self):
        vocab = Vocabulary(["casa", "voto"])
        assert vocab.index("<pad>") == PAD_INDEX == 0
        assert vocab.index("<unk>") == UNK_INDEX == 1
        assert vocab.index("casa") == 2

    def test_unknown_maps_to_unk(self):
        vocab = Vocabulary(["casa"])
        assert vocab.index("inexistente") == UNK_INDEX

    def test_bijective(self):
        vocab = Vocabulary(["um", "dois", "três"])
        for i in range(len(vocab)):
            assert vocab.index(vocab.token(i)) == i

    def test_hash_changes_with_content(self):
        assert Vocabulary(["a1"]).sha256() != Vocabulary(["b1"]).sha256()
        assert Vocabulary(["a1"]).sha256() == Vocabulary(["a1"]).sha256()


class TestWord2vecLoader:
    def test_basic(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 3\na 1 2 3\nb 4 5 6\n", encoding="utf-8")
        vocab, matrix = load_word2vec_text(path)
        assert len(vocab) == 4 and matrix.shape == (4, 3)
        assert np.array_equal(matrix[vocab.index("a")], [1, 2, 3])
        assert np.array_equal(matrix[PAD_INDEX], [0, 0, 0])
        # UNK is the mean of the loaded vectors
        np.testing.assert_allclose(matrix[UNK_INDEX], [2.5, 3.5, 4.5])

    def test_restrict_to(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 3\na 1 2 3\nb 4 5 6\n", encoding="utf-8")
        vocab, matrix = load_word2vec_text(path, restrict_to={"a"})
        assert len(vocab) == 3
        assert "b" not in vocab

    def test_dimension_mismatch_names_line(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 3\na 1 2 3\nb 4 5\n", encoding="utf-8")
        with pytest.raises(ToolError, match=":3"):
            load_word2vec_text(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("nonsense\na 1 2\n", encoding="utf-8")
        with pytest.raises(ToolError, match="header"):
            load_word2vec_text(path)

    def test_tokens_lowercased_nfc(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("1 2\nCasa 1 2\n", encoding="utf-8")
        vocab, _ = load_word2vec_text(path)
        assert "casa" in vocab


class TestGloveLoader:
    def test_dimension_inferred(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("a 1 2\n", encoding="utf-8")
        vocab, matrix = load_glove_text(path)
        assert matrix.shape == (3, 2)

    def test_inconsistent_row(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("a 1 2\nb 1\n", encoding="utf-8")
        with pytest.raises(ToolError):
            load_glove_text(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ToolError, match="dimension"):
            load_glove_text(path)


class TestSaveRoundTrip:
    def test_word2vec_round_trip(self, tmp_path):
        docs = [["casa", "voto"], ["casa", "lei"]] * 5
        config = EmbeddingTrainConfig(dim=8, window=2, negatives=2, epochs=1, seed=1)
        vocab, matrix = train_embeddings(docs, config)
        path = tmp_path / "out.txt"
        save_word2vec_text(path, vocab, matrix)
        vocab2, matrix2 = load_word2vec_text(path)
        assert vocab2.tokens == vocab.tokens
        np.testing.assert_allclose(matrix2, matrix, atol=1e-6)


class TestEncode:
    def test_unk_and_pad(self):
        vocab = Vocabulary(["a1"])
        out = encode(["a1", "qq"], vocab, max_len=4)
        assert out.tolist() == [vocab.index("a1"), UNK_INDEX, PAD_INDEX, PAD_INDEX]

    def test_empty_all_pad(self):
        vocab = Vocabulary(["a1"])
        assert encode([], vocab, max_len=3).tolist() == [PAD_INDEX] * 3

    def test_truncation(self):
        vocab = Vocabulary([f"w{i}" for i in range(10)])
        tokens = [f"w{i}" for i in range(10)]
        out = encode(tokens, vocab, max_len=5)
        assert out.tolist() == [vocab.index(f"w{i}") for i in range(5)]

    def test_min_len_padding_for_wide_filters(self):
        vocab = Vocabulary(["a1"])
        out = encode(["a1"], vocab, max_len=2, min_len=5)
        assert len(out) == 5

    def test_round_trip_for_in_vocab_tokens(self):
        vocab = Vocabulary(["casa", "voto", "lei"])
        tokens = ["casa", "lei", "voto"]
        assert decode(encode(tokens, vocab, max_len=6), vocab) == tokens


class TestTrainEmbeddings:
    def test_cooccurring_tokens_similar(self):
        docs = [["x1", "y1"]] * 50
        config = EmbeddingTrainConfig(
            mode=EmbeddingMode.CBOW, dim=10, window=1, negatives=3, epochs=5, seed=1
        )
        vocab, matrix = train_embeddings(docs, config)
        rng = np.random.default_rng(7)
        rand = rng.normal(size=10)

        def cos(a, b):
            return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

        x, y = matrix[vocab.index("x1")], matrix[vocab.index("y1")]
        assert cos(x, y) > cos(x, rand)

    def test_min_count_maps_rare_to_unk(self):
        docs = [["aa", "bb"]] * 3 + [["aa", "zz"]]
        config = EmbeddingTrainConfig(dim=4, window=1, negatives=2, epochs=1,
                                      min_count=2, seed=0)
        vocab, _ = train_embeddings(docs, config)
        assert "zz" not in vocab
        assert vocab.index("zz") == UNK_INDEX

    def test_bitwise_determinism(self):
        docs = [["um1", "dois2", "tres3"], ["dois2", "quatro4"]] * 10
        config = EmbeddingTrainConfig(dim=6, window=2, negatives=3, epochs=2, seed=9)
        _, m1 = train_embeddings(docs, config)
        _, m2 = train_embeddings(docs, config)
        assert np.array_equal(m1, m2)

    def test_loss_decreases_on_tiny_corpus(self):
        docs = [["x1", "y1"]] * 50
        config = EmbeddingTrainConfig(
            mode=EmbeddingMode.CBOW, dim=10, window=1, negatives=3, epochs=6, seed=1
        )
        history: list[float] = []
        train_embeddings(docs, config, loss_history=history)
        assert len(history) == 6
        for earlier, later in zip(history, history[1:]):
            assert later <= earlier * 1.05  # monotone within 5% noise tolerance

    def test_skipgram_mode_runs_and_separates(self):
        docs = [["x1", "y1"]] * 50 + [["w1", "v1"]] * 50
        config = EmbeddingTrainConfig(
            mode=EmbeddingMode.SKIPGRAM, dim=8, window=1, negatives=3, epochs=5, seed=2
        )
        vocab, matrix = train_embeddings(docs, config)

        def cos(a, b):
            return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

        x, y, w = matrix[vocab.index("x1")], matrix[vocab.index("y1")], matrix[vocab.index("w1")]
        assert cos(x, y) > cos(x, w)

    def test_empty_vocabulary_rejected(self):
        with pytest.raises(ToolError):
            train_embeddings([["solo"]], EmbeddingTrainConfig(dim=4, min_count=2, seed=0))

    def test_pad_row_stays_zero(self):
        docs = [["a1", "b2", "c3"]] * 20
        vocab, matrix = train_embeddings(docs, EmbeddingTrainConfig(dim=6, seed=3))
        assert np.all(matrix[PAD_INDEX] == 0.0)
        assert np.isfinite(matrix).all()


def test_vocabulary_from_documents_ordering():
    vocab = vocabulary_from_documents([["bb", "aa"], ["bb", "cc"], ["aa"]])
    # bb and aa both appear twice; lexicographic tie-break, then cc
    assert vocab.tokens[2:] == ["aa", "bb", "cc"]


def test_random_embeddings_seeded_pad_zero():
    vocab = Vocabulary(["a1", "b2"])
    m1 = random_embeddings(vocab, 8, seed=4)
    m2 = random_embeddings(vocab, 8, seed=4)
    assert np.array_equal(m1, m2)
    assert np.all(m1[PAD_INDEX] == 0.0)
