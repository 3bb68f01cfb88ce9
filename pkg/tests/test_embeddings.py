import numpy as np
import pytest
from hypothesis import given, strategies as st

from reviewloop.embeddings import (
    PAD_INDEX,
    UNK_INDEX,
    PAD_TOKEN,
    UNK_TOKEN,
    EmbeddingTable,
    TokenSequence,
    build_vocabulary,
    create_trainable,
    load_pretrained,
    lookup,
    tokenize,
)
from reviewloop.errors import EmptyCorpusError, EmptyTextError, FormatError


def seqs(*token_lists):
    return [TokenSequence(tokens=tuple(ts), source_id=str(i))
            for i, ts in enumerate(token_lists)]


class TestTokenize:
    def test_punctuation_split(self):
        assert tokenize("Great service!").tokens == ("great", "service", "!")

    def test_whitespace_collapse(self):
        assert tokenize("A  B").tokens == ("a", "b")

    def test_truncation(self):
        text = " ".join(f"tok{i}" for i in range(200))
        out = tokenize(text, max_seq_len=128)
        assert len(out) == 128
        assert out.tokens[0] == "tok0"
        assert out.tokens[-1] == "tok127"

    def test_empty_text_rejected(self):
        with pytest.raises(EmptyTextError):
            tokenize("")
        with pytest.raises(EmptyTextError):
            tokenize("   \t\n")

    def test_unicode_punctuation(self):
        assert tokenize("bien«le?»").tokens == ("bien", "«", "le", "?", "»")

    @given(st.text(min_size=1, max_size=60))
    def test_retokenizing_joined_output_is_idempotent(self, text):
        try:
            first = tokenize(text)
        except EmptyTextError:
            return
        again = tokenize(" ".join(first.tokens))
        assert again.tokens == first.tokens


class TestBuildVocabulary:
    def test_frequency_order(self):
        vocab = build_vocabulary(seqs(["a", "b"], ["a"]), min_count=1)
        assert vocab.token_to_index == {PAD_TOKEN: 0, UNK_TOKEN: 1, "a": 2, "b": 3}

    def test_min_count_threshold(self):
        vocab = build_vocabulary(seqs(["a", "b"], ["a"]), min_count=2)
        assert vocab.token_to_index == {PAD_TOKEN: 0, UNK_TOKEN: 1, "a": 2}

    def test_lexicographic_tie_break(self):
        vocab = build_vocabulary(seqs(["y", "x"]), min_count=1)
        assert vocab.token_to_index["x"] == 2
        assert vocab.token_to_index["y"] == 3

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpusError):
            build_vocabulary([], min_count=1)

    def test_unknown_token_maps_to_unk(self):
        vocab = build_vocabulary(seqs(["a"]), min_count=1)
        assert vocab.index("never-seen") == UNK_INDEX

    def test_indices_dense(self):
        vocab = build_vocabulary(seqs(["c", "b", "a"], ["b", "c"], ["c"]), min_count=1)
        assert sorted(vocab.token_to_index.values()) == list(range(len(vocab)))


def write_embedding_file(path, entries, dim):
    lines = [f"{len(entries)} {dim}"]
    for token, vec in entries:
        lines.append(token + " " + " ".join(str(v) for v in vec))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestLoadPretrained:
    def test_header_contract(self, tmp_path):
        f = tmp_path / "vec.txt"
        write_embedding_file(f, [("a", [1, 2, 3, 4]), ("b", [5, 6, 7, 8]),
                                 ("c", [9, 10, 11, 12])], dim=4)
        vocab = build_vocabulary(seqs(["a", "b", "c"]), min_count=1)
        table = load_pretrained(f, vocab)
        assert table.dim == 4
        assert table.matrix.shape == (len(vocab), 4)
        assert table.mode == "frozen_pretrained"
        np.testing.assert_array_equal(table.matrix[vocab.index("a")], [1, 2, 3, 4])

    def test_missing_token_gets_reproducible_fallback(self, tmp_path):
        f = tmp_path / "vec.txt"
        write_embedding_file(f, [("a", [1.0, 2.0])], dim=2)
        vocab = build_vocabulary(seqs(["a", "zzz"]), min_count=1)
        t1 = load_pretrained(f, vocab, seed=9)
        t2 = load_pretrained(f, vocab, seed=9)
        row = t1.matrix[vocab.index("zzz")]
        np.testing.assert_array_equal(row, t2.matrix[vocab.index("zzz")])
        assert np.all(np.abs(row) <= 0.05)
        assert np.any(row != 0.0)

    def test_pad_row_zero_unk_seeded(self, tmp_path):
        f = tmp_path / "vec.txt"
        write_embedding_file(f, [("a", [1.0, 2.0])], dim=2)
        vocab = build_vocabulary(seqs(["a"]), min_count=1)
        table = load_pretrained(f, vocab, seed=3)
        np.testing.assert_array_equal(table.matrix[PAD_INDEX], [0.0, 0.0])
        assert np.any(table.matrix[UNK_INDEX] != 0.0)

    def test_short_line_reports_line_number(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("2 4\na 1 2 3 4\nb 1 2 3\n", encoding="utf-8")
        vocab = build_vocabulary(seqs(["a", "b"]), min_count=1)
        with pytest.raises(FormatError) as exc:
            load_pretrained(f, vocab)
        assert exc.value.line_no == 3

    def test_malformed_header(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("banana\na 1 2\n", encoding="utf-8")
        with pytest.raises(FormatError) as exc:
            load_pretrained(f, build_vocabulary(seqs(["a"]), min_count=1))
        assert exc.value.line_no == 1

    def test_non_finite_value(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("1 2\na nan 2.0\n", encoding="utf-8")
        with pytest.raises(FormatError) as exc:
            load_pretrained(f, build_vocabulary(seqs(["a"]), min_count=1))
        assert exc.value.line_no == 2

    def test_count_mismatch(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("5 2\na 1 2\n", encoding="utf-8")
        with pytest.raises(FormatError):
            load_pretrained(f, build_vocabulary(seqs(["a"]), min_count=1))


class TestLookup:
    def make(self):
        vocab = build_vocabulary(seqs(["a", "b", "c"]), min_count=1)
        rng = np.random.default_rng(0)
        table = EmbeddingTable(matrix=rng.normal(size=(len(vocab), 16)), dim=16)
        return vocab, table

    def test_known_tokens_exact_rows(self):
        vocab, table = self.make()
        out = lookup(TokenSequence(("a", "c")), table, vocab)
        np.testing.assert_array_equal(out[0], table.matrix[vocab.index("a")])
        np.testing.assert_array_equal(out[1], table.matrix[vocab.index("c")])

    def test_unseen_token_unk_row(self):
        vocab, table = self.make()
        out = lookup(TokenSequence(("mystery",)), table, vocab)
        np.testing.assert_array_equal(out[0], table.matrix[UNK_INDEX])

    def test_shape(self):
        vocab, table = self.make()
        out = lookup(TokenSequence(("a", "b", "c", "a", "b")), table, vocab)
        assert out.shape == (5, 16)


class TestDeterminism:
    def test_identical_inputs_identical_artifacts(self, tmp_path):
        corpus = seqs(["red", "blue", "red"], ["green", "blue"])
        v1 = build_vocabulary(corpus, min_count=1)
        v2 = build_vocabulary(corpus, min_count=1)
        assert v1.token_to_index == v2.token_to_index
        f = tmp_path / "vec.txt"
        write_embedding_file(f, [("red", [0.1, 0.2]), ("blue", [0.3, 0.4])], dim=2)
        t1 = load_pretrained(f, v1, seed=5)
        t2 = load_pretrained(f, v2, seed=5)
        assert t1.matrix.tobytes() == t2.matrix.tobytes()

    def test_trainable_table_seeded(self):
        vocab = build_vocabulary(seqs(["a", "b"]), min_count=1)
        t1 = create_trainable(vocab, dim=8, seed=2)
        t2 = create_trainable(vocab, dim=8, seed=2)
        assert t1.matrix.tobytes() == t2.matrix.tobytes()
        assert t1.mode == "trainable"
        np.testing.assert_array_equal(t1.matrix[PAD_INDEX], np.zeros(8))
