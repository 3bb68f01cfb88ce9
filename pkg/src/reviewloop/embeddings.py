"""Tokenization, vocabulary construction, and token-to-vector provisioning.

Vectors come from one of two sources: a pretrained embedding text file
(loaded once and frozen) or a randomly initialized table that is trained
jointly with the classifier. Both are plain float64 matrices indexed by
vocabulary position.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCorpusError, EmptyTextError, FormatError

PAD_INDEX = 0
UNK_INDEX = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

DEFAULT_MAX_SEQ_LEN = 128

# Initialization bound for rows not covered by a pretrained file and for
# trainable tables.
INIT_BOUND = 0.05

FROZEN_PRETRAINED = "frozen_pretrained"
TRAINABLE = "trainable"


@dataclass(frozen=True)
class TokenSequence:
    """An ordered, lowercased token list plus its document id."""

    tokens: tuple[str, ...]
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Vocabulary:
    """Dense token->index map with fixed PAD=0 and UNK=1 slots."""

    token_to_index: dict[str, int]

    def __len__(self) -> int:
        return len(self.token_to_index)

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, UNK_INDEX)

    def indices(self, seq: TokenSequence) -> np.ndarray:
        return np.array([self.index(t) for t in seq.tokens], dtype=np.int64)


@dataclass
class EmbeddingTable:
    """V x D matrix of token vectors.

    mode == "frozen_pretrained" tables must never receive gradient updates;
    the trainer copies "trainable" tables before touching them, so a table
    instance is immutable in practice once built.
    """

    matrix: np.ndarray
    dim: int
    mode: str = FROZEN_PRETRAINED

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[1] != self.dim:
            raise ValueError("embedding matrix shape inconsistent with dim")


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str, source_id: str = "", max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> TokenSequence:
    """Lowercase, split punctuation into separate tokens, split on whitespace.

    Raises EmptyTextError on empty or whitespace-only input. Output is
    truncated to max_seq_len tokens.
    """
    if not text or not text.strip():
        raise EmptyTextError("cannot tokenize empty or whitespace-only text")
    chars = []
    for ch in text.lower():
        if _is_punctuation(ch):
            chars.append(f" {ch} ")
        else:
            chars.append(ch)
    tokens = "".join(chars).split()
    return TokenSequence(tokens=tuple(tokens[:max_seq_len]), source_id=source_id)


def build_vocabulary(corpus: list[TokenSequence], min_count: int = 1) -> Vocabulary:
    """Vocabulary over all tokens occurring at least min_count times.

    Indices are assigned by descending frequency, ties broken
    lexicographically, after the reserved PAD and UNK slots. Deterministic
    for a given corpus.
    """
    if not corpus:
        raise EmptyCorpusError("cannot build a vocabulary from an empty corpus")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for seq in corpus:
        counts.update(seq.tokens)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    mapping = {PAD_TOKEN: PAD_INDEX, UNK_TOKEN: UNK_INDEX}
    for i, tok in enumerate(kept, start=2):
        mapping[tok] = i
    return Vocabulary(token_to_index=mapping)


def _seeded_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return rng.uniform(-INIT_BOUND, INIT_BOUND, size=(n, dim))


def create_trainable(vocab: Vocabulary, dim: int, seed: int = 0) -> EmbeddingTable:
    """Randomly initialized table learned jointly with the classifier."""
    if dim <= 0:
        raise ValueError("embedding dim must be positive")
    rng = np.random.default_rng(seed)
    matrix = _seeded_rows(rng, len(vocab), dim)
    matrix[PAD_INDEX] = 0.0
    return EmbeddingTable(matrix=matrix, dim=dim, mode=TRAINABLE)


def load_pretrained(path, vocab: Vocabulary, seed: int = 0) -> EmbeddingTable:
    """Load a word2vec-style text file into a frozen table.

    File format: header line "<count> <dim>", then one "<token> <f1> ...
    <fdim>" line per token. Vocabulary tokens present in the file get their
    file vector verbatim; missing tokens and UNK get a seeded uniform row;
    PAD is all-zero. Every line is validated whether or not its token is in
    the vocabulary.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise FormatError(1, f"expected '<count> <dim>' header, got {header.strip()!r}")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(1, f"non-integer header fields: {header.strip()!r}") from None
        if count < 0 or dim <= 0:
            raise FormatError(1, f"invalid header values: count={count} dim={dim}")

        file_vectors: dict[str, np.ndarray] = {}
        n_lines = 0
        for line_no, line in enumerate(fh, start=2):
            if line.strip() == "":
                continue
            n_lines += 1
            fields = line.split()
            token, values = fields[0], fields[1:]
            if len(values) != dim:
                raise FormatError(line_no, f"expected {dim} floats, found {len(values)}")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise FormatError(line_no, "unparseable float value") from None
            if not np.all(np.isfinite(vec)):
                raise FormatError(line_no, "non-finite embedding value")
            if token in vocab.token_to_index:
                file_vectors[token] = vec
        if n_lines != count:
            raise FormatError(1, f"header declares {count} vectors, file has {n_lines}")

    rng = np.random.default_rng(seed)
    matrix = np.zeros((len(vocab), dim), dtype=np.float64)
    # Iterate in index order so the fallback draws are reproducible.
    for token, idx in sorted(vocab.token_to_index.items(), key=lambda kv: kv[1]):
        if idx == PAD_INDEX:
            continue
        vec = file_vectors.get(token)
        if vec is None or idx == UNK_INDEX:
            matrix[idx] = _seeded_rows(rng, 1, dim)[0]
        else:
            matrix[idx] = vec
    return EmbeddingTable(matrix=matrix, dim=dim, mode=FROZEN_PRETRAINED)


def lookup(seq: TokenSequence, table: EmbeddingTable, vocab: Vocabulary) -> np.ndarray:
    """T x D matrix whose row t is the table row of token t."""
    if len(seq) == 0:
        raise EmptyTextError("cannot embed an empty token sequence")
    return table.matrix[vocab.indices(seq)]
