"""Synthetic review corpus with a matching pretrained embedding file.

Documents are bags of cluster tokens: each aspect class owns a token
cluster, sentiment polarities own two more, and filler/noise vocabularies
supply uninformative tokens. Class frequencies decay geometrically, so the
pool is imbalanced the way real review data is. The emitted embedding file
encodes cluster identity directly in the vectors (one indicator dimension
per class plus jitter), standing in for externally pretrained vectors,
while self-trained runs must learn the same structure from scratch.

Everything is drawn from one seeded generator and serialized with fixed
formatting, so a spec generates byte-identical files every time.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ASPECT_CLASSES, CorpusRow, Taxonomy, write_corpus
from .errors import ConfigError

SENTIMENT_KINDS = ("pos", "neg", "both")


@dataclass(frozen=True)
class SynthSpec:
    n_samples: int = 2000
    n_validation: int = 400
    n_aspect_classes: int = 13
    tokens_per_cluster: int = 30
    noise_rate: float = 0.06
    seed: int = 7
    n_filler_tokens: int = 60
    n_noise_tokens: int = 120
    imbalance: float = 0.70
    embedding_jitter: float = 0.08
    label_weights: tuple[float, float, float] = (0.60, 0.28, 0.12)
    sentiment_weights: tuple[float, float, float] = (0.5, 0.3, 0.2)

    KEYS = {"n_samples", "n_validation", "n_aspect_classes", "tokens_per_cluster",
            "noise_rate", "seed", "n_filler_tokens", "n_noise_tokens", "imbalance",
            "embedding_jitter", "label_weights", "sentiment_weights"}

    def __post_init__(self):
        if self.n_aspect_classes < 2:
            raise ConfigError("need at least 2 aspect classes")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ConfigError("noise_rate must lie in [0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        unknown = set(d) - cls.KEYS
        if unknown:
            raise ConfigError(f"unknown synth spec keys {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("label_weights", "sentiment_weights"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @property
    def embedding_dim(self) -> int:
        return self.n_aspect_classes + 2 + 4

    def taxonomy(self) -> Taxonomy:
        c = self.n_aspect_classes
        if c <= len(ASPECT_CLASSES):
            aspects = ASPECT_CLASSES[:c]
        else:
            aspects = ASPECT_CLASSES + tuple(
                f"Extra aspect {i}" for i in range(len(ASPECT_CLASSES), c))
        return Taxonomy(aspects=aspects)


def _cluster_vocab(spec: SynthSpec) -> dict[str, list[str]]:
    clusters = {}
    for c in range(spec.n_aspect_classes):
        clusters[f"aspect{c}"] = [f"a{c:02d}w{j:02d}"
                                  for j in range(spec.tokens_per_cluster)]
    clusters["pos"] = [f"posw{j:02d}" for j in range(spec.tokens_per_cluster)]
    clusters["neg"] = [f"negw{j:02d}" for j in range(spec.tokens_per_cluster)]
    clusters["filler"] = [f"fillw{j:02d}" for j in range(spec.n_filler_tokens)]
    clusters["noise"] = [f"noisew{j:02d}" for j in range(spec.n_noise_tokens)]
    return clusters


def class_weights(spec: SynthSpec) -> np.ndarray:
    w = spec.imbalance ** np.arange(spec.n_aspect_classes)
    return w / w.sum()


def _draw_document(rng: np.random.Generator, spec: SynthSpec,
                   clusters: dict[str, list[str]], weights: np.ndarray):
    n_lab = 1 + int(rng.choice(3, p=np.array(spec.label_weights)))
    classes = sorted(int(c) for c in rng.choice(
        spec.n_aspect_classes, size=n_lab, replace=False, p=weights))
    kind = SENTIMENT_KINDS[int(rng.choice(3, p=np.array(spec.sentiment_weights)))]

    tokens: list[str] = []
    for c in classes:
        cluster = clusters[f"aspect{c}"]
        for j in rng.integers(0, len(cluster), size=int(rng.integers(2, 5))):
            tokens.append(cluster[int(j)])
    polarities = {"pos": ["pos"], "neg": ["neg"], "both": ["pos", "neg"]}[kind]
    for pol in polarities:
        cluster = clusters[pol]
        for j in rng.integers(0, len(cluster), size=int(rng.integers(1, 4))):
            tokens.append(cluster[int(j)])
    filler = clusters["filler"]
    for j in rng.integers(0, len(filler), size=int(rng.integers(2, 6))):
        tokens.append(filler[int(j)])

    n_noise = int(rng.binomial(len(tokens), spec.noise_rate))
    noise = clusters["noise"]
    for j in rng.integers(0, len(noise), size=n_noise):
        tokens.append(noise[int(j)])
    rng.shuffle(tokens)
    return tokens, classes, kind


def generate_synthetic_corpus(spec: SynthSpec) -> tuple[list[CorpusRow], list[tuple[str, np.ndarray]]]:
    """Corpus rows (pool + validation) and the token->vector entries."""
    rng = np.random.default_rng(spec.seed)
    taxonomy = spec.taxonomy()
    clusters = _cluster_vocab(spec)
    weights = class_weights(spec)

    rows: list[CorpusRow] = []
    for i in range(spec.n_samples + spec.n_validation):
        tokens, classes, kind = _draw_document(rng, spec, clusters, weights)
        is_val = i >= spec.n_samples
        doc_id = f"val{i - spec.n_samples:05d}" if is_val else f"doc{i:05d}"
        sentiment = {"pos": ("Positive",), "neg": ("Negative",),
                     "both": ("Positive", "Negative")}[kind]
        rows.append(CorpusRow(
            doc_id=doc_id,
            text=" ".join(tokens),
            aspects=tuple(taxonomy.aspects[c] for c in classes),
            sentiment=sentiment,
            split="validation" if is_val else "train",
        ))

    dim = spec.embedding_dim
    entries: list[tuple[str, np.ndarray]] = []
    for c in range(spec.n_aspect_classes):
        for token in clusters[f"aspect{c}"]:
            vec = rng.normal(0.0, spec.embedding_jitter, size=dim)
            vec[c] += 1.0
            entries.append((token, vec))
    for offset, pol in ((0, "pos"), (1, "neg")):
        for token in clusters[pol]:
            vec = rng.normal(0.0, spec.embedding_jitter, size=dim)
            vec[spec.n_aspect_classes + offset] += 1.0
            entries.append((token, vec))
    for name in ("filler", "noise"):
        for token in clusters[name]:
            entries.append((token, rng.normal(0.0, spec.embedding_jitter, size=dim)))
    return rows, entries


def write_embedding_file(entries: list[tuple[str, np.ndarray]], path) -> None:
    dim = entries[0][1].shape[0]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(entries)} {dim}\n")
        for token, vec in entries:
            fh.write(token + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")


def write_synthetic(spec: SynthSpec, out_dir) -> tuple[Path, Path]:
    """Write corpus.jsonl and embeddings.txt under out_dir; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, entries = generate_synthetic_corpus(spec)
    corpus_path = out / "corpus.jsonl"
    embedding_path = out / "embeddings.txt"
    write_corpus(rows, corpus_path)
    write_embedding_file(entries, embedding_path)
    return corpus_path, embedding_path
