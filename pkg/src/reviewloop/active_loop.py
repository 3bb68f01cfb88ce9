"""Pool bookkeeping, uncertainty selection, and the train/select/label loop.

A Pool partitions the corpus into labeled, unlabeled, pending, and held-out
validation sets. Each round trains fresh per-task models on the labeled set,
evaluates them on validation, then queries a batch of unlabeled documents:
in simulate mode their hidden gold labels are revealed, in live mode they
are parked as pending until an annotator submits labels.

The experiment runner sweeps (setting x seed) arms over a fully labeled
corpus to produce learning curves, the benchmark comparing selection
strategies and embedding sources at equal labeling budgets.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import TASKS, CorpusRow, Taxonomy
from .embeddings import (
    DEFAULT_MAX_SEQ_LEN,
    EmbeddingTable,
    TokenSequence,
    Vocabulary,
    build_vocabulary,
    create_trainable,
    load_pretrained,
    tokenize,
)
from .errors import ConfigError, EmptyPoolError, PoolExhaustedError
from .metrics import DEFAULT_THRESHOLD, EvalReport, binarize, evaluate
from .seqmodel import (
    Hyperparams,
    LabelVector,
    ModelParams,
    PredictionVector,
    predict_batch,
    train,
)


@dataclass(frozen=True)
class LabeledExample:
    seq: TokenSequence
    aspect: LabelVector
    sentiment: LabelVector

    def label(self, task: str) -> LabelVector:
        return self.aspect if task == "aspect" else self.sentiment


@dataclass
class Pool:
    """Disjoint id partitions of the corpus; validation is never selectable."""

    taxonomy: Taxonomy
    labeled: dict[str, LabeledExample] = field(default_factory=dict)
    unlabeled: dict[str, TokenSequence] = field(default_factory=dict)
    pending: dict[str, TokenSequence] = field(default_factory=dict)
    validation: dict[str, LabeledExample] = field(default_factory=dict)
    hidden_oracle: dict[str, tuple[LabelVector, LabelVector]] | None = None

    def counts(self) -> dict[str, int]:
        return {"labeled": len(self.labeled), "unlabeled": len(self.unlabeled),
                "pending": len(self.pending), "validation": len(self.validation)}

    def reveal(self, doc_id: str) -> None:
        """Move an unlabeled document to labeled using its hidden gold labels."""
        if self.hidden_oracle is None:
            raise ConfigError("reveal requires a hidden oracle (simulate mode)")
        seq = self.unlabeled.pop(doc_id)
        aspect, sentiment = self.hidden_oracle[doc_id]
        self.labeled[doc_id] = LabeledExample(seq=seq, aspect=aspect,
                                              sentiment=sentiment)

    def mark_pending(self, doc_id: str) -> None:
        self.pending[doc_id] = self.unlabeled.pop(doc_id)

    def resolve_pending(self, doc_id: str, aspect: LabelVector,
                        sentiment: LabelVector) -> None:
        seq = self.pending.pop(doc_id, None)
        if seq is None:
            seq = self.unlabeled.pop(doc_id)
        self.labeled[doc_id] = LabeledExample(seq=seq, aspect=aspect,
                                              sentiment=sentiment)

    def labeled_items(self) -> list[tuple[str, LabeledExample]]:
        return sorted(self.labeled.items())

    def task_training_data(self, task: str) -> list[tuple[TokenSequence, LabelVector]]:
        return [(ex.seq, ex.label(task)) for _, ex in self.labeled_items()]


def _row_labels(row: CorpusRow, taxonomy: Taxonomy) -> tuple[LabelVector, LabelVector]:
    aspect = LabelVector.from_names(row.aspects or (), taxonomy.aspects)
    sentiment = LabelVector.from_names(row.sentiment or (), taxonomy.sentiment)
    return aspect, sentiment


def build_pool(rows: list[CorpusRow], taxonomy: Taxonomy,
               max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
               simulate: bool = False) -> Pool:
    """Assemble a Pool from corpus rows.

    Live mode places labeled rows in the labeled set directly. Simulate mode
    hides every train-split row's labels behind the oracle and starts them
    all unlabeled; rows must then be fully labeled.
    """
    pool = Pool(taxonomy=taxonomy,
                hidden_oracle={} if simulate else None)
    for row in rows:
        seq = tokenize(row.text, source_id=row.doc_id, max_seq_len=max_seq_len)
        if row.split == "validation":
            aspect, sentiment = _row_labels(row, taxonomy)
            pool.validation[row.doc_id] = LabeledExample(seq, aspect, sentiment)
        elif simulate:
            if not row.has_labels:
                raise ConfigError(
                    f"simulate mode requires labels for every row, {row.doc_id!r} has none")
            pool.unlabeled[row.doc_id] = seq
            pool.hidden_oracle[row.doc_id] = _row_labels(row, taxonomy)
        elif row.has_labels:
            aspect, sentiment = _row_labels(row, taxonomy)
            pool.labeled[row.doc_id] = LabeledExample(seq, aspect, sentiment)
        else:
            pool.unlabeled[row.doc_id] = seq
    return pool


# ---------------------------------------------------------------------------
# Selection strategies
# ---------------------------------------------------------------------------

def uncertainty_score(pred: PredictionVector) -> float:
    """One minus the highest class probability."""
    return float(1.0 - np.max(pred.values))


STRATEGY_KINDS: dict[str, object] = {}


def register_strategy(kind: str):
    def wrap(fn):
        STRATEGY_KINDS[kind] = fn
        return fn
    return wrap


@dataclass
class SelectionStrategy:
    kind: str
    driver_task: str = "aspect"
    seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigError(
                f"unknown strategy {self.kind!r}; registered: {sorted(STRATEGY_KINDS)}")
        if self.driver_task not in TASKS:
            raise ConfigError(f"unknown driver task {self.driver_task!r}")
        self.rng = np.random.default_rng(self.seed)


def top_k_uncertain(ids: list[str], scores, k: int) -> list[str]:
    """Highest score first, ascending id on ties."""
    order = sorted(range(len(ids)), key=lambda j: (-scores[j], ids[j]))
    return [ids[j] for j in order[:k]]


@register_strategy("uncertainty")
def _select_uncertainty(strategy: SelectionStrategy, models: dict[str, ModelParams],
                        pool: Pool, k: int, vocab: Vocabulary,
                        table: EmbeddingTable) -> list[str]:
    ids = sorted(pool.unlabeled)
    seqs = [pool.unlabeled[i] for i in ids]
    preds = predict_batch(models[strategy.driver_task], seqs, vocab, table)
    scores = 1.0 - preds.max(axis=1)
    return top_k_uncertain(ids, scores, k)


@register_strategy("random")
def _select_random(strategy: SelectionStrategy, models: dict[str, ModelParams],
                   pool: Pool, k: int, vocab: Vocabulary,
                   table: EmbeddingTable) -> list[str]:
    ids = sorted(pool.unlabeled)
    chosen = strategy.rng.choice(len(ids), size=k, replace=False)
    return [ids[j] for j in chosen]


def select_batch(strategy: SelectionStrategy, models: dict[str, ModelParams],
                 pool: Pool, k: int, vocab: Vocabulary,
                 table: EmbeddingTable) -> list[str]:
    """The k unlabeled ids the strategy wants labeled next.

    Clamps k to the remaining pool; raises PoolExhaustedError when nothing
    is left.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not pool.unlabeled:
        raise PoolExhaustedError("no unlabeled documents remain")
    k = min(k, len(pool.unlabeled))
    return STRATEGY_KINDS[strategy.kind](strategy, models, pool, k, vocab, table)


# ---------------------------------------------------------------------------
# Rounds and learning curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Round:
    index: int
    trained_count: int
    labeled_count_after: int
    selected_ids: tuple[str, ...]
    eval: dict[str, EvalReport]


@dataclass
class LearningCurve:
    """Per-round validation metrics per task, keyed to the trained-on budget."""

    setting: str
    seed: int | str
    points: dict[str, list[tuple[int, float, float, float]]]  # task -> (n, P, R, F1)


def evaluate_model(params: ModelParams, examples: list[LabeledExample], task: str,
                   vocab: Vocabulary, table: EmbeddingTable,
                   threshold: float = DEFAULT_THRESHOLD,
                   force_top1: bool = False) -> EvalReport:
    taxonomy_classes = examples[0].label(task).taxonomy if examples else ()
    seqs = [ex.seq for ex in examples]
    if not seqs:
        return evaluate([], [])
    preds = predict_batch(params, seqs, vocab, table)
    pred_labels = [binarize(PredictionVector(p), threshold=threshold,
                            force_top1=force_top1, taxonomy=taxonomy_classes)
                   for p in preds]
    return evaluate(pred_labels, [ex.label(task) for ex in examples])


def train_task_models(pool: Pool, hyper: Hyperparams, table: EmbeddingTable,
                      vocab: Vocabulary) -> dict[str, ModelParams]:
    if not pool.labeled:
        raise EmptyPoolError("labeled pool is empty")
    return {task: train(pool.task_training_data(task), hyper, table, vocab)
            for task in TASKS}


def run_round(pool: Pool, strategy: SelectionStrategy, hyper: Hyperparams,
              k: int, vocab: Vocabulary, table: EmbeddingTable,
              round_index: int = 0, threshold: float = DEFAULT_THRESHOLD,
              mode: str = "simulate") -> tuple[Round, dict[str, ModelParams]]:
    """Train on the labeled set, evaluate, then query and absorb k documents."""
    trained_count = len(pool.labeled)
    models = train_task_models(pool, hyper, table, vocab)
    val = [ex for _, ex in sorted(pool.validation.items())]
    evals = {task: evaluate_model(models[task], val, task, vocab, table,
                                  threshold=threshold)
             for task in TASKS}
    selected = select_batch(strategy, models, pool, k, vocab, table)
    for doc_id in selected:
        if mode == "simulate":
            pool.reveal(doc_id)
        else:
            pool.mark_pending(doc_id)
    round_ = Round(index=round_index, trained_count=trained_count,
                   labeled_count_after=len(pool.labeled) + len(pool.pending),
                   selected_ids=tuple(selected), eval=evals)
    return round_, models


def stratified_initial_ids(pool: Pool, init_size: int,
                           rng: np.random.Generator) -> list[str]:
    """Seed draw covering every aspect class at least once when possible."""
    remaining = set(pool.unlabeled)
    chosen: list[str] = []
    if pool.hidden_oracle is None:
        raise ConfigError("stratified draw needs oracle labels")
    for class_idx in range(len(pool.taxonomy.aspects)):
        if len(chosen) >= init_size:
            break
        candidates = sorted(
            i for i in remaining
            if pool.hidden_oracle[i][0].values[class_idx] == 1.0)
        if candidates:
            pick = candidates[int(rng.integers(len(candidates)))]
            chosen.append(pick)
            remaining.remove(pick)
    fill = sorted(remaining)
    n_fill = min(init_size - len(chosen), len(fill))
    if n_fill > 0:
        picks = rng.choice(len(fill), size=n_fill, replace=False)
        chosen.extend(fill[int(j)] for j in picks)
    return chosen


# ---------------------------------------------------------------------------
# Experiment runner
# ---------------------------------------------------------------------------

VALID_EMBEDDINGS = ("pretrained", "self_trained")


@dataclass(frozen=True)
class ExperimentSetting:
    name: str
    embedding: str
    strategy: str

    def __post_init__(self):
        if self.embedding not in VALID_EMBEDDINGS:
            raise ConfigError(f"unknown embedding source {self.embedding!r}")
        if self.strategy not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy {self.strategy!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    settings: tuple[ExperimentSetting, ...]
    seeds: tuple[int, ...] = (1, 2, 3)
    init_size: int = 50
    k: int = 50
    rounds: int = 10
    driver_task: str = "aspect"
    threshold: float = DEFAULT_THRESHOLD
    min_count: int = 1
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN
    embedding_dim: int = 16
    hyper: Hyperparams = Hyperparams()

    KEYS = {"settings", "seeds", "init_size", "k", "rounds", "driver_task",
            "threshold", "min_count", "max_seq_len", "embedding_dim", "hyper"}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - cls.KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kwargs = dict(d)
        if "settings" in kwargs:
            kwargs["settings"] = tuple(
                ExperimentSetting(**s) for s in kwargs["settings"])
        if "seeds" in kwargs:
            kwargs["seeds"] = tuple(kwargs["seeds"])
        if "hyper" in kwargs:
            kwargs["hyper"] = Hyperparams.from_dict(kwargs["hyper"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        from dataclasses import asdict
        d = asdict(self)
        d["settings"] = [asdict(s) for s in self.settings]
        d["seeds"] = list(self.seeds)
        return d


def _embedding_for(setting: ExperimentSetting, vocab: Vocabulary,
                   embedding_file, dim: int, seed: int) -> EmbeddingTable:
    if setting.embedding == "pretrained":
        if embedding_file is None:
            raise ConfigError(f"setting {setting.name!r} needs an embedding file")
        return load_pretrained(embedding_file, vocab, seed=0)
    return create_trainable(vocab, dim=dim, seed=seed)


def run_experiment(config: ExperimentConfig, rows: list[CorpusRow],
                   validation_rows: list[CorpusRow] | None = None,
                   embedding_file=None,
                   progress=None) -> list[LearningCurve]:
    """Run every (setting, seed) arm and append a seed-mean curve per setting.

    rows form the selection pool and must be fully labeled (simulated
    oracle). Validation comes from rows marked split=validation or from
    validation_rows; ids must not overlap the pool.
    """
    taxonomy = Taxonomy()
    pool_rows = [r for r in rows if r.split != "validation"]
    val_rows = [r for r in rows if r.split == "validation"]
    if validation_rows is not None:
        overlap = {r.doc_id for r in validation_rows} & {r.doc_id for r in rows}
        if overlap:
            raise ConfigError(
                f"validation ids overlap the pool: {sorted(overlap)[:5]}")
        val_rows = val_rows + [replace(r, split="validation") for r in validation_rows]
    if not val_rows:
        raise ConfigError("no validation rows provided")

    corpus_seqs = [tokenize(r.text, r.doc_id, config.max_seq_len) for r in pool_rows]
    vocab = build_vocabulary(corpus_seqs, min_count=config.min_count)

    curves: list[LearningCurve] = []
    for setting in config.settings:
        per_seed: list[LearningCurve] = []
        for seed in config.seeds:
            table = _embedding_for(setting, vocab, embedding_file,
                                   config.embedding_dim, seed)
            pool = build_pool(pool_rows + val_rows, taxonomy,
                              max_seq_len=config.max_seq_len, simulate=True)
            rng = np.random.default_rng(seed)
            for doc_id in stratified_initial_ids(pool, config.init_size, rng):
                pool.reveal(doc_id)
            strategy = SelectionStrategy(kind=setting.strategy,
                                         driver_task=config.driver_task, seed=seed)
            hyper = replace(config.hyper, seed=seed)
            points: dict[str, list] = {task: [] for task in TASKS}
            for r in range(config.rounds):
                round_, _ = run_round(pool, strategy, hyper, config.k, vocab,
                                      table, round_index=r,
                                      threshold=config.threshold)
                for task in TASKS:
                    rep = round_.eval[task]
                    points[task].append((round_.trained_count, rep.micro_precision,
                                         rep.micro_recall, rep.micro_f1))
                if progress is not None:
                    progress(setting.name, seed, r, round_)
            per_seed.append(LearningCurve(setting=setting.name, seed=seed,
                                          points=points))
        curves.extend(per_seed)
        curves.append(mean_curve(per_seed))
    return curves


def mean_curve(curves: list[LearningCurve]) -> LearningCurve:
    """Pointwise seed average; all input curves share labeled counts."""
    points: dict[str, list] = {}
    for task in TASKS:
        rows = []
        for j in range(len(curves[0].points[task])):
            counts = {c.points[task][j][0] for c in curves}
            if len(counts) != 1:
                raise ConfigError("seed curves disagree on labeled counts")
            stack = np.array([c.points[task][j][1:] for c in curves])
            mean = stack.mean(axis=0)
            rows.append((counts.pop(), float(mean[0]), float(mean[1]),
                         float(mean[2])))
        points[task] = rows
    return LearningCurve(setting=curves[0].setting, seed="mean", points=points)


CURVE_CSV_HEADER = "setting,task,seed,round,labeled_count,micro_precision,micro_recall,micro_f1"


def curves_to_csv(curves: list[LearningCurve]) -> str:
    """Deterministic CSV dump ordered by (setting, task, seed, round).

    Numeric seeds sort before each setting's "mean" curve.
    """

    def seed_key(seed):
        return (1, 0) if seed == "mean" else (0, int(seed))

    rows = []
    for curve in curves:
        for task in TASKS:
            for rnd, (count, p, r, f1) in enumerate(curve.points[task]):
                rows.append((curve.setting, task, seed_key(curve.seed), rnd,
                             f"{curve.setting},{task},{curve.seed},{rnd},{count},"
                             f"{p:.6f},{r:.6f},{f1:.6f}"))
    rows.sort(key=lambda r: r[:4])
    out = io.StringIO()
    out.write(CURVE_CSV_HEADER + "\n")
    for row in rows:
        out.write(row[4] + "\n")
    return out.getvalue()
