"""Live human-in-the-loop mode: persistent store, annotation queue, retrain.

State lives in one inspectable directory:

    store/
      corpus.jsonl        ingested rows, append-only
      audit.jsonl         label submissions, append-only
      state.json          config, taxonomy, rounds, leases, model vocabulary
      checkpoints/        aspect.npz / sentiment.npz

The pool is rebuilt on open by reading the corpus and replaying the audit
log, so the labeled set is exactly the ingest-time labels plus every
submission ever accepted. Queue order is derived from the persisted
checkpoint, which makes it reproducible across a crash.

Concurrency: one lock serializes pool mutation and checkpoint swap; training
runs on a background thread and publishes its results atomically. Readers
(queue, metrics) take the lock briefly and see wholly-old or wholly-new
model state, never a mix.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .active_loop import (
    LabeledExample,
    LearningCurve,
    evaluate_model,
    top_k_uncertain,
)
from .corpus import TASKS, CorpusRow, Taxonomy, parse_row
from .embeddings import (
    DEFAULT_MAX_SEQ_LEN,
    EmbeddingTable,
    Vocabulary,
    build_vocabulary,
    create_trainable,
    load_pretrained,
    tokenize,
)
from .errors import (
    BusyError,
    ConfigError,
    ConflictError,
    EmptyPoolError,
    IngestError,
    NoRoundsYetError,
    NotFoundError,
    PoolExhaustedError,
    TaxonomyError,
)
from .metrics import EvalReport
from .seqmodel import (
    Hyperparams,
    LabelVector,
    ModelParams,
    load_checkpoint,
    predict_batch,
    save_checkpoint,
    train,
)

STATE_FILE = "state.json"
CORPUS_FILE = "corpus.jsonl"
AUDIT_FILE = "audit.jsonl"
CHECKPOINT_DIR = "checkpoints"

DEFAULT_LEASE_SECONDS = 15 * 60


@dataclass(frozen=True)
class ServiceConfig:
    hyper: Hyperparams = Hyperparams()
    embedding: str = "self_trained"  # or "pretrained"
    embedding_file: str | None = None
    embedding_dim: int = 16
    threshold: float = 0.5
    driver_task: str = "aspect"
    seed: int = 0
    min_count: int = 1
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN
    lease_seconds: float = DEFAULT_LEASE_SECONDS
    auto_retrain_every: int | None = None

    KEYS = {"hyper", "embedding", "embedding_file", "embedding_dim", "threshold",
            "driver_task", "seed", "min_count", "max_seq_len", "lease_seconds",
            "auto_retrain_every"}

    def __post_init__(self):
        if self.embedding not in ("pretrained", "self_trained"):
            raise ConfigError(f"unknown embedding source {self.embedding!r}")
        if self.embedding == "pretrained" and not self.embedding_file:
            raise ConfigError("pretrained embedding needs embedding_file")

    @classmethod
    def from_dict(cls, d: dict) -> "ServiceConfig":
        unknown = set(d) - cls.KEYS
        if unknown:
            raise ConfigError(f"unknown service config keys {sorted(unknown)}")
        kwargs = dict(d)
        if "hyper" in kwargs:
            kwargs["hyper"] = Hyperparams.from_dict(kwargs["hyper"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AnnotationTask:
    doc_id: str
    text: str
    predictions: dict[str, list[float]] | None
    uncertainty: float | None
    queued_at: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class _ModelState:
    """Immutable snapshot published by a completed retrain."""

    models: dict[str, ModelParams]
    vocab: Vocabulary
    table: EmbeddingTable | None
    # doc id -> (uncertainty, aspect preds, sentiment preds)
    scores: dict[str, tuple[float, list[float], list[float]]]


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


class Store:
    """Single-directory persistence plus the live annotation workflow."""

    def __init__(self, root, config: ServiceConfig, taxonomy: Taxonomy,
                 clock=time.time):
        self.root = Path(root)
        self.config = config
        self.taxonomy = taxonomy
        self.clock = clock
        self._lock = threading.RLock()
        self._rows: dict[str, CorpusRow] = {}
        self._texts: dict[str, str] = {}
        self._labeled: dict[str, tuple[LabelVector, LabelVector]] = {}
        self._unlabeled: set[str] = set()
        self._validation: dict[str, tuple[LabelVector, LabelVector]] = {}
        self._leases: dict[str, dict] = {}
        self._rounds: list[dict] = []
        self._model: _ModelState | None = None
        self._train_thread: threading.Thread | None = None
        self._train_status = {"status": "idle", "detail": None}
        self._submissions_since_retrain = 0

    # -- construction -------------------------------------------------------

    @classmethod
    def create(cls, root, config: ServiceConfig,
               taxonomy: Taxonomy | None = None, clock=time.time) -> "Store":
        root = Path(root)
        if (root / STATE_FILE).exists():
            raise ConfigError(f"store already exists at {root}")
        root.mkdir(parents=True, exist_ok=True)
        (root / CHECKPOINT_DIR).mkdir(exist_ok=True)
        store = cls(root, config, taxonomy or Taxonomy(), clock=clock)
        (root / CORPUS_FILE).touch()
        (root / AUDIT_FILE).touch()
        store._save_state()
        return store

    @classmethod
    def open(cls, root, clock=time.time) -> "Store":
        root = Path(root)
        state_path = root / STATE_FILE
        if not state_path.exists():
            raise ConfigError(f"no store at {root}")
        state = json.loads(state_path.read_text(encoding="utf-8"))
        config = ServiceConfig.from_dict(state["config"])
        store = cls(root, config, Taxonomy.from_dict(state["taxonomy"]),
                    clock=clock)
        store._rounds = state["rounds"]
        store._leases = state["leases"]
        store._load_corpus()
        store._replay_audit()
        if state.get("model_vocab") is not None:
            store._restore_model(state["model_vocab"])
        return store

    def _load_corpus(self) -> None:
        path = self.root / CORPUS_FILE
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                row = parse_row(json.loads(line), self.taxonomy, line_no)
                self._absorb_row(row)

    def _replay_audit(self) -> None:
        path = self.root / AUDIT_FILE
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                self._apply_labels(entry["doc_id"], entry["aspects"],
                                   entry["sentiment"])

    def _restore_model(self, vocab_tokens: list[str]) -> None:
        vocab = Vocabulary({tok: i for i, tok in enumerate(vocab_tokens)})
        models = {}
        for task in TASKS:
            path = self.root / CHECKPOINT_DIR / f"{task}.npz"
            models[task], _ = load_checkpoint(path)
        table = self._frozen_table(vocab)
        scores = self._compute_scores(models, vocab, table)
        self._model = _ModelState(models=models, vocab=vocab, table=table,
                                  scores=scores)

    def _frozen_table(self, vocab: Vocabulary) -> EmbeddingTable | None:
        if self.config.embedding == "pretrained":
            return load_pretrained(self.config.embedding_file, vocab,
                                   seed=self.config.seed)
        return None  # trained table travels inside the checkpoint

    # -- persistence --------------------------------------------------------

    def _save_state(self) -> None:
        state = {
            "version": 1,
            "config": self.config.to_dict(),
            "taxonomy": self.taxonomy.to_dict(),
            "rounds": self._rounds,
            "leases": self._leases,
            "model_vocab": (sorted(self._model.vocab.token_to_index,
                                   key=self._model.vocab.token_to_index.get)
                            if self._model else None),
        }
        _atomic_write(self.root / STATE_FILE, json.dumps(state, indent=1))

    def _append_jsonl(self, filename: str, obj: dict) -> None:
        with open(self.root / filename, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")

    # -- pool assembly ------------------------------------------------------

    def _absorb_row(self, row: CorpusRow) -> None:
        self._rows[row.doc_id] = row
        self._texts[row.doc_id] = row.text
        labels = (LabelVector.from_names(row.aspects or (), self.taxonomy.aspects),
                  LabelVector.from_names(row.sentiment or (), self.taxonomy.sentiment))
        if row.split == "validation":
            self._validation[row.doc_id] = labels
        elif row.has_labels:
            self._labeled[row.doc_id] = labels
        else:
            self._unlabeled.add(row.doc_id)

    def _apply_labels(self, doc_id: str, aspects: list[str],
                      sentiment: list[str]) -> None:
        self._unlabeled.discard(doc_id)
        self._leases.pop(doc_id, None)
        self._labeled[doc_id] = (
            LabelVector.from_names(aspects, self.taxonomy.aspects),
            LabelVector.from_names(sentiment, self.taxonomy.sentiment))

    # -- ingest -------------------------------------------------------------

    def ingest_lines(self, lines) -> dict:
        """Validate an entire JSONL batch, then commit it atomically."""
        with self._lock:
            new_rows: list[CorpusRow] = []
            seen: set[str] = set()
            for line_no, line in enumerate(lines, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise IngestError(line_no, f"invalid JSON: {exc.msg}") from None
                row = parse_row(obj, self.taxonomy, line_no)
                if row.doc_id in self._rows or row.doc_id in seen:
                    raise IngestError(line_no, f"duplicate id {row.doc_id!r}")
                seen.add(row.doc_id)
                new_rows.append(row)

            delta = {"labeled": 0, "unlabeled": 0, "validation": 0}
            for row in new_rows:
                self._absorb_row(row)
                self._append_jsonl(CORPUS_FILE, row.to_dict())
                if row.split == "validation":
                    delta["validation"] += 1
                elif row.has_labels:
                    delta["labeled"] += 1
                else:
                    delta["unlabeled"] += 1
            if self._model is not None and delta["unlabeled"]:
                self._model = replace(
                    self._model,
                    scores=self._compute_scores(self._model.models,
                                                self._model.vocab,
                                                self._model.table))
            self._save_state()
            return delta

    def ingest_corpus(self, path) -> dict:
        with open(path, encoding="utf-8") as fh:
            return self.ingest_lines(fh)

    # -- queue --------------------------------------------------------------

    def _active_leases(self) -> dict[str, dict]:
        now = self.clock()
        return {doc_id: lease for doc_id, lease in self._leases.items()
                if lease["expires"] > now}

    def queue_next(self, n: int, annotator: str | None = None) -> dict:
        """Top-n most uncertain unlabeled docs, or a seeded random order
        before the first checkpoint exists (flagged as such)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        with self._lock:
            leases = self._active_leases()
            available = [i for i in self._unlabeled
                         if i not in leases or leases[i]["annotator"] == annotator]
            if not self._unlabeled:
                raise PoolExhaustedError("no unlabeled documents remain")
            if self._model is not None:
                scores = self._model.scores
                ordered = top_k_uncertain(
                    sorted(available), [scores[i][0] for i in sorted(available)], n)
                selection = "uncertainty"
            else:
                rng = np.random.default_rng(self.config.seed)
                perm = rng.permutation(sorted(self._unlabeled))
                ordered = [i for i in perm if i in set(available)][:n]
                selection = "random_fallback"
            tasks = []
            for doc_id in ordered:
                if self._model is not None:
                    score, aspect_p, sent_p = self._model.scores[doc_id]
                    preds = {"aspect": aspect_p, "sentiment": sent_p}
                else:
                    score, preds = None, None
                tasks.append(AnnotationTask(
                    doc_id=doc_id, text=self._texts[doc_id], predictions=preds,
                    uncertainty=score, queued_at=_now_iso()))
            if annotator is not None and tasks:
                expires = self.clock() + self.config.lease_seconds
                for task in tasks:
                    self._leases[task.doc_id] = {"annotator": annotator,
                                                 "expires": expires}
                self._save_state()
            return {"selection": selection, "tasks": tasks}

    # -- labeling -----------------------------------------------------------

    def submit_labels(self, doc_id: str, aspects: list[str],
                      sentiment: list[str], annotator: str) -> dict:
        with self._lock:
            if doc_id not in self._rows:
                raise NotFoundError(f"unknown document {doc_id!r}")
            if doc_id not in self._unlabeled:
                raise ConflictError(f"document {doc_id!r} is already labeled")
            for name in aspects:
                if name not in self.taxonomy.aspects:
                    raise TaxonomyError(f"unknown aspect label {name!r}")
            for name in sentiment:
                if name not in self.taxonomy.sentiment:
                    raise TaxonomyError(f"unknown sentiment label {name!r}")
            self._apply_labels(doc_id, list(aspects), list(sentiment))
            self._append_jsonl(AUDIT_FILE, {
                "ts": _now_iso(), "doc_id": doc_id, "aspects": list(aspects),
                "sentiment": list(sentiment), "annotator": annotator})
            self._save_state()
            self._submissions_since_retrain += 1
            auto = self.config.auto_retrain_every
        if (auto and self._submissions_since_retrain >= auto
                and self._train_status["status"] != "running"):
            try:
                self.trigger_retrain()
            except BusyError:
                pass  # another submission won the race; its job covers ours
        return {"doc_id": doc_id, "labeled": len(self._labeled)}

    # -- training -----------------------------------------------------------

    def trigger_retrain(self, blocking: bool = False) -> dict:
        with self._lock:
            if self._train_status["status"] == "running":
                raise BusyError("a training job is already running")
            if not self._labeled:
                raise EmptyPoolError("no labeled documents to train on")
            self._train_status = {"status": "running", "detail": None}
        thread = threading.Thread(target=self._retrain_job, daemon=True)
        self._train_thread = thread
        thread.start()
        if blocking:
            thread.join()
        return dict(self._train_status)

    def wait_for_training(self, timeout: float | None = None) -> dict:
        thread = self._train_thread
        if thread is not None:
            thread.join(timeout)
        return dict(self._train_status)

    def _retrain_job(self) -> None:
        try:
            with self._lock:
                labeled = sorted(self._labeled.items())
                train_texts = {i: self._texts[i] for i in self._rows
                               if i not in self._validation}
                validation = sorted(self._validation.items())
            seqs = {i: tokenize(t, i, self.config.max_seq_len)
                    for i, t in train_texts.items()}
            vocab = build_vocabulary(list(seqs.values()),
                                     min_count=self.config.min_count)
            if self.config.embedding == "pretrained":
                table = load_pretrained(self.config.embedding_file, vocab,
                                        seed=self.config.seed)
            else:
                table = create_trainable(vocab, self.config.embedding_dim,
                                         seed=self.config.seed)
            hyper = replace(self.config.hyper, seed=self.config.seed)
            trained_count = len(labeled)
            models = {}
            for task_idx, task in enumerate(TASKS):
                data = [(seqs[i], labels[task_idx]) for i, labels in labeled]
                models[task] = train(data, hyper, table, vocab)

            evals = self._evaluate(models, vocab, table, validation)
            with self._lock:
                for task in TASKS:
                    path = self.root / CHECKPOINT_DIR / f"{task}.npz"
                    tmp = path.with_suffix(".npz.tmp")
                    save_checkpoint(models[task], hyper, tmp)
                    os.replace(tmp, path)
                scores = self._compute_scores(models, vocab,
                                              table if table.mode == "frozen_pretrained"
                                              else None)
                self._model = _ModelState(
                    models=models, vocab=vocab,
                    table=table if table.mode == "frozen_pretrained" else None,
                    scores=scores)
                self._rounds.append({
                    "index": len(self._rounds),
                    "trained_count": trained_count,
                    "labeled_count_after": len(self._labeled),
                    "completed_at": _now_iso(),
                    "eval": {task: evals[task].to_dict() for task in TASKS},
                })
                self._submissions_since_retrain = 0
                self._save_state()
                self._train_status = {"status": "done", "detail": None}
        except Exception as exc:  # surfaced via /train/status
            with self._lock:
                self._train_status = {"status": "failed", "detail": str(exc)}

    def _evaluate(self, models, vocab, table, validation) -> dict[str, EvalReport]:
        examples = []
        for doc_id, (aspect, sentiment) in validation:
            seq = tokenize(self._texts[doc_id], doc_id, self.config.max_seq_len)
            examples.append(LabeledExample(seq=seq, aspect=aspect,
                                           sentiment=sentiment))
        return {task: evaluate_model(models[task], examples, task, vocab, table,
                                     threshold=self.config.threshold)
                for task in TASKS}

    def _compute_scores(self, models, vocab, table):
        ids = sorted(self._unlabeled)
        if not ids:
            return {}
        seqs = [tokenize(self._texts[i], i, self.config.max_seq_len) for i in ids]
        preds = {task: predict_batch(models[task], seqs, vocab, table)
                 for task in TASKS}
        driver = preds[self.config.driver_task]
        scores = {}
        for j, doc_id in enumerate(ids):
            scores[doc_id] = (float(1.0 - driver[j].max()),
                              [float(v) for v in preds["aspect"][j]],
                              [float(v) for v in preds["sentiment"][j]])
        return scores

    def train_status(self) -> dict:
        with self._lock:
            return dict(self._train_status)

    # -- reporting ----------------------------------------------------------

    def counts(self) -> dict:
        with self._lock:
            return {"labeled": len(self._labeled),
                    "unlabeled": len(self._unlabeled),
                    "pending": len(self._active_leases()),
                    "validation": len(self._validation)}

    def get_metrics(self) -> dict:
        with self._lock:
            if not self._rounds:
                raise NoRoundsYetError("no completed training round yet")
            latest = self._rounds[-1]
            return {"rounds": len(self._rounds), "counts": self.counts(),
                    "aspect": latest["eval"]["aspect"],
                    "sentiment": latest["eval"]["sentiment"]}

    def get_curve(self) -> LearningCurve:
        with self._lock:
            if not self._rounds:
                raise NoRoundsYetError("no completed training round yet")
            points = {task: [] for task in TASKS}
            for entry in self._rounds:
                for task in TASKS:
                    rep = entry["eval"][task]
                    points[task].append((entry["trained_count"],
                                         rep["micro_precision"],
                                         rep["micro_recall"],
                                         rep["micro_f1"]))
            return LearningCurve(setting="live", seed=self.config.seed,
                                 points=points)
