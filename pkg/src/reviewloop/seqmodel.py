"""Two-layer LSTM classifier with a fully connected sigmoid head.

Forward, loss, and backpropagation through time are implemented directly on
numpy arrays so the analytic gradients can be validated against central
finite differences. Training uses mini-batch Adam with global gradient-norm
clipping; every run is deterministic given (data, hyperparameters, table).

Sequences inside a mini-batch are padded to the batch maximum and the head
reads each sequence's own last hidden state, so padding steps contribute
nothing to predictions or gradients.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit as _sigmoid

from .embeddings import PAD_INDEX, TRAINABLE, EmbeddingTable, TokenSequence, Vocabulary
from .errors import (
    EmptyPoolError,
    EmptySequenceError,
    NumericError,
    ShapeError,
)

# Keeps forward outputs strictly inside (0, 1); the loss applies its own,
# much coarser clamp.
PRED_EPS = 1e-12
LOSS_EPS = 1e-7

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LabelVector:
    """Binary target per class, aligned with an ordered class-name taxonomy."""

    values: np.ndarray
    taxonomy: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] != len(self.taxonomy):
            raise ShapeError("label vector length must equal taxonomy size")
        if not np.all((v == 0.0) | (v == 1.0)):
            raise ValueError("label entries must be exactly 0 or 1")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_names(cls, names, taxonomy: tuple[str, ...]) -> "LabelVector":
        v = np.zeros(len(taxonomy), dtype=np.float64)
        pos = {name: i for i, name in enumerate(taxonomy)}
        for name in names:
            v[pos[name]] = 1.0
        return cls(values=v, taxonomy=taxonomy)

    def names(self) -> list[str]:
        return [c for c, bit in zip(self.taxonomy, self.values) if bit == 1.0]


@dataclass(frozen=True)
class PredictionVector:
    """Per-class sigmoid outputs, each strictly inside (0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ShapeError("prediction vector must be one-dimensional")
        if not np.all((v > 0.0) & (v < 1.0)):
            raise ValueError("predictions must lie strictly in (0, 1)")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Hyperparams:
    hidden_size: int = 64
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    clip_norm: float = 5.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        for name in ("hidden_size", "learning_rate", "epochs", "batch_size",
                     "clip_norm", "adam_beta1", "adam_beta2", "adam_eps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(**d)


@dataclass
class LstmLayerParams:
    """Stacked gate weights in i, f, g, o order along the 4H axis."""

    w_x: np.ndarray  # (4H, D_in)
    w_h: np.ndarray  # (4H, H)
    b: np.ndarray    # (4H,)


@dataclass
class ModelParams:
    hidden_size: int
    n_classes: int
    input_dim: int
    layers: list[LstmLayerParams]
    w_out: np.ndarray  # (C, H)
    b_out: np.ndarray  # (C,)
    embedding: EmbeddingTable | None = None  # set when trained jointly

    def copy(self) -> "ModelParams":
        emb = None
        if self.embedding is not None:
            emb = EmbeddingTable(self.embedding.matrix.copy(), self.embedding.dim,
                                 self.embedding.mode)
        return ModelParams(
            hidden_size=self.hidden_size,
            n_classes=self.n_classes,
            input_dim=self.input_dim,
            layers=[LstmLayerParams(l.w_x.copy(), l.w_h.copy(), l.b.copy())
                    for l in self.layers],
            w_out=self.w_out.copy(),
            b_out=self.b_out.copy(),
            embedding=emb,
        )


@dataclass
class Gradients:
    """Same shape-tree as the ModelParams arrays, keyed by parameter name."""

    arrays: dict[str, np.ndarray]
    d_embedding: np.ndarray | None = None


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    n_entries: int
    tolerance: float
    passed: bool


def param_items(params: ModelParams) -> list[tuple[str, np.ndarray]]:
    """Flat (name, array) view of the LSTM and head parameters."""
    items = []
    for i, layer in enumerate(params.layers):
        items.append((f"l{i}.w_x", layer.w_x))
        items.append((f"l{i}.w_h", layer.w_h))
        items.append((f"l{i}.b", layer.b))
    items.append(("w_out", params.w_out))
    items.append(("b_out", params.b_out))
    return items


def init_params(hyper: Hyperparams, input_dim: int, n_classes: int,
                rng: np.random.Generator) -> ModelParams:
    """Fresh uniform initialization; forget-gate biases start at 1."""
    h = hyper.hidden_size
    layers = []
    for layer_idx in range(2):
        d_in = input_dim if layer_idx == 0 else h
        bound_x = 1.0 / np.sqrt(d_in)
        bound_h = 1.0 / np.sqrt(h)
        w_x = rng.uniform(-bound_x, bound_x, size=(4 * h, d_in))
        w_h = rng.uniform(-bound_h, bound_h, size=(4 * h, h))
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0
        layers.append(LstmLayerParams(w_x=w_x, w_h=w_h, b=b))
    bound = 1.0 / np.sqrt(h)
    w_out = rng.uniform(-bound, bound, size=(n_classes, h))
    b_out = np.zeros(n_classes)
    return ModelParams(hidden_size=h, n_classes=n_classes, input_dim=input_dim,
                       layers=layers, w_out=w_out, b_out=b_out)


def _layer_forward(layer: LstmLayerParams, x_seq: np.ndarray):
    """Run one LSTM layer over x_seq (T, B, D_in); returns (h_seq, cache).

    The input projection for all steps happens in one matmul; the time loop
    only carries the recurrence.
    """
    t_max, batch, d_in = x_seq.shape
    h_size = layer.w_h.shape[1]
    x_proj = (x_seq.reshape(t_max * batch, d_in) @ layer.w_x.T).reshape(
        t_max, batch, 4 * h_size) + layer.b
    h = np.zeros((batch, h_size))
    c = np.zeros((batch, h_size))
    gates = np.empty((t_max, batch, 4 * h_size))
    cells = np.empty((t_max, batch, h_size))
    tanh_c = np.empty((t_max, batch, h_size))
    h_seq = np.empty((t_max, batch, h_size))
    for t in range(t_max):
        a = x_proj[t] + h @ layer.w_h.T
        gt = gates[t]
        _sigmoid(a[:, :2 * h_size], out=gt[:, :2 * h_size])
        np.tanh(a[:, 2 * h_size:3 * h_size], out=gt[:, 2 * h_size:3 * h_size])
        _sigmoid(a[:, 3 * h_size:], out=gt[:, 3 * h_size:])
        i = gt[:, :h_size]
        f = gt[:, h_size:2 * h_size]
        g = gt[:, 2 * h_size:3 * h_size]
        o = gt[:, 3 * h_size:]
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        cells[t] = c
        tanh_c[t] = tc
        h_seq[t] = h
    cache = {"x": x_seq, "gates": gates, "cells": cells, "tanh_c": tanh_c,
             "h_seq": h_seq}
    return h_seq, cache


def _layer_backward(layer: LstmLayerParams, cache: dict, d_h_seq: np.ndarray):
    """BPTT for one layer given upstream gradients on every hidden output.

    Only the recurrent carry stays inside the time loop; the per-step gate
    gradients are collected and reduced into the weight gradients with one
    matmul each afterwards.
    """
    x_seq = cache["x"]
    gates = cache["gates"]
    cells = cache["cells"]
    tanh_c = cache["tanh_c"]
    h_seq = cache["h_seq"]
    t_max, batch, h_size = h_seq.shape

    # Gate nonlinearity derivatives, vectorized across all steps: s(1-s) for
    # the sigmoid gates and 1-g^2 for the candidate block.
    deriv = gates * (1.0 - gates)
    g_block = gates[:, :, 2 * h_size:3 * h_size]
    deriv[:, :, 2 * h_size:3 * h_size] = 1.0 - g_block ** 2
    one_minus_tc2 = 1.0 - tanh_c ** 2

    da_all = np.empty((t_max, batch, 4 * h_size))
    dh_carry = np.zeros((batch, h_size))
    dc_carry = np.zeros((batch, h_size))

    for t in range(t_max - 1, -1, -1):
        i = gates[t, :, :h_size]
        f = gates[t, :, h_size:2 * h_size]
        g = gates[t, :, 2 * h_size:3 * h_size]
        o = gates[t, :, 3 * h_size:]
        c_prev = cells[t - 1] if t > 0 else np.zeros((batch, h_size))

        dh = d_h_seq[t] + dh_carry
        dc = dc_carry + dh * o * one_minus_tc2[t]

        da = da_all[t]
        da[:, :h_size] = dc * g * deriv[t, :, :h_size]
        da[:, h_size:2 * h_size] = dc * c_prev * deriv[t, :, h_size:2 * h_size]
        da[:, 2 * h_size:3 * h_size] = dc * i * deriv[t, :, 2 * h_size:3 * h_size]
        da[:, 3 * h_size:] = dh * tanh_c[t] * deriv[t, :, 3 * h_size:]

        dh_carry = da @ layer.w_h
        dc_carry = dc * f

    da_flat = da_all.reshape(t_max * batch, 4 * h_size)
    h_prev_all = np.concatenate(
        [np.zeros((1, batch, h_size)), h_seq[:-1]], axis=0)
    d_w_x = da_flat.T @ x_seq.reshape(t_max * batch, -1)
    d_w_h = da_flat.T @ h_prev_all.reshape(t_max * batch, h_size)
    d_b = da_flat.sum(axis=0)
    d_x = (da_flat @ layer.w_x).reshape(x_seq.shape)

    return {"w_x": d_w_x, "w_h": d_w_h, "b": d_b}, d_x


def _forward_batch(params: ModelParams, x_seq: np.ndarray, lengths: np.ndarray,
                   with_cache: bool = False):
    """Predictions (B, C) for padded input (T, B, D); optionally keep caches."""
    h1, cache1 = _layer_forward(params.layers[0], x_seq)
    h2, cache2 = _layer_forward(params.layers[1], h1)
    batch_idx = np.arange(x_seq.shape[1])
    h_last = h2[lengths - 1, batch_idx]
    z = h_last @ params.w_out.T + params.b_out
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite value in forward pass")
    preds = np.clip(_sigmoid(z), PRED_EPS, 1.0 - PRED_EPS)
    if not with_cache:
        return preds, None
    return preds, {"cache1": cache1, "cache2": cache2, "h_last": h_last,
                   "lengths": lengths, "batch_idx": batch_idx}


def forward(params: ModelParams, embedded: np.ndarray) -> PredictionVector:
    """Classify one embedded sequence (T, D)."""
    embedded = np.asarray(embedded, dtype=np.float64)
    if embedded.ndim != 2 or embedded.shape[0] == 0:
        raise EmptySequenceError("forward requires a non-empty T x D input")
    if embedded.shape[1] != params.input_dim:
        raise ShapeError(
            f"input dim {embedded.shape[1]} does not match model dim {params.input_dim}")
    x_seq = embedded[:, None, :]
    preds, _ = _forward_batch(params, x_seq, np.array([embedded.shape[0]]))
    return PredictionVector(values=preds[0])


def multi_label_loss(pred: PredictionVector, label: LabelVector) -> float:
    """Negated sum of per-class binary cross-entropy terms."""
    p = pred.values
    y = label.values
    if p.shape != y.shape:
        raise ShapeError(f"prediction length {p.shape} vs label length {y.shape}")
    p = np.clip(p, LOSS_EPS, 1.0 - LOSS_EPS)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum())


def _loss_matrix(preds: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-sample BCE sums for (B, C) predictions and targets."""
    p = np.clip(preds, LOSS_EPS, 1.0 - LOSS_EPS)
    return -(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p)).sum(axis=1)


def _backward_batch(params: ModelParams, x_seq: np.ndarray, lengths: np.ndarray,
                    targets: np.ndarray):
    """Mean loss, parameter gradients, and input gradients for one mini-batch."""
    batch = x_seq.shape[1]
    preds, cache = _forward_batch(params, x_seq, lengths, with_cache=True)
    mean_loss = float(_loss_matrix(preds, targets).mean())

    # Composite sigmoid-BCE gradient at the head pre-activation.
    dz = (preds - targets) / batch
    d_w_out = dz.T @ cache["h_last"]
    d_b_out = dz.sum(axis=0)

    d_h2 = np.zeros_like(cache["cache2"]["h_seq"])
    d_h2[lengths - 1, cache["batch_idx"]] = dz @ params.w_out

    grads2, d_h1 = _layer_backward(params.layers[1], cache["cache2"], d_h2)
    grads1, d_x = _layer_backward(params.layers[0], cache["cache1"], d_h1)

    arrays = {
        "l0.w_x": grads1["w_x"], "l0.w_h": grads1["w_h"], "l0.b": grads1["b"],
        "l1.w_x": grads2["w_x"], "l1.w_h": grads2["w_h"], "l1.b": grads2["b"],
        "w_out": d_w_out, "b_out": d_b_out,
    }
    return mean_loss, arrays, d_x


def _pad_batch(embedded_list: list[np.ndarray]):
    lengths = np.array([e.shape[0] for e in embedded_list], dtype=np.int64)
    t_max = int(lengths.max())
    dim = embedded_list[0].shape[1]
    x_seq = np.zeros((t_max, len(embedded_list), dim))
    for b, e in enumerate(embedded_list):
        x_seq[:e.shape[0], b] = e
    return x_seq, lengths


def backward(params: ModelParams,
             batch: list[tuple[np.ndarray, LabelVector]]) -> tuple[float, Gradients]:
    """Gradients of the mean multi-label loss over a batch of embedded sequences."""
    if not batch:
        raise EmptyPoolError("backward requires a non-empty batch")
    embedded_list = [np.asarray(e, dtype=np.float64) for e, _ in batch]
    for e in embedded_list:
        if e.ndim != 2 or e.shape[0] == 0:
            raise EmptySequenceError("every batch item must be a non-empty T x D matrix")
    targets = np.stack([lv.values for _, lv in batch])
    x_seq, lengths = _pad_batch(embedded_list)
    mean_loss, arrays, _ = _backward_batch(params, x_seq, lengths, targets)
    for name, g in arrays.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
    return mean_loss, Gradients(arrays=arrays)


def _global_norm(arrays) -> float:
    total = 0.0
    for g in arrays:
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


class _AdamState:
    def __init__(self, shapes: dict[str, tuple]):
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.t = 0

    def update(self, name: str, grad: np.ndarray, hyper: Hyperparams) -> np.ndarray:
        b1, b2 = hyper.adam_beta1, hyper.adam_beta2
        self.m[name] = b1 * self.m[name] + (1.0 - b1) * grad
        self.v[name] = b2 * self.v[name] + (1.0 - b2) * grad * grad
        m_hat = self.m[name] / (1.0 - b1 ** self.t)
        v_hat = self.v[name] / (1.0 - b2 ** self.t)
        return hyper.learning_rate * m_hat / (np.sqrt(v_hat) + hyper.adam_eps)


def train(pool_labeled: list[tuple[TokenSequence, LabelVector]],
          hyper: Hyperparams,
          table: EmbeddingTable,
          vocab: Vocabulary,
          on_epoch=None) -> ModelParams:
    """Train a fresh model on the labeled pool.

    Mini-batch Adam with per-epoch reshuffling from the run seed and global
    gradient-norm clipping. Frozen tables are used read-only; trainable
    tables are copied and the copy is updated jointly, so the caller's table
    is never mutated. Deterministic given (data, hyper, table).
    """
    if not pool_labeled:
        raise EmptyPoolError("cannot train on an empty labeled pool")
    rng = np.random.default_rng(hyper.seed)
    n_classes = len(pool_labeled[0][1].taxonomy)
    trainable = table.mode == TRAINABLE
    emb_matrix = table.matrix.copy() if trainable else table.matrix

    params = init_params(hyper, table.dim, n_classes, rng)
    index_lists = [vocab.indices(seq) for seq, _ in pool_labeled]
    targets_all = np.stack([lv.values for _, lv in pool_labeled])

    shapes = {name: arr.shape for name, arr in param_items(params)}
    if trainable:
        shapes["emb"] = emb_matrix.shape
    adam = _AdamState(shapes)
    n = len(pool_labeled)

    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, hyper.batch_size):
            sel = order[start:start + hyper.batch_size]
            idx_batch = [index_lists[j] for j in sel]
            lengths = np.array([len(ix) for ix in idx_batch], dtype=np.int64)
            t_max = int(lengths.max())
            x_seq = np.zeros((t_max, len(sel), table.dim))
            for b, ix in enumerate(idx_batch):
                x_seq[:len(ix), b] = emb_matrix[ix]
            mean_loss, arrays, d_x = _backward_batch(
                params, x_seq, lengths, targets_all[sel])
            loss_sum += mean_loss * len(sel)

            if trainable:
                d_emb = np.zeros_like(emb_matrix)
                for b, ix in enumerate(idx_batch):
                    np.add.at(d_emb, ix, d_x[:len(ix), b])
                d_emb[PAD_INDEX] = 0.0
                arrays = dict(arrays)
                arrays["emb"] = d_emb

            norm = _global_norm(arrays.values())
            if not np.isfinite(norm):
                raise NumericError("non-finite gradient norm")
            if norm > hyper.clip_norm:
                scale = hyper.clip_norm / norm
                arrays = {k: g * scale for k, g in arrays.items()}

            adam.t += 1
            tree = dict(param_items(params))
            for name, g in arrays.items():
                target = emb_matrix if name == "emb" else tree[name]
                target -= adam.update(name, g, hyper)

        if on_epoch is not None:
            on_epoch(epoch, loss_sum / n)

    if trainable:
        params.embedding = EmbeddingTable(matrix=emb_matrix, dim=table.dim,
                                          mode=TRAINABLE)
    return params


def predict_batch(params: ModelParams, seqs: list[TokenSequence],
                  vocab: Vocabulary, table: EmbeddingTable | None = None,
                  chunk_size: int = 256) -> np.ndarray:
    """(N, C) prediction matrix; uses the model's own table when it has one."""
    emb = params.embedding if params.embedding is not None else table
    if emb is None:
        raise ValueError("model has no embedding table and none was provided")
    out = np.empty((len(seqs), params.n_classes))
    for start in range(0, len(seqs), chunk_size):
        chunk = seqs[start:start + chunk_size]
        embedded = [emb.matrix[vocab.indices(s)] for s in chunk]
        x_seq, lengths = _pad_batch(embedded)
        preds, _ = _forward_batch(params, x_seq, lengths)
        out[start:start + len(chunk)] = preds
    return out


def gradient_check(params: ModelParams,
                   sample: tuple[np.ndarray, LabelVector],
                   tolerance: float = 1e-4,
                   step: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Perturbs every LSTM and head parameter entry; intended for tiny models
    in double precision.
    """
    embedded, label = sample
    _, grads = backward(params, [sample])

    def loss_at(p: ModelParams) -> float:
        return multi_label_loss(forward(p, embedded), label)

    max_rel = 0.0
    worst = ""
    n_entries = 0
    work = params.copy()
    tree = dict(param_items(work))
    for name, arr in tree.items():
        analytic = grads.arrays[name]
        flat = arr.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = loss_at(work)
            flat[j] = orig - step
            down = loss_at(work)
            flat[j] = orig
            numeric = (up - down) / (2.0 * step)
            a = analytic.reshape(-1)[j]
            # The floor keeps finite-difference noise on near-zero entries
            # (truncation error ~ step^2) from dominating the ratio.
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            n_entries += 1
            if rel > max_rel:
                max_rel = rel
                worst = f"{name}[{j}]"
    return GradCheckReport(max_rel_error=max_rel, worst_param=worst,
                           n_entries=n_entries, tolerance=tolerance,
                           passed=max_rel < tolerance)


def save_checkpoint(params: ModelParams, hyper: Hyperparams, path) -> None:
    """Versioned npz dump of hyperparameters plus all weight arrays."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "hidden_size": params.hidden_size,
        "n_classes": params.n_classes,
        "input_dim": params.input_dim,
        "hyper": asdict(hyper),
        "has_embedding": params.embedding is not None,
        "embedding_mode": params.embedding.mode if params.embedding else None,
    }
    arrays = {name.replace(".", "_"): arr for name, arr in param_items(params)}
    if params.embedding is not None:
        arrays["emb_matrix"] = params.embedding.matrix
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[ModelParams, Hyperparams]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        layers = [
            LstmLayerParams(w_x=data[f"l{i}_w_x"], w_h=data[f"l{i}_w_h"],
                            b=data[f"l{i}_b"])
            for i in range(2)
        ]
        embedding = None
        if meta["has_embedding"]:
            m = data["emb_matrix"]
            embedding = EmbeddingTable(matrix=m, dim=m.shape[1],
                                       mode=meta["embedding_mode"])
        params = ModelParams(
            hidden_size=meta["hidden_size"],
            n_classes=meta["n_classes"],
            input_dim=meta["input_dim"],
            layers=layers,
            w_out=data["w_out"],
            b_out=data["b_out"],
            embedding=embedding,
        )
    return params, Hyperparams.from_dict(meta["hyper"])
