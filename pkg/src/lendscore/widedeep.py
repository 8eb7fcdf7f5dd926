"""Wide-and-deep network in numpy, trained by plain mini-batch SGD.

The output pre-activation is

    s = sum(wide[active]) + w_deep . a_last + bias

where ``a_last`` is the last ReLU layer of an MLP fed with the standardized
dense features concatenated with one embedding row per embedded feature.
Classification returns sigmoid(s) (the probability of Default), regression
returns s.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteGradient, ShapeMismatch, TaskMismatch, TrainingError

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12


class Task(str, enum.Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class Loss(str, enum.Enum):
    CROSS_ENTROPY = "cross_entropy"
    MSE = "mse"


class Components(str, enum.Enum):
    WIDE = "wide"
    DEEP = "deep"
    WIDE_DEEP = "wide_deep"


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 1000
    batch_size: int = 100
    learning_rate: float = 0.002
    dropout_rate: float = 0.2
    hidden_layers: tuple = (100, 50, 10)
    seed: int = 0
    loss: Loss = Loss.CROSS_ENTROPY
    components: Components = Components.WIDE_DEEP
    # "sum": gradient of the batch-summed loss (the TF1 canned-estimator
    # convention); "mean": gradient of the batch-mean loss
    reduction: str = "sum"

    def __post_init__(self):
        if self.reduction not in ("sum", "mean"):
            raise ValueError("reduction must be 'sum' or 'mean'")
        object.__setattr__(self, "loss", Loss(self.loss))
        object.__setattr__(self, "components", Components(self.components))
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        if any(w <= 0 for w in self.hidden_layers):
            raise ValueError("hidden layer widths must be positive")
        if self.batch_size < 1 or self.steps < 0:
            raise ValueError("batch_size must be >= 1 and steps >= 0")

    @property
    def task(self):
        return Task.CLASSIFICATION if self.loss is Loss.CROSS_ENTROPY else Task.REGRESSION


@dataclass
class ModelParams:
    task: Task
    wide: np.ndarray
    embeddings: dict
    weights: list  # W^l, shape (out, in)
    biases: list
    w_deep: np.ndarray
    bias: np.ndarray  # shape (1,)
    use_wide: bool = True
    use_deep: bool = True
    embedded: tuple = ()

    def families(self):
        """Ordered (name, array) pairs of every trainable array in use."""
        out = []
        if self.use_wide:
            out.append(("wide", self.wide))
        if self.use_deep:
            out += [(f"emb:{f}", self.embeddings[f]) for f in self.embedded]
            for l, (W, b) in enumerate(zip(self.weights, self.biases)):
                out += [(f"W{l}", W), (f"b{l}", b)]
            out.append(("w_deep", self.w_deep))
        out.append(("bias", self.bias))
        return out

    def copy(self):
        return ModelParams(
            task=self.task,
            wide=self.wide.copy(),
            embeddings={k: v.copy() for k, v in self.embeddings.items()},
            weights=[W.copy() for W in self.weights],
            biases=[b.copy() for b in self.biases],
            w_deep=self.w_deep.copy(),
            bias=self.bias.copy(),
            use_wide=self.use_wide,
            use_deep=self.use_deep,
            embedded=self.embedded,
        )

    def all_finite(self):
        return all(np.all(np.isfinite(a)) for _, a in self.families())


def init_params(schema, config):
    """Gaussian init with std 1/sqrt(fan_in); biases and wide weights start at 0.

    An embedding lookup has fan-in 1, so embedding tables are unit normal.
    """
    rng = np.random.default_rng(config.seed)
    use_wide = config.components is not Components.DEEP
    use_deep = config.components is not Components.WIDE
    embedded = schema.embedded
    embeddings, weights, biases = {}, [], []
    w_deep = np.zeros(0)
    if use_deep:
        for f, dim in schema.embedding_specs:
            embeddings[f] = rng.normal(0.0, 1.0, (schema.vocab_size(f), dim))
        width = schema.deep_input_dim
        for out in config.hidden_layers:
            weights.append(rng.normal(0.0, 1.0 / np.sqrt(width), (out, width)))
            biases.append(np.zeros(out))
            width = out
        w_deep = rng.normal(0.0, 1.0 / np.sqrt(width), width)
    return ModelParams(
        task=config.task,
        wide=np.zeros(schema.wide_dim if use_wide else 0),
        embeddings=embeddings,
        weights=weights,
        biases=biases,
        w_deep=w_deep,
        bias=np.zeros(1),
        use_wide=use_wide,
        use_deep=use_deep,
        embedded=embedded if use_deep else (),
    )


def sigmoid(s):
    out = np.empty_like(s, dtype=float)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class ForwardTrace:
    deep_input: np.ndarray = None
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)  # activations after dropout
    masks: list = field(default_factory=list)
    logit: np.ndarray = None


def _check_shapes(params, wide_idx, dense, emb_ids):
    if params.use_wide and wide_idx.size and wide_idx.max() >= len(params.wide):
        raise ShapeMismatch(f"wide index {wide_idx.max()} outside wide_dim {len(params.wide)}")
    if params.use_deep:
        expected = params.weights[0].shape[1] if params.weights else len(params.w_deep)
        got = dense.shape[1] + sum(params.embeddings[f].shape[1] for f in params.embedded)
        if got != expected:
            raise ShapeMismatch(f"deep input has {got} columns, model expects {expected}")
        if emb_ids.shape[1] != len(params.embedded):
            raise ShapeMismatch(f"{emb_ids.shape[1]} embedding ids for {len(params.embedded)} tables")
        for j, f in enumerate(params.embedded):
            if emb_ids.size and emb_ids[:, j].max() >= len(params.embeddings[f]):
                raise ShapeMismatch(f"embedding id outside the {f} table")


def logits(params, wide_idx, dense, emb_ids, rng=None, dropout_rate=0.0, trace=None):
    """Pre-activation s for a batch. Dropout applies only when ``rng`` is given."""
    n = len(dense) if dense is not None else len(wide_idx)
    s = np.full(n, params.bias[0])
    if params.use_wide:
        s = s + params.wide[wide_idx].sum(axis=1)
    if params.use_deep:
        parts = [dense] + [params.embeddings[f][emb_ids[:, j]] for j, f in enumerate(params.embedded)]
        a = np.concatenate(parts, axis=1)
        if trace is not None:
            trace.deep_input = a
        for W, b in zip(params.weights, params.biases):
            z = a @ W.T + b
            a = np.maximum(z, 0.0)
            mask = None
            if rng is not None and dropout_rate > 0:
                mask = (rng.random(a.shape) >= dropout_rate) / (1.0 - dropout_rate)
                a = a * mask
            if trace is not None:
                trace.pre.append(z)
                trace.post.append(a)
                trace.masks.append(mask)
        s = s + a @ params.w_deep
    if trace is not None:
        trace.logit = s
    return s


def output(params, s):
    return sigmoid(s) if params.task is Task.CLASSIFICATION else s


def forward(params, wide, deep, mode="eval", rng=None, dropout_rate=0.0):
    """Score one (WideVector, DeepVector) pair.

    In ``"train"`` mode dropout is drawn from ``rng`` and the ForwardTrace is
    returned alongside the output; ``"eval"`` returns the output alone.
    """
    wide_idx = np.array([wide.active_indices], dtype=np.int64)
    dense = np.array([deep.dense], dtype=float)
    emb_ids = np.array([[deep.embedding_ids[f] for f in params.embedded]], dtype=np.int64).reshape(1, -1)
    if params.use_wide and wide.wide_dim != len(params.wide):
        raise ShapeMismatch(f"wide_dim {wide.wide_dim} != model {len(params.wide)}")
    _check_shapes(params, wide_idx, dense, emb_ids)
    if mode == "train":
        trace = ForwardTrace()
        s = logits(params, wide_idx, dense, emb_ids, rng=rng, dropout_rate=dropout_rate, trace=trace)
        return float(output(params, s)[0]), trace
    return float(output(params, logits(params, wide_idx, dense, emb_ids))[0])


def loss(out, label, kind):
    """Per-sample loss; ``out`` is a probability for cross-entropy, a value for MSE."""
    out = np.asarray(out, dtype=float)
    label = np.asarray(label, dtype=float)
    if Loss(kind) is Loss.CROSS_ENTROPY:
        p = np.clip(out, PROB_CLAMP, 1.0 - PROB_CLAMP)
        return -(label * np.log(p) + (1.0 - label) * np.log(1.0 - p))
    return (out - label) ** 2


def _loss_and_dlogit(params, s, y, kind):
    if Loss(kind) is Loss.CROSS_ENTROPY:
        p = sigmoid(s)
        per = loss(p, y, kind)
        inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
        return per, np.where(inside, p - y, 0.0)
    return loss(s, y, kind), 2.0 * (s - y)


@dataclass
class Gradients:
    """Dense gradients for layers; (rows, values) pairs for wide and embeddings."""

    wide_rows: np.ndarray = None
    wide_vals: np.ndarray = None
    emb: dict = field(default_factory=dict)  # name -> (rows, values (r, dim))
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    w_deep: np.ndarray = None
    bias: np.ndarray = None

    def arrays(self):
        out = [self.bias]
        if self.wide_vals is not None:
            out.append(self.wide_vals)
        out += [v for _, v in self.emb.values()]
        out += self.weights + self.biases
        if self.w_deep is not None:
            out.append(self.w_deep)
        return out

    def all_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def dense(self, params):
        """Full-shape gradient per family name, matching ModelParams.families()."""
        out = {}
        if params.use_wide:
            g = np.zeros_like(params.wide)
            np.add.at(g, self.wide_rows, self.wide_vals)
            out["wide"] = g
        if params.use_deep:
            for f in params.embedded:
                g = np.zeros_like(params.embeddings[f])
                rows, vals = self.emb[f]
                np.add.at(g, rows, vals)
                out[f"emb:{f}"] = g
            for l, (gW, gb) in enumerate(zip(self.weights, self.biases)):
                out[f"W{l}"], out[f"b{l}"] = gW, gb
            out["w_deep"] = self.w_deep
        out["bias"] = self.bias
        return out


def _sparse_sum(rows, vals):
    """Sum values sharing a row; returns sorted unique rows."""
    uniq, inv = np.unique(rows, return_inverse=True)
    if vals.ndim == 1:
        return uniq, np.bincount(inv, weights=vals, minlength=len(uniq))
    out = np.zeros((len(uniq), vals.shape[1]))
    np.add.at(out, inv, vals)
    return uniq, out


def loss_and_grad(params, wide_idx, dense, emb_ids, y, kind, rng=None, dropout_rate=0.0, reduction="mean"):
    """Mean batch loss, and the gradient of the mean or summed batch loss."""
    trace = ForwardTrace()
    s = logits(params, wide_idx, dense, emb_ids, rng=rng, dropout_rate=dropout_rate, trace=trace)
    per, g = _loss_and_dlogit(params, s, y, kind)
    if reduction == "mean":
        g = g / len(s)
    grads = Gradients(bias=np.array([g.sum()]))
    if params.use_wide:
        nb = wide_idx.shape[1]
        grads.wide_rows, grads.wide_vals = _sparse_sum(wide_idx.ravel(), np.repeat(g, nb))
    if params.use_deep:
        a_last = trace.post[-1] if trace.post else trace.deep_input
        grads.w_deep = a_last.T @ g
        da = np.outer(g, params.w_deep)
        gW, gb = [None] * len(params.weights), [None] * len(params.weights)
        for l in range(len(params.weights) - 1, -1, -1):
            if trace.masks[l] is not None:
                da = da * trace.masks[l]
            dz = da * (trace.pre[l] > 0)
            a_prev = trace.post[l - 1] if l > 0 else trace.deep_input
            gW[l] = dz.T @ a_prev
            gb[l] = dz.sum(axis=0)
            da = dz @ params.weights[l]
        grads.weights, grads.biases = gW, gb
        col = dense.shape[1]
        for j, f in enumerate(params.embedded):
            dim = params.embeddings[f].shape[1]
            grads.emb[f] = _sparse_sum(emb_ids[:, j], da[:, col : col + dim])
            col += dim
    return float(per.mean()), grads


def apply_gradients(params, grads, lr):
    """In-place SGD step; wide and embedding rows not in the batch are untouched."""
    params.bias -= lr * grads.bias
    if params.use_wide:
        params.wide[grads.wide_rows] -= lr * grads.wide_vals
    if params.use_deep:
        for f in params.embedded:
            rows, vals = grads.emb[f]
            params.embeddings[f][rows] -= lr * vals
        for W, b, gW, gb in zip(params.weights, params.biases, grads.weights, grads.biases):
            W -= lr * gW
            b -= lr * gb
        params.w_deep -= lr * grads.w_deep


def targets_for(data, task):
    return data.y if Task(task) is Task.CLASSIFICATION else data.irr


def train_step(params, wide_idx, dense, emb_ids, y, config, rng, step=0):
    """One SGD step on a batch; returns the batch mean loss (before the update)."""
    if len(y) == 0:
        raise ValueError("empty batch")
    batch_loss, grads = loss_and_grad(
        params,
        wide_idx,
        dense,
        emb_ids,
        y,
        config.loss,
        rng=rng,
        dropout_rate=config.dropout_rate,
        reduction=config.reduction,
    )
    if not grads.all_finite() or not np.isfinite(batch_loss):
        raise NonFiniteGradient(step)
    apply_gradients(params, grads, config.learning_rate)
    if not params.all_finite():
        raise NonFiniteGradient(step, "parameters")
    return batch_loss


@dataclass
class TrainResult:
    params: ModelParams
    losses: np.ndarray
    validation: list = field(default_factory=list)  # (step, loss) pairs


def evaluate_loss(params, data, kind):
    y = targets_for(data, params.task)
    s = logits(params, data.wide_idx, data.dense, data.emb_ids)
    return float(loss(output(params, s), y, kind).mean())


def train(params, data, config, validation=None, validate_every=100):
    """Run ``config.steps`` SGD steps on batches drawn without replacement.

    ``params`` is not modified; the trained copy is returned with the
    per-step mean batch loss.
    """
    if params.task is not config.task:
        raise TaskMismatch(f"{config.loss.value} loss on a {params.task.value} model")
    y_all = targets_for(data, params.task)
    if np.isnan(y_all).any():
        raise TrainingError("training targets contain unlabeled rows")
    n = len(data)
    if n < config.batch_size:
        raise TrainingError(f"dataset has {n} rows, fewer than batch_size {config.batch_size}")
    _check_shapes(params, data.wide_idx, data.dense, data.emb_ids)
    params = params.copy()
    rng = np.random.default_rng([config.seed, 1])
    losses = np.empty(config.steps)
    val = []
    for step in range(config.steps):
        idx = rng.choice(n, size=config.batch_size, replace=False)
        losses[step] = train_step(
            params, data.wide_idx[idx], data.dense[idx], data.emb_ids[idx], y_all[idx], config, rng, step
        )
        if validation is not None and (step + 1) % validate_every == 0:
            val.append((step + 1, evaluate_loss(params, validation, config.loss)))
    return TrainResult(params, losses, val)


def predict(params, data):
    s = logits(params, data.wide_idx, data.dense, data.emb_ids)
    return output(params, s)


def predict_pd(params, data):
    """Probability of Default per row (eval mode, no dropout)."""
    if params.task is not Task.CLASSIFICATION:
        raise TaskMismatch("predict_pd needs a classification model")
    _check_shapes(params, data.wide_idx, data.dense, data.emb_ids)
    return predict(params, data)


def predict_irr(params, data):
    if params.task is not Task.REGRESSION:
        raise TaskMismatch("predict_irr needs a regression model")
    _check_shapes(params, data.wide_idx, data.dense, data.emb_ids)
    return predict(params, data)


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    n_coordinates: int
    per_family: dict


def _family_coords(name, arr, grad, rng, n, active_rows=None):
    """Pick ``n`` flat coordinates; for sparse families half come from active rows."""
    size = arr.size
    if size == 0:
        return np.zeros(0, dtype=np.int64)
    picks = []
    if active_rows is not None and len(active_rows):
        width = arr.shape[1] if arr.ndim == 2 else 1
        flat_active = (np.asarray(active_rows)[:, None] * width + np.arange(width)).ravel()
        picks.append(rng.choice(flat_active, size=min(len(flat_active), max(1, n // 2)), replace=False))
    picks.append(rng.choice(size, size=min(size, n), replace=False))
    return np.unique(np.concatenate(picks))


def gradient_check(params, sample, kind, n_coords=240, h=1e-5, seed=0, reduction="mean"):
    """Compare analytic gradients with central finite differences.

    ``sample`` is ``(wide_idx, dense, emb_ids, y)`` batch arrays. Dropout is
    off. Coordinates are drawn from every parameter family in use.
    """
    wide_idx, dense, emb_ids, y = sample
    rng = np.random.default_rng(seed)
    _, grads = loss_and_grad(params, wide_idx, dense, emb_ids, y, kind, reduction=reduction)
    dense_grads = grads.dense(params)
    fams = params.families()
    per = max(1, -(-n_coords // len(fams)))

    def batch_loss():
        s = logits(params, wide_idx, dense, emb_ids)
        per = _loss_and_dlogit(params, s, y, kind)[0]
        return float(per.mean() if reduction == "mean" else per.sum())

    worst, total, per_family = 0.0, 0, {}
    for name, arr in fams:
        active = None
        if name == "wide":
            active = np.unique(wide_idx)
        elif name.startswith("emb:"):
            j = params.embedded.index(name[4:])
            active = np.unique(emb_ids[:, j])
        coords = _family_coords(name, arr, dense_grads[name], rng, per, active)
        flat = arr.reshape(-1)
        gflat = dense_grads[name].reshape(-1)
        fam_worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            up = batch_loss()
            flat[c] = orig - h
            down = batch_loss()
            flat[c] = orig
            fd = (up - down) / (2 * h)
            ga = gflat[c]
            rel = abs(ga - fd) / max(1e-8, abs(ga) + abs(fd))
            fam_worst = max(fam_worst, rel)
        per_family[name] = (len(coords), fam_worst)
        worst = max(worst, fam_worst)
        total += len(coords)
    return GradCheckReport(worst, total, per_family)
