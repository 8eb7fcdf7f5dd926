"""Comparison scorers: logistic credit scoring and CART profit scoring.

The logistic model is the wide half of the network on its own. The tree
regresses IRR on every loan (positive and negative IRR alike) with greedy
variance-reduction splits.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import widedeep
from .errors import EmptyInput
from .features import CONTINUOUS, NEVER_INDICATOR, WIDE_BASIS, categorical_value, continuous_value
from .widedeep import Components, Loss, TrainConfig


def train_logistic(schema, data, config=TrainConfig()):
    """Wide-only cross-entropy model; its output is the probability of Default."""
    config = dataclasses.replace(config, components=Components.WIDE, loss=Loss.CROSS_ENTROPY)
    params = widedeep.init_params(schema, config)
    return widedeep.train(params, data, config)


@dataclass(frozen=True)
class CartConfig:
    max_depth: int = 6
    min_leaf: int = 20


@dataclass(frozen=True)
class Leaf:
    prediction: float
    count: int


@dataclass(frozen=True)
class Split:
    feature: str
    left: "Node"
    right: "Node"
    n_left: int
    n_right: int
    threshold: float = None  # continuous: x <= threshold goes left
    left_levels: frozenset = None  # categorical: level in set goes left
    right_levels: frozenset = None

    def goes_left(self, value):
        if self.threshold is not None:
            return value <= self.threshold
        if value in self.left_levels:
            return True
        if value in self.right_levels:
            return False
        # level never seen at this node: follow the larger child
        return self.n_left >= self.n_right


Node = Union[Leaf, Split]

CART_CATEGORICAL = WIDE_BASIS
CART_CONTINUOUS = CONTINUOUS + (NEVER_INDICATOR,)


def cart_features(record):
    """Raw feature dict the tree routes on."""
    out = {f: categorical_value(record, f) for f in CART_CATEGORICAL}
    out.update({f: continuous_value(record, f) for f in CART_CONTINUOUS})
    return out


def _sse(s, s2, n):
    return s2 - s * s / n


def _best_ordered_split(keys, y_sum, y2_sum, counts, min_leaf):
    """Best prefix split over groups already in split order.

    Returns (sse, position) where the left child holds groups [0, position).
    """
    cs, cs2, cn = np.cumsum(y_sum), np.cumsum(y2_sum), np.cumsum(counts)
    tot, tot2, n = cs[-1], cs2[-1], cn[-1]
    left_n = cn[:-1]
    right_n = n - left_n
    ok = (left_n >= min_leaf) & (right_n >= min_leaf)
    if not ok.any():
        return np.inf, None
    with np.errstate(divide="ignore", invalid="ignore"):
        sse = _sse(cs[:-1], cs2[:-1], left_n) + _sse(tot - cs[:-1], tot2 - cs2[:-1], right_n)
    sse = np.where(ok, sse, np.inf)
    pos = int(np.argmin(sse))
    return float(sse[pos]), pos + 1


class _Grower:
    def __init__(self, cont, cat, y, config):
        self.cont, self.cat, self.y, self.config = cont, cat, y, config

    def grow(self, idx, depth):
        y = self.y[idx]
        n = len(idx)
        leaf = Leaf(float(y.mean()), n)
        parent_sse = float(((y - y.mean()) ** 2).sum())
        if depth >= self.config.max_depth or n < 2 * self.config.min_leaf or parent_sse <= 0:
            return leaf
        best = (parent_sse * (1 - 1e-12), None)
        for name, col in self.cont.items():
            x = col[idx]
            order = np.argsort(x, kind="stable")
            xs, ys = x[order], y[order]
            # collapse equal values so thresholds fall between distinct values
            uniq, start = np.unique(xs, return_index=True)
            if len(uniq) < 2:
                continue
            cnt = np.diff(np.append(start, n))
            s = np.add.reduceat(ys, start)
            s2 = np.add.reduceat(ys * ys, start)
            sse, pos = _best_ordered_split(uniq, s, s2, cnt, self.config.min_leaf)
            if pos is not None and sse < best[0]:
                thr = 0.5 * (uniq[pos - 1] + uniq[pos])
                best = (sse, ("cont", name, x <= thr, thr))
        for name, col in self.cat.items():
            x = col[idx]
            levels, inv = np.unique(x, return_inverse=True)
            if len(levels) < 2:
                continue
            cnt = np.bincount(inv)
            s = np.bincount(inv, weights=y)
            s2 = np.bincount(inv, weights=y * y)
            order = np.lexsort((levels, s / cnt))
            sse, pos = _best_ordered_split(levels[order], s[order], s2[order], cnt[order], self.config.min_leaf)
            if pos is not None and sse < best[0]:
                left = frozenset(levels[order][:pos].tolist())
                right = frozenset(levels[order][pos:].tolist())
                best = (sse, ("cat", name, np.isin(x, list(left)), (left, right)))
        if best[1] is None:
            return leaf
        kind, name, go_left, rule = best[1]
        li, ri = idx[go_left], idx[~go_left]
        left, right = self.grow(li, depth + 1), self.grow(ri, depth + 1)
        if kind == "cont":
            return Split(name, left, right, len(li), len(ri), threshold=float(rule))
        return Split(name, left, right, len(li), len(ri), left_levels=rule[0], right_levels=rule[1])


def _columns(records):
    feats = [cart_features(r) for r in records]
    cont = {f: np.array([d[f] for d in feats], dtype=float) for f in CART_CONTINUOUS}
    cat = {f: np.array([d[f] for d in feats], dtype=object) for f in CART_CATEGORICAL}
    return cont, cat


def train_cart(records, config=CartConfig()):
    """Fit an IRR regression tree on records that carry an ``irr`` label."""
    labeled = [r for r in records if r.irr is not None]
    if not labeled:
        raise EmptyInput("no IRR-labeled records to fit the tree on")
    cont, cat = _columns(labeled)
    cat = {f: v.astype(str) for f, v in cat.items()}
    y = np.array([r.irr for r in labeled], dtype=float)
    return _Grower(cont, cat, y, config).grow(np.arange(len(y)), 0)


def cart_predict(tree, record):
    feats = record if isinstance(record, dict) else cart_features(record)
    node = tree
    while isinstance(node, Split):
        node = node.left if node.goes_left(feats[node.feature]) else node.right
    return node.prediction


def cart_predict_many(tree, records):
    return np.array([cart_predict(tree, r) for r in records], dtype=float)


def depth(tree):
    if isinstance(tree, Leaf):
        return 0
    return 1 + max(depth(tree.left), depth(tree.right))


def leaves(tree):
    if isinstance(tree, Leaf):
        return [tree]
    return leaves(tree.left) + leaves(tree.right)


def tree_to_dict(node):
    if isinstance(node, Leaf):
        return {"leaf": node.prediction, "count": node.count}
    d = {
        "feature": node.feature,
        "n_left": node.n_left,
        "n_right": node.n_right,
        "left": tree_to_dict(node.left),
        "right": tree_to_dict(node.right),
    }
    if node.threshold is not None:
        d["threshold"] = node.threshold
    else:
        d["left_levels"] = sorted(node.left_levels)
        d["right_levels"] = sorted(node.right_levels)
    return d


def tree_from_dict(d):
    if "leaf" in d:
        return Leaf(float(d["leaf"]), int(d["count"]))
    left, right = tree_from_dict(d["left"]), tree_from_dict(d["right"])
    args = (d["feature"], left, right, d["n_left"], d["n_right"])
    if "threshold" in d:
        return Split(*args, threshold=float(d["threshold"]))
    return Split(*args, left_levels=frozenset(d["left_levels"]), right_levels=frozenset(d["right_levels"]))
