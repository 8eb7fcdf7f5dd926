"""Class rebalancing of an encoded training set.

SMOTE interpolates only the standardized dense block; the wide indices and
embedding ids of a synthetic row are copied from its base row.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import OneClassOnly, TooFewMinority
from .features import EncodedSet


class Method(str, enum.Enum):
    NONE = "none"
    UNDERSAMPLE = "undersample"
    OVERSAMPLE = "oversample"
    SMOTE = "smote"


@dataclass(frozen=True)
class ResamplePlan:
    method: Method = Method.SMOTE
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.method is Method.SMOTE and self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1 for SMOTE")


@dataclass(frozen=True)
class SmoteResult:
    rows: np.ndarray  # (n_new, d) synthetic points
    base: np.ndarray  # index of the base row in the minority matrix
    neighbor: np.ndarray  # index of the chosen neighbour in the minority matrix
    u: np.ndarray  # interpolation weights in [0, 1)
    neighbors: np.ndarray  # (m, k) k-NN table the neighbours were drawn from


def _classes(data):
    y = data.y
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise OneClassOnly(f"need both classes, got {len(neg)} non-default / {len(pos)} default")
    if len(pos) <= len(neg):
        return pos, neg
    return neg, pos


def undersample(data, plan):
    """Drop majority rows without replacement down to the minority count."""
    minority, majority = _classes(data)
    rng = np.random.default_rng(plan.seed)
    kept = rng.choice(majority, size=len(minority), replace=False)
    return data.take(np.sort(np.concatenate([minority, kept])))


def oversample(data, plan):
    """Append exact copies of random minority rows until the classes match."""
    minority, majority = _classes(data)
    rng = np.random.default_rng(plan.seed)
    extra = rng.choice(minority, size=len(majority) - len(minority), replace=True)
    return data.take(np.concatenate([np.arange(len(data)), extra]))


def nearest_neighbors(points, k):
    """k nearest other rows of every row (Euclidean), nearest first."""
    tree = cKDTree(points)
    _, idx = tree.query(points, k=k + 1)
    idx = np.atleast_2d(idx)
    out = np.empty((len(points), k), dtype=np.int64)
    for i, row in enumerate(idx):
        others = row[row != i]
        out[i] = others[:k]
    return out


def smote(minority, majority_count, plan):
    """Synthesize ``majority_count - len(minority)`` rows on minority k-NN segments.

    Bases are visited round-robin in a seeded order, so every base row is
    used before any is reused. Rows come back sorted by (base, emission).
    """
    minority = np.asarray(minority, dtype=float)
    m, k = len(minority), plan.k_neighbors
    if m <= k:
        raise TooFewMinority(f"SMOTE needs more than k={k} minority rows, got {m}")
    need = max(int(majority_count) - m, 0)
    nn = nearest_neighbors(minority, k)

    rng = np.random.default_rng(plan.seed)
    order = rng.permutation(m)
    base = order[np.arange(need) % m]
    neighbor = nn[base, rng.integers(0, k, size=need)]
    u = rng.random(need)

    canon = np.lexsort((np.arange(need), base))
    base, neighbor, u = base[canon], neighbor[canon], u[canon]
    rows = minority[base] + u[:, None] * (minority[neighbor] - minority[base])
    return SmoteResult(rows=rows, base=base, neighbor=neighbor, u=u, neighbors=nn)


def smote_set(data, plan):
    minority, majority = _classes(data)
    res = smote(data.dense[minority], len(majority), plan)
    src = minority[res.base]
    synth = data.take(src)
    synth.dense = res.rows
    synth.loan_ids = [f"{lid}#smote{j}" for j, lid in enumerate(synth.loan_ids)]
    synth.irr = np.full(len(src), np.nan)
    return EncodedSet.concat([data, synth])


def resample(data, plan):
    if plan.method is Method.NONE:
        return data
    if plan.method is Method.UNDERSAMPLE:
        return undersample(data, plan)
    if plan.method is Method.OVERSAMPLE:
        return oversample(data, plan)
    return smote_set(data, plan)
