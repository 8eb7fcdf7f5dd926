"""Wide (sparse one-hot + crosses) and deep (dense + embedding id) encodings.

Every categorical vocabulary gets one trailing UNK slot, so a level first
seen at scoring time still lands in a valid cell. Cross blocks are laid out
row-major over the padded vocabularies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput

SCHEMA_VERSION = 1

WIDE_BASIS = ("grade", "subgrade", "purpose", "fico", "housing", "employment_length")
CONTINUOUS = (
    "annual_income",
    "credit_history_length",
    "delinq_2yrs",
    "inquiries_6m",
    "public_records",
    "revol_util",
    "open_accounts",
    "months_since_last_delinq",
    "loan_to_income",
    "installment_to_income",
    "dti",
)
NEVER_INDICATOR = "never_delinquent"
DEFAULT_CROSSES = (("fico", "purpose"), ("subgrade", "fico"))
DEFAULT_EMBEDDINGS = (("subgrade", 8), ("purpose", 8), ("fico", 8))
MIN_STD = 1e-12


@dataclass(frozen=True)
class FeatureConfig:
    cross_specs: tuple = DEFAULT_CROSSES
    embedding_specs: tuple = DEFAULT_EMBEDDINGS
    never_indicator: bool = True


@dataclass(frozen=True)
class WideVector:
    active_indices: tuple
    wide_dim: int


@dataclass(frozen=True)
class DeepVector:
    dense: tuple
    embedding_ids: dict


@dataclass(frozen=True)
class FeatureSchema:
    vocabularies: dict
    cross_specs: tuple
    continuous: tuple
    continuous_stats: dict
    embedding_specs: tuple
    basis: tuple = WIDE_BASIS

    def vocab_size(self, feature):
        """Levels plus the UNK slot."""
        return len(self.vocabularies[feature]) + 1

    def unk_index(self, feature):
        return len(self.vocabularies[feature])

    @property
    def blocks(self):
        """Ordered (name, size) pairs of the wide space."""
        out = [(f, self.vocab_size(f)) for f in self.basis]
        out += [(f"{a}_x_{b}", self.vocab_size(a) * self.vocab_size(b)) for a, b in self.cross_specs]
        return tuple(out)

    @property
    def block_offsets(self):
        offsets, start = {}, 0
        for name, size in self.blocks:
            offsets[name] = start
            start += size
        return offsets

    @property
    def wide_dim(self):
        return sum(size for _, size in self.blocks)

    @property
    def dense_dim(self):
        return len(self.continuous)

    @property
    def embedded(self):
        return tuple(f for f, _ in self.embedding_specs)

    @property
    def deep_input_dim(self):
        return self.dense_dim + sum(d for _, d in self.embedding_specs)

    def to_dict(self):
        offsets = self.block_offsets
        return {
            "version": SCHEMA_VERSION,
            "basis": list(self.basis),
            "vocabularies": {k: list(v) for k, v in self.vocabularies.items()},
            "cross_specs": [list(p) for p in self.cross_specs],
            "continuous": list(self.continuous),
            "continuous_stats": {k: list(self.continuous_stats[k]) for k in self.continuous},
            "embedding_specs": [[f, d] for f, d in self.embedding_specs],
            "blocks": [{"name": n, "offset": offsets[n], "size": s} for n, s in self.blocks],
            "wide_dim": self.wide_dim,
        }

    @classmethod
    def from_dict(cls, d):
        from .errors import VersionMismatch

        if d.get("version") != SCHEMA_VERSION:
            raise VersionMismatch(f"feature schema version {d.get('version')} != {SCHEMA_VERSION}")
        return cls(
            vocabularies={k: tuple(v) for k, v in d["vocabularies"].items()},
            cross_specs=tuple(tuple(p) for p in d["cross_specs"]),
            continuous=tuple(d["continuous"]),
            continuous_stats={k: tuple(v) for k, v in d["continuous_stats"].items()},
            embedding_specs=tuple((f, int(n)) for f, n in d["embedding_specs"]),
            basis=tuple(d["basis"]),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def categorical_value(record, feature):
    return str(getattr(record, feature))


def continuous_value(record, feature):
    if feature == NEVER_INDICATOR:
        return 1.0 if record.months_since_last_delinq is None else 0.0
    value = getattr(record, feature)
    # "never delinquent" contributes 0 here and 1 on the indicator
    return 0.0 if value is None else float(value)


def fit_schema(train, config=FeatureConfig()):
    """Learn vocabularies and z-score statistics from the training records only."""
    if not train:
        raise EmptyInput("cannot fit a feature schema on an empty training set")
    features = set(WIDE_BASIS) | {f for pair in config.cross_specs for f in pair} | {
        f for f, _ in config.embedding_specs
    }
    vocabularies = {
        f: tuple(sorted({categorical_value(r, f) for r in train})) for f in sorted(features)
    }
    continuous = CONTINUOUS + ((NEVER_INDICATOR,) if config.never_indicator else ())
    stats = {}
    for f in continuous:
        col = np.array([continuous_value(r, f) for r in train], dtype=float)
        std = float(col.std())
        stats[f] = (float(col.mean()), std if std >= MIN_STD else 1.0)
    return FeatureSchema(
        vocabularies=vocabularies,
        cross_specs=tuple(tuple(p) for p in config.cross_specs),
        continuous=continuous,
        continuous_stats=stats,
        embedding_specs=tuple(config.embedding_specs),
    )


def _index_maps(schema):
    return {f: {lvl: i for i, lvl in enumerate(v)} for f, v in schema.vocabularies.items()}


def encode_onehot(schema, feature, level):
    """Position of ``level`` inside its feature block (UNK when unseen)."""
    vocab = schema.vocabularies[feature]
    try:
        return vocab.index(str(level))
    except ValueError:
        return len(vocab)


def encode_cross(schema, pair, level_a, level_b):
    a, b = pair
    return encode_onehot(schema, a, level_a) * schema.vocab_size(b) + encode_onehot(schema, b, level_b)


def encode_wide(schema, record):
    offsets = schema.block_offsets
    active = [offsets[f] + encode_onehot(schema, f, categorical_value(record, f)) for f in schema.basis]
    for a, b in schema.cross_specs:
        cell = encode_cross(schema, (a, b), categorical_value(record, a), categorical_value(record, b))
        active.append(offsets[f"{a}_x_{b}"] + cell)
    return WideVector(tuple(sorted(active)), schema.wide_dim)


def encode_deep(schema, record):
    dense = tuple(
        (continuous_value(record, f) - schema.continuous_stats[f][0]) / schema.continuous_stats[f][1]
        for f in schema.continuous
    )
    ids = {f: encode_onehot(schema, f, categorical_value(record, f)) for f in schema.embedded}
    return DeepVector(dense, ids)


@dataclass
class EncodedSet:
    """Column-oriented encodings of many records, ready for batched math.

    ``wide_idx`` holds global wide indices (one per block), ``y`` is 1 for
    Default, 0 for NonDefault and NaN when unlabeled, ``irr`` is NaN when
    unknown. ``unseen`` flags records that hit at least one UNK slot.
    """

    wide_idx: np.ndarray
    dense: np.ndarray
    emb_ids: np.ndarray
    y: np.ndarray
    irr: np.ndarray
    loan_ids: list = field(default_factory=list)
    grades: list = field(default_factory=list)
    unseen: np.ndarray = None

    def __len__(self):
        return len(self.y)

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return EncodedSet(
            wide_idx=self.wide_idx[idx],
            dense=self.dense[idx],
            emb_ids=self.emb_ids[idx],
            y=self.y[idx],
            irr=self.irr[idx],
            loan_ids=[self.loan_ids[i] for i in idx],
            grades=[self.grades[i] for i in idx],
            unseen=self.unseen[idx],
        )

    @classmethod
    def concat(cls, parts):
        return cls(
            wide_idx=np.concatenate([p.wide_idx for p in parts]),
            dense=np.concatenate([p.dense for p in parts]),
            emb_ids=np.concatenate([p.emb_ids for p in parts]),
            y=np.concatenate([p.y for p in parts]),
            irr=np.concatenate([p.irr for p in parts]),
            loan_ids=[i for p in parts for i in p.loan_ids],
            grades=[g for p in parts for g in p.grades],
            unseen=np.concatenate([p.unseen for p in parts]),
        )


def encode_records(schema, records):
    """Vectorised encode_wide/encode_deep over a record sequence."""
    n = len(records)
    maps = _index_maps(schema)
    offsets = schema.block_offsets
    n_blocks = len(schema.basis) + len(schema.cross_specs)

    local = {}
    unseen = np.zeros(n, dtype=bool)
    for f, m in maps.items():
        unk = len(m)
        col = np.fromiter((m.get(categorical_value(r, f), unk) for r in records), dtype=np.int64, count=n)
        unseen |= col == unk
        local[f] = col

    wide_idx = np.empty((n, n_blocks), dtype=np.int64)
    for j, f in enumerate(schema.basis):
        wide_idx[:, j] = offsets[f] + local[f]
    for j, (a, b) in enumerate(schema.cross_specs, start=len(schema.basis)):
        wide_idx[:, j] = offsets[f"{a}_x_{b}"] + local[a] * schema.vocab_size(b) + local[b]
    wide_idx.sort(axis=1)

    dense = np.empty((n, schema.dense_dim), dtype=float)
    for j, f in enumerate(schema.continuous):
        mean, std = schema.continuous_stats[f]
        raw = np.fromiter((continuous_value(r, f) for r in records), dtype=float, count=n)
        dense[:, j] = (raw - mean) / std

    emb_ids = np.stack([local[f] for f in schema.embedded], axis=1) if schema.embedded else np.zeros((n, 0), np.int64)
    y = np.array([np.nan if r.status is None else float(r.is_default) for r in records], dtype=float)
    irr = np.array([np.nan if r.irr is None else r.irr for r in records], dtype=float)
    return EncodedSet(
        wide_idx=wide_idx,
        dense=dense,
        emb_ids=emb_ids.reshape(n, len(schema.embedded)),
        y=y,
        irr=irr,
        loan_ids=[r.loan_id for r in records],
        grades=[r.grade for r in records],
        unseen=unseen,
    )
