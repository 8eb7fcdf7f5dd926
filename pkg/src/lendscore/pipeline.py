"""Two-stage scoring: a PD gate followed by IRR regression, plus evaluation.

Stage 1 is a wide-and-deep classifier trained on the rebalanced training
set. Stage 2 is a wide-and-deep regressor trained on the original training
loans with positive IRR. A loan passes the gate when its PD is at most
gamma; only passed loans get an IRR prediction.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import baselines, widedeep
from .features import EncodedSet, FeatureConfig, encode_records, fit_schema
from .resample import ResamplePlan, resample
from .widedeep import Loss, TrainConfig

log = logging.getLogger(__name__)

DEFAULT_STAGE1 = TrainConfig(loss=Loss.CROSS_ENTROPY)
DEFAULT_STAGE2 = TrainConfig(loss=Loss.MSE)


class Gate(str, enum.Enum):
    PASSED = "Passed"
    FILTERED = "Filtered"


@dataclass
class TwoStageModel:
    schema: object
    stage1: widedeep.ModelParams
    stage2: widedeep.ModelParams
    gamma: float = 0.5

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")


@dataclass
class TwoStageTraining:
    model: TwoStageModel
    stage1_losses: np.ndarray
    stage2_losses: np.ndarray
    stage1_counts: dict
    stage2_rows: int
    stage1_validation: list = field(default_factory=list)


@dataclass(frozen=True)
class ScoredLoan:
    """One loan's scores. ``gate`` is None for baseline scores, which are not gated."""

    loan_id: str
    pd: Optional[float]
    predicted_irr: Optional[float]
    gate: Optional[Gate]
    actual_irr: Optional[float] = None
    grade: str = ""
    unseen_level: bool = False


def positive_irr(data):
    return data.take(np.flatnonzero(np.nan_to_num(data.irr, nan=-np.inf) > 0))


def train_two_stage(
    train_records,
    plan=ResamplePlan(),
    stage1=DEFAULT_STAGE1,
    stage2=DEFAULT_STAGE2,
    features=FeatureConfig(),
    gamma=0.5,
    schema=None,
    validation_fraction=0.0,
):
    """Fit the shared schema, then both stages.

    ``schema`` may be passed to reuse one already fitted on the same split.
    With ``validation_fraction`` > 0 that share of the labeled training rows
    is held out (before resampling) and the stage-1 loss on it is tracked.
    """
    stage1 = dataclasses.replace(stage1, loss=Loss.CROSS_ENTROPY)
    stage2 = dataclasses.replace(stage2, loss=Loss.MSE)
    schema = schema or fit_schema(train_records, features)
    encoded = encode_records(schema, train_records)
    labeled = encoded.take(np.flatnonzero(~np.isnan(encoded.y)))
    validation = None
    if validation_fraction > 0:
        labeled, validation = hold_out(labeled, validation_fraction, stage1.seed)

    balanced = resample(labeled, plan)
    counts = {
        "default": int((balanced.y == 1).sum()),
        "non_default": int((balanced.y == 0).sum()),
    }
    log.info("stage 1 trains on %s after %s", counts, plan.method.value)
    res1 = widedeep.train(widedeep.init_params(schema, stage1), balanced, stage1, validation=validation)

    pos = positive_irr(encoded)
    log.info("stage 2 trains on %d positive-IRR loans", len(pos))
    res2 = widedeep.train(widedeep.init_params(schema, stage2), pos, stage2)

    model = TwoStageModel(schema, res1.params, res2.params, gamma)
    return TwoStageTraining(model, res1.losses, res2.losses, counts, len(pos), res1.validation)


def hold_out(data, fraction, seed):
    """Split an encoded set into (kept, held out) by a seeded permutation."""
    if not 0 < fraction < 1:
        raise ValueError(f"validation fraction must be in (0, 1), got {fraction}")
    perm = np.random.default_rng([seed, 2]).permutation(len(data))
    n_val = int(np.floor(fraction * len(data) + 0.5))
    return data.take(np.sort(perm[n_val:])), data.take(np.sort(perm[:n_val]))


def _encoded(schema, loans):
    return loans if isinstance(loans, EncodedSet) else encode_records(schema, loans)


def gate_passes(pd, gamma):
    # strict inequality filters: pd == gamma passes
    return not pd > gamma


def score_loans(model, loans):
    data = _encoded(model.schema, loans)
    if len(data) == 0:
        return []
    pd = widedeep.predict_pd(model.stage1, data)
    irr = widedeep.predict_irr(model.stage2, data)
    out = []
    for i in range(len(data)):
        passed = gate_passes(pd[i], model.gamma)
        actual = data.irr[i]
        out.append(
            ScoredLoan(
                loan_id=data.loan_ids[i],
                pd=float(pd[i]),
                predicted_irr=float(irr[i]) if passed else None,
                gate=Gate.PASSED if passed else Gate.FILTERED,
                actual_irr=None if np.isnan(actual) else float(actual),
                grade=data.grades[i],
                unseen_level=bool(data.unseen[i]),
            )
        )
    return out


def score_pd_only(params, schema, loans):
    """Approach 1 scores: PD from a classifier, every loan a candidate."""
    data = _encoded(schema, loans)
    pd = widedeep.predict_pd(params, data)
    return [
        ScoredLoan(
            data.loan_ids[i],
            float(pd[i]),
            None,
            None,
            None if np.isnan(data.irr[i]) else float(data.irr[i]),
            data.grades[i],
            bool(data.unseen[i]),
        )
        for i in range(len(data))
    ]


def score_cart(tree, records):
    """Approach 2 scores: tree-predicted IRR, every loan a candidate."""
    preds = baselines.cart_predict_many(tree, records)
    return [
        ScoredLoan(r.loan_id, None, float(p), None, r.irr, r.grade)
        for r, p in zip(records, preds)
    ]


def select_top_k(scored, k, approach):
    """Best ``k`` loans for an approach (1: lowest PD; 2, 3: highest predicted IRR).

    Approach 3 only considers loans that passed the gate. Ties break on loan_id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if approach == 1:
        cands = [s for s in scored if s.pd is not None]
        cands.sort(key=lambda s: (s.pd, s.loan_id))
    elif approach in (2, 3):
        cands = [s for s in scored if s.predicted_irr is not None]
        if approach == 3:
            cands = [s for s in cands if s.gate is Gate.PASSED]
        cands.sort(key=lambda s: (-s.predicted_irr, s.loan_id))
    else:
        raise ValueError(f"unknown approach {approach}")
    return cands[:k]


def _ratio(num, den):
    return num / den if den else None


@dataclass(frozen=True)
class ClassificationReport:
    """Confusion counts with Non-Default as the Positive class."""

    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def precision_p(self):
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall_p(self):
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def precision_n(self):
        return _ratio(self.tn, self.tn + self.fn)

    @property
    def recall_n(self):
        return _ratio(self.tn, self.tn + self.fp)

    def to_dict(self):
        return {
            "TP": self.tp,
            "FN": self.fn,
            "FP": self.fp,
            "TN": self.tn,
            "precision_p": self.precision_p,
            "recall_p": self.recall_p,
            "precision_n": self.precision_n,
            "recall_n": self.recall_n,
        }


def confusion(is_default, pd, gamma):
    """Predicted Default means pd > gamma; Positive is Non-Default."""
    is_default = np.asarray(is_default, dtype=bool)
    pred_default = np.asarray(pd) > gamma
    return ClassificationReport(
        tp=int((~is_default & ~pred_default).sum()),
        fn=int((~is_default & pred_default).sum()),
        fp=int((is_default & ~pred_default).sum()),
        tn=int((is_default & pred_default).sum()),
    )


def eval_classification(params, schema, test, gamma=0.5):
    data = _encoded(schema, test)
    data = data.take(np.flatnonzero(~np.isnan(data.y)))
    return confusion(data.y == 1, widedeep.predict_pd(params, data), gamma)


def eval_regression(params, schema, test):
    """MSE of predicted IRR over test loans whose actual IRR is positive."""
    pos = positive_irr(_encoded(schema, test))
    if len(pos) == 0:
        return None
    pred = widedeep.predict_irr(params, pos)
    return float(np.mean((pred - pos.irr) ** 2))


@dataclass
class Comparison:
    k: int
    avg_actual_irr: dict
    selected: dict
    shortfall: dict
    scatter: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "k": self.k,
            "top_k_avg_actual_irr": self.avg_actual_irr,
            "n_selected": {a: len(v) for a, v in self.selected.items()},
            "shortfall": self.shortfall,
        }


APPROACH_NAMES = {1: "approach1_credit_scoring", 2: "approach2_profit_scoring", 3: "approach3_two_stage"}


def compare_approaches(model, tree, logistic, test_records, k=30):
    """Top-k average actual IRR for the three approaches over the full test split."""
    data = encode_records(model.schema, test_records)
    scored = {
        1: score_pd_only(logistic, model.schema, data),
        2: score_cart(tree, test_records),
        3: score_loans(model, data),
    }
    selected, avg, shortfall = {}, {}, {}
    for a, rows in scored.items():
        top = select_top_k(rows, k, a)
        name = APPROACH_NAMES[a]
        selected[name] = top
        actual = [s.actual_irr for s in top if s.actual_irr is not None]
        avg[name] = float(np.mean(actual)) if actual else None
        shortfall[name] = len(top) < k
    if shortfall[APPROACH_NAMES[3]]:
        log.warning("only %d loans passed the gate (k=%d)", len(selected[APPROACH_NAMES[3]]), k)

    # actual vs predicted IRR over test loans with positive actual IRR
    stage2_all = widedeep.predict_irr(model.stage2, data)
    scatter = {
        APPROACH_NAMES[2]: [
            (s.loan_id, s.actual_irr, s.predicted_irr) for s in scored[2] if (s.actual_irr or 0) > 0
        ],
        APPROACH_NAMES[3]: [
            (s.loan_id, s.actual_irr, float(p))
            for s, p in zip(scored[3], stage2_all)
            if (s.actual_irr or 0) > 0
        ],
    }
    return Comparison(k, avg, selected, shortfall, scatter)
