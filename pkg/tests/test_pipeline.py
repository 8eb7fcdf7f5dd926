import dataclasses

import numpy as np
import pytest

from lendscore import baselines, pipeline, widedeep
from lendscore.features import encode_records
from lendscore.pipeline import ClassificationReport, Gate, ScoredLoan, TwoStageModel
from lendscore.widedeep import TrainConfig

FAST = TrainConfig(steps=60)


@pytest.fixture(scope="module")
def trained(small_split):
    return pipeline.train_two_stage(small_split.train, stage1=FAST, stage2=FAST)


def test_training_sets(trained, small_split):
    counts = trained.stage1_counts
    assert counts["default"] == counts["non_default"]
    pos = [r for r in small_split.train if r.irr > 0]
    assert trained.stage2_rows == len(pos)
    assert len(trained.stage1_losses) == len(trained.stage2_losses) == 60


def test_stage2_excludes_non_positive_irr(trained, small_split):
    data = encode_records(trained.model.schema, small_split.train)
    assert np.all(pipeline.positive_irr(data).irr > 0)


def test_gate_consistency(trained, small_split):
    scored = pipeline.score_loans(trained.model, small_split.test)
    assert scored
    for s in scored:
        if s.gate is Gate.FILTERED:
            assert s.pd > trained.model.gamma and s.predicted_irr is None
        else:
            assert s.pd <= trained.model.gamma and s.predicted_irr is not None


@pytest.mark.parametrize("gamma,all_pass", [(1.0, True), (0.0, False)])
def test_degenerate_gammas(trained, small_split, gamma, all_pass):
    model = dataclasses.replace(trained.model, gamma=gamma)
    gates = {s.gate for s in pipeline.score_loans(model, small_split.test)}
    assert gates == ({Gate.PASSED} if all_pass else {Gate.FILTERED})


def test_gate_boundary_passes():
    assert pipeline.gate_passes(0.5, 0.5)
    assert not pipeline.gate_passes(0.5000001, 0.5)


def test_gamma_range():
    with pytest.raises(ValueError):
        TwoStageModel(None, None, None, gamma=1.5)


def scored_list(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        pd = float(rng.random())
        passed = pd <= 0.5
        out.append(
            ScoredLoan(
                f"L{i:04d}",
                pd,
                float(rng.normal(0.1, 0.05)) if passed else None,
                Gate.PASSED if passed else Gate.FILTERED,
                float(rng.normal(0.05, 0.1)),
                "A",
            )
        )
    return out


def test_top_k_rules():
    scored = scored_list()
    a1 = pipeline.select_top_k(scored, 30, 1)
    a3 = pipeline.select_top_k(scored, 30, 3)
    assert len(a1) == len(a3) == 30
    assert [s.pd for s in a1] == sorted(s.pd for s in a1)
    assert max(s.pd for s in a1) <= min(s.pd for s in scored if s not in a1)
    assert [s.predicted_irr for s in a3] == sorted((s.predicted_irr for s in a3), reverse=True)
    assert all(s.gate is Gate.PASSED for s in a3)


def test_top_k_shortfall_and_ties():
    scored = [ScoredLoan(lid, 0.1, 0.2, Gate.PASSED) for lid in ("c", "a", "b")]
    assert [s.loan_id for s in pipeline.select_top_k(scored, 10, 3)] == ["a", "b", "c"]
    assert [s.loan_id for s in pipeline.select_top_k(scored, 2, 1)] == ["a", "b"]
    with pytest.raises(ValueError):
        pipeline.select_top_k(scored, 0, 1)


def test_pd_ranking_invariant_under_monotone_transform():
    scored = scored_list(200)
    warped = [dataclasses.replace(s, pd=float(np.tanh(3 * s.pd) ** 3)) for s in scored]
    ids = lambda xs: [s.loan_id for s in xs]
    assert ids(pipeline.select_top_k(scored, 30, 1)) == ids(pipeline.select_top_k(warped, 30, 1))


def test_table_metrics_example():
    r = ClassificationReport(tp=8, fn=2, fp=1, tn=9)
    assert r.precision_p == pytest.approx(8 / 9)
    assert r.recall_n == pytest.approx(9 / 10)
    assert r.recall_p == pytest.approx(8 / 10)
    assert r.precision_n == pytest.approx(9 / 11)


def test_all_predicted_non_default():
    r = pipeline.confusion([True, False, False, True], [0.1, 0.2, 0.3, 0.4], 0.5)
    assert r.recall_p == 1.0 and r.recall_n == 0.0
    assert r.precision_n is None


def test_confusion_positive_is_non_default():
    r = pipeline.confusion([False, False, True, True], [0.2, 0.9, 0.1, 0.8], 0.5)
    assert (r.tp, r.fn, r.fp, r.tn) == (1, 1, 1, 1)


def test_eval_classification_consistent(trained, small_split):
    r = pipeline.eval_classification(trained.model.stage1, trained.model.schema, small_split.test)
    d = r.to_dict()
    assert d["TP"] + d["FN"] + d["FP"] + d["TN"] == len(small_split.test)
    assert d["precision_p"] == d["TP"] / (d["TP"] + d["FP"])


def test_eval_regression_identities(trained, small_split):
    schema = trained.model.schema
    test = encode_records(schema, small_split.test)
    pos = pipeline.positive_irr(test)
    p = trained.model.stage2.copy()
    for _, arr in p.families():
        arr[...] = 0.0
    p.bias[0] = pos.irr.mean()
    assert pipeline.eval_regression(p, schema, test) == pytest.approx(pos.irr.var())


def test_compare_all_k(trained, small_split):
    model = trained.model
    tree = baselines.train_cart(small_split.train)
    train = encode_records(model.schema, small_split.train)
    logi = baselines.train_logistic(model.schema, train, FAST).params
    n = len(small_split.test)
    cmp = pipeline.compare_approaches(model, tree, logi, small_split.test, k=n)
    mean = np.mean([r.irr for r in small_split.test])
    avg = cmp.avg_actual_irr
    assert avg[pipeline.APPROACH_NAMES[1]] == pytest.approx(mean)
    assert avg[pipeline.APPROACH_NAMES[2]] == pytest.approx(mean)
    n_passed = sum(s.gate is Gate.PASSED for s in pipeline.score_loans(model, small_split.test))
    assert len(cmp.selected[pipeline.APPROACH_NAMES[3]]) == n_passed
    assert cmp.shortfall[pipeline.APPROACH_NAMES[3]] == (n_passed < n)
    assert all(a > 0 for _, a, _ in cmp.scatter[pipeline.APPROACH_NAMES[3]])


def test_validation_hold_out(small_split):
    res = pipeline.train_two_stage(
        small_split.train, stage1=dataclasses.replace(FAST, steps=100), stage2=FAST, validation_fraction=0.1
    )
    assert [s for s, _ in res.stage1_validation] == [100]
