import numpy as np
import pytest

from lendscore import baselines
from lendscore.baselines import CartConfig, Leaf, Split
from lendscore.errors import EmptyInput
from lendscore.features import encode_records, fit_schema
from lendscore.widedeep import TrainConfig, predict_pd

from conftest import make_record, replace


def cohort_with(irr_of, n=200, **fixed):
    rng = np.random.default_rng(0)
    out = []
    for i in range(n):
        rec = make_record(
            loan_id=f"L{i:04d}",
            dti=float(rng.uniform(0, 0.4)),
            purpose=("car", "wedding", "medical", "house")[i % 4],
            **fixed,
        )
        out.append(replace(rec, irr=irr_of(rec)))
    return out


def test_continuous_split_uses_midpoint():
    recs = cohort_with(lambda r: 0.2 if r.dti < 0.2 else -0.3)
    tree = baselines.train_cart(recs, CartConfig(max_depth=1, min_leaf=5))
    assert isinstance(tree, Split) and tree.feature == "dti"
    below = max(r.dti for r in recs if r.dti < 0.2)
    above = min(r.dti for r in recs if r.dti >= 0.2)
    assert tree.threshold == pytest.approx(0.5 * (below + above))
    assert tree.left.prediction == pytest.approx(0.2)
    assert tree.right.prediction == pytest.approx(-0.3)


def test_categorical_split_groups_by_mean():
    means = {"car": 0.1, "wedding": 0.12, "medical": -0.4, "house": -0.35}
    recs = cohort_with(lambda r: means[r.purpose])
    tree = baselines.train_cart(recs, CartConfig(max_depth=1, min_leaf=5))
    assert tree.feature == "purpose"
    assert tree.left_levels == {"medical", "house"}
    assert tree.right_levels == {"car", "wedding"}


def test_unseen_level_follows_larger_child():
    s = Split("purpose", Leaf(1.0, 30), Leaf(2.0, 70), 30, 70, left_levels=frozenset({"a"}), right_levels=frozenset({"b"}))
    assert baselines.cart_predict(s, {"purpose": "zzz"}) == 2.0


def test_depth_and_leaf_size(small_split):
    cfg = CartConfig(max_depth=6, min_leaf=20)
    tree = baselines.train_cart(small_split.train, cfg)
    assert 1 <= baselines.depth(tree) <= 6
    leaves = baselines.leaves(tree)
    assert all(l.count >= 20 for l in leaves)
    assert sum(l.count for l in leaves) == sum(r.irr is not None for r in small_split.train)


def test_constant_target_is_a_leaf():
    tree = baselines.train_cart(cohort_with(lambda r: 0.05))
    assert isinstance(tree, Leaf) and tree.prediction == pytest.approx(0.05)


def test_tree_dict_round_trip(small_split):
    tree = baselines.train_cart(small_split.train)
    back = baselines.tree_from_dict(baselines.tree_to_dict(tree))
    assert back == tree


def test_no_labels():
    with pytest.raises(EmptyInput):
        baselines.train_cart([make_record()])


def test_logistic_is_wide_only(small_split):
    schema = fit_schema(small_split.train)
    data = encode_records(schema, small_split.train)
    res = baselines.train_logistic(schema, data, TrainConfig(steps=50))
    p = res.params
    assert p.use_wide and not p.use_deep
    pd = predict_pd(p, data)
    assert np.allclose(pd, 1 / (1 + np.exp(-(p.wide[data.wide_idx].sum(axis=1) + p.bias[0]))))
