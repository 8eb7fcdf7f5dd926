import numpy as np
import pytest

from lendscore import baselines, container
from lendscore.errors import ChecksumMismatch, IoError, VersionMismatch
from lendscore.features import encode_records, fit_schema
from lendscore.widedeep import Loss, TrainConfig, init_params, predict


@pytest.fixture(scope="module")
def saved(small_split, tmp_path_factory):
    schema = fit_schema(small_split.train)
    params = init_params(schema, TrainConfig(loss=Loss.MSE, seed=4))
    params.wide[:] = np.random.default_rng(1).normal(size=params.wide.shape)
    path = tmp_path_factory.mktemp("m") / "stage2.model"
    container.save_model(params, schema, path, {"gamma": 0.5})
    return params, schema, path


def test_round_trip_bit_exact(saved, small_split):
    params, schema, path = saved
    back, back_schema, extra = container.load_model(path)
    assert back_schema == schema and extra == {"gamma": 0.5}
    assert back.task is params.task
    for (n1, a), (n2, b) in zip(params.families(), back.families()):
        assert n1 == n2 and np.array_equal(a, b)
    data = encode_records(schema, small_split.test)
    assert np.array_equal(predict(params, data), predict(back, data))


def test_header_layout(saved):
    line = saved[2].read_text().split("\n", 1)[0].split(" ")
    assert line[0] == "LENDSCORE-MODEL" and line[1] == str(container.FORMAT_VERSION) and len(line[2]) == 64


def test_truncated_file(saved, tmp_path):
    text = saved[2].read_text()
    bad = tmp_path / "cut.model"
    bad.write_text(text[: len(text) // 2])
    with pytest.raises(ChecksumMismatch):
        container.load_model(bad)


def test_version_bump(saved, tmp_path):
    head, body = saved[2].read_text().split("\n", 1)
    parts = head.split(" ")
    bad = tmp_path / "v2.model"
    bad.write_text(f"{parts[0]} 2 {parts[2]}\n{body}")
    with pytest.raises(VersionMismatch, match="version 2"):
        container.load_model(bad)


def test_missing_file(tmp_path):
    with pytest.raises(IoError):
        container.load_model(tmp_path / "nope.model")


def test_tree_round_trip(small_split, tmp_path):
    tree = baselines.train_cart(small_split.train)
    container.save_tree(tree, tmp_path / "cart.model")
    assert container.load_tree(tmp_path / "cart.model") == tree
    with pytest.raises(IoError, match="expected 'widedeep'"):
        container.load_model(tmp_path / "cart.model")
