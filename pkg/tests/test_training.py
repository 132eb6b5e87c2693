import json

import numpy as np
import pytest
import torch

from lfdeblur.blur import generate_dataset
from lfdeblur.lightfield import save_lightfield
from lfdeblur.net import DeblurNet, NetworkConfig
from lfdeblur.synthetic import layered_lightfield, toy_pairs
from lfdeblur.training import TrainConfig, load_pairs, smoothed, train

SMALL_NET = NetworkConfig(channels=4, hidden=4, num_blocks=1)


@pytest.fixture(scope="module")
def pairs():
    return toy_pairs(2, seed=3, angular_size=(3, 3), spatial_size=(16, 16), n_t=4)


def test_smoothed():
    np.testing.assert_allclose(smoothed([1, 2, 3, 4], window=2), [1, 1.5, 2.5, 3.5])
    assert smoothed([5.0] * 30)[-1] == 5.0


def test_same_seed_same_curve(pairs):
    cfg = TrainConfig(patch=8, n=3, iterations=5, seed=4)
    a = train(pairs, cfg, SMALL_NET)
    b = train(pairs, cfg, SMALL_NET)
    assert a.losses == b.losses
    for (na, pa), (nb, pb) in zip(a.model.state_dict().items(), b.model.state_dict().items()):
        assert na == nb and torch.equal(pa, pb)
    c = train(pairs, TrainConfig(patch=8, n=3, iterations=5, seed=5), SMALL_NET)
    assert c.losses != a.losses


def test_log_records(pairs, tmp_path):
    res = train(pairs, TrainConfig(patch=8, n=2, iterations=3), SMALL_NET,
                log_path=tmp_path / "log.jsonl")
    lines = [json.loads(x) for x in (tmp_path / "log.jsonl").read_text().splitlines()]
    assert [r["iteration"] for r in lines] == [0, 1, 2]
    assert all({"loss", "data_loss", "wall_time"} <= set(r) for r in lines)
    assert lines == res.log


def test_single_view_unroll(pairs):
    res = train(pairs, TrainConfig(patch=8, n=1, iterations=2), SMALL_NET)
    assert len(res.log) == 2 and all(np.isfinite(res.losses))


def test_loss_decreases_quickly(pairs):
    res = train(pairs, TrainConfig(patch=16, n=3, iterations=60, lr=1e-3, seed=1),
                NetworkConfig(channels=8, hidden=8, num_blocks=2))
    sm = smoothed(res.losses, 10)
    assert sm[-1] < sm[9]


def test_errors(pairs):
    with pytest.raises(ValueError):
        train(pairs, TrainConfig(patch=32, n=2, iterations=1), SMALL_NET)
    with pytest.raises(ValueError):
        train(pairs, TrainConfig(patch=8, n=10, iterations=1), SMALL_NET)
    with pytest.raises(ValueError):
        train([], TrainConfig(patch=8, n=2, iterations=1), SMALL_NET)
    with pytest.raises(ValueError):
        TrainConfig(batch=2)
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"patch": 8, "bogus": 1})


def test_load_pairs_from_manifest(tmp_path):
    src = tmp_path / "sharp"
    for i in range(2):
        save_lightfield(layered_lightfield(i, (3, 3), (12, 12)), src / f"s{i}")
    generate_dataset(src, 1, None, 4, 0, tmp_path / "ds")
    loaded = load_pairs(tmp_path / "ds")
    assert len(loaded) == 2
    assert loaded[0][0].data.shape == (3, 3, 12, 12, 3)


def test_train_does_not_touch_passed_model_config(pairs):
    model = DeblurNet(SMALL_NET)
    res = train(pairs, TrainConfig(patch=8, n=2, iterations=1), SMALL_NET, model=model)
    assert res.model is model
