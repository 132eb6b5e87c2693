import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfdeblur.lightfield import LightField
from lfdeblur.metrics import evaluate_lf, gaussian_window, mse, psnr, rmse, ssim, to_luma

from .oracles import ssim_bruteforce


def _uniform_pair(diff, shape=(16, 16, 3)):
    a = np.full(shape, 0.5)
    return a, a - diff


def test_rmse_examples():
    a = np.random.default_rng(0).random((6, 7, 3))
    assert rmse(a, a) == 0.0
    assert rmse(*_uniform_pair(0.0625)) == 0.0625
    b = np.random.default_rng(1).random((6, 7, 3))
    total = 0.0
    for x, y in zip(a.ravel(), b.ravel()):
        total += (x - y) ** 2
    assert rmse(a, b) == pytest.approx(math.sqrt(total / a.size), abs=1e-12)
    with pytest.raises(ValueError):
        rmse(a, b[:-1])


def test_psnr_closed_forms():
    a = np.random.default_rng(0).random((4, 4, 3))
    assert psnr(a, a) == math.inf
    assert psnr(*_uniform_pair(0.0625)) == pytest.approx(20 * math.log10(16), abs=1e-12)
    assert psnr(*_uniform_pair(0.0625)) == pytest.approx(24.082, abs=1e-3)
    assert psnr(*_uniform_pair(0.5)) == pytest.approx(6.021, abs=1e-3)


def test_psnr_decreases_with_noise():
    rng = np.random.default_rng(3)
    base = np.full((16, 16, 3), 0.5)
    noise = rng.uniform(-1, 1, base.shape)
    values = [psnr(base, base + amp * noise) for amp in (0.01, 0.02, 0.05, 0.1, 0.3)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_ssim_examples():
    a = np.random.default_rng(0).random((16, 16, 3))
    assert ssim(a, a) == 1.0
    assert ssim(np.full((12, 12), 0.3), np.full((12, 12), 0.3)) == 1.0
    board = (np.indices((16, 16)).sum(0) % 2).astype(np.float64)
    val = ssim(board, 1.0 - board)
    assert val < 0.1
    assert val == pytest.approx(ssim_bruteforce(board, 1.0 - board), abs=1e-10)
    with pytest.raises(ValueError):
        ssim(np.zeros((10, 20)), np.zeros((10, 20)))
    with pytest.raises(ValueError):
        ssim(np.zeros((12, 12)), np.zeros((12, 13)))


def test_ssim_matches_bruteforce_on_luma():
    rng = np.random.default_rng(4)
    a = rng.random((14, 15, 3))
    b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
    assert ssim(a, b) == pytest.approx(ssim_bruteforce(to_luma(a), to_luma(b)), abs=1e-10)


def test_window_normalised():
    w = gaussian_window()
    assert w.shape == (11, 11)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)


views = st.integers(0, 2 ** 32 - 1).map(lambda s: np.random.default_rng(s).random((12, 12, 3)))


@settings(max_examples=30)
@given(views, views, views)
def test_metric_properties(a, b, c):
    assert rmse(a, b) == rmse(b, a)
    assert rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-12
    assert rmse(a, a) == 0.0
    assert (rmse(a, b) == 0.0) == np.array_equal(a, b)
    assert ssim(a, a) == 1.0
    s = ssim(a, b)
    assert -1.0 <= s <= 1.0
    assert abs(s - ssim(b, a)) <= 1e-12


def test_evaluate_lf_rows_and_average(tmp_path):
    rng = np.random.default_rng(0)
    gt = LightField(rng.random((5, 5, 12, 12, 3)).astype(np.float32))
    rep = evaluate_lf(gt, gt, "a", "b")
    assert len(rep.rows) == 25
    assert all(r["rmse"] == 0.0 and r["ssim"] == 1.0 for r in rep.rows)
    d = json.loads(rep.to_json())
    assert d["average"]["psnr"] == "inf" and len(d["views"]) == 25
    pred = LightField(np.clip(gt.data + rng.normal(0, 0.05, gt.data.shape), 0, 1)
                      .astype(np.float32))
    rep = evaluate_lf(pred, gt)
    for key in ("psnr", "ssim", "rmse"):
        assert rep.average[key] == sum(r[key] for r in rep.rows) / 25
    rep.write_csv(tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert len(rows) == 27 and rows[-1][0] == "mean"


def test_evaluate_lf_known_rmse():
    gt = np.full((1, 2, 12, 12, 3), 0.5, dtype=np.float32)
    pred = gt.copy()
    pred[0, 0] += np.float32(0.125)
    pred[0, 1] += np.float32(0.375)
    rep = evaluate_lf(LightField(pred), LightField(gt))
    assert [r["rmse"] for r in rep.rows] == [0.125, 0.375]
    assert rep.average["rmse"] == 0.25
    with pytest.raises(ValueError):
        evaluate_lf(LightField(pred[:, :1]), LightField(gt))


def test_mse_pooled_over_channels():
    a = np.zeros((2, 2, 3))
    b = np.zeros((2, 2, 3))
    b[..., 0] = 0.3
    assert mse(a, b) == pytest.approx(0.09 / 3, abs=1e-15)
