import json
import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfdeblur.lightfield import (Intrinsics, LightField, LightFieldError, angular_sample,
                                 angular_sample_positions, extract_epi, load_lightfield,
                                 sample_quadrilinear, save_lightfield, spiral_order)

from .conftest import random_lf
from .oracles import check_spiral, tent_sample


# ------------------------------------------------------------------ container

def test_rejects_out_of_range_and_nonfinite():
    with pytest.raises(LightFieldError):
        LightField(np.full((1, 1, 2, 2, 3), 1.5, dtype=np.float32))
    bad = np.zeros((1, 1, 2, 2, 3), dtype=np.float32)
    bad[0, 0, 0, 0, 0] = np.nan
    with pytest.raises(LightFieldError):
        LightField(bad)
    with pytest.raises(LightFieldError):
        LightField(np.zeros((1, 1, 2, 2, 4), dtype=np.float32))


def test_immutable(small_lf):
    with pytest.raises(ValueError):
        small_lf.data[0, 0, 0, 0, 0] = 0.5


def test_intrinsics_offsets_vanish_at_centre():
    intr = Intrinsics(baseline_px=0.9)
    assert intr.view_offset(2, 2, (5, 5)) == (0.0, 0.0)
    assert intr.view_offset(4, 0, (5, 5)) == pytest.approx((1.8, -1.8))
    with pytest.raises(LightFieldError):
        Intrinsics(focal_px=0)
    with pytest.raises(LightFieldError):
        Intrinsics(baseline_px=-1)


# ------------------------------------------------------------------------ I/O

def test_roundtrip_8bit_exact(tmp_path, rng):
    lf = random_lf(rng, 3, 3, 5, 7, Intrinsics(420.0, 0.9, (3.0, 2.0)), quantized=True)
    save_lightfield(lf, tmp_path / "a")
    back = load_lightfield(tmp_path / "a")
    np.testing.assert_array_equal(back.data, lf.data)
    assert back.intrinsics == lf.intrinsics
    save_lightfield(back, tmp_path / "b")
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_roundtrip_float(tmp_path, rng):
    lf = random_lf(rng, 3, 1, 4, 6)
    save_lightfield(lf, tmp_path / "f", bit_depth=32)
    np.testing.assert_array_equal(load_lightfield(tmp_path / "f").data, lf.data)
    save_lightfield(lf, tmp_path / "q", bit_depth=8)
    err = np.abs(load_lightfield(tmp_path / "q").data - lf.data).max()
    assert err <= 1 / 255


def test_full_size_directory(tmp_path):
    data = np.zeros((5, 5, 320, 512, 3), dtype=np.float32)
    save_lightfield(LightField(data), tmp_path / "lf")
    lf = load_lightfield(tmp_path / "lf")
    assert lf.angular_size == (5, 5)
    assert lf.spatial_size == (320, 512)


def test_missing_view_named(tmp_path, rng):
    save_lightfield(random_lf(rng, 5, 5, 4, 4), tmp_path / "lf")
    (tmp_path / "lf" / "u3_v1.png").unlink()
    with pytest.raises(LightFieldError, match="u3_v1.png"):
        load_lightfield(tmp_path / "lf")


def test_extra_view_and_missing_manifest(tmp_path, rng):
    save_lightfield(random_lf(rng, 2, 2, 4, 4), tmp_path / "lf")
    (tmp_path / "lf" / "u0_v0.png").rename(tmp_path / "lf" / "u9_v9.png")
    with pytest.raises(LightFieldError, match="u0_v0.png"):
        load_lightfield(tmp_path / "lf")
    (tmp_path / "lf" / "u9_v9.png").rename(tmp_path / "lf" / "u0_v0.png")
    load_lightfield(tmp_path / "lf")
    shutil.copy(tmp_path / "lf" / "u0_v0.png", tmp_path / "lf" / "u5_v0.png")
    with pytest.raises(LightFieldError, match="u5_v0.png"):
        load_lightfield(tmp_path / "lf")
    with pytest.raises(LightFieldError, match="manifest"):
        load_lightfield(tmp_path / "nothing")


def test_dimension_mismatch_named(tmp_path, rng):
    save_lightfield(random_lf(rng, 1, 2, 4, 4), tmp_path / "lf")
    m = json.loads((tmp_path / "lf" / "manifest.json").read_text())
    m["spatial_size"] = [4, 5]
    (tmp_path / "lf" / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(LightFieldError, match="u0_v0.png"):
        load_lightfield(tmp_path / "lf")


# --------------------------------------------------------------------- spiral

def test_spiral_small_cases():
    assert spiral_order(1, 1) == [(0, 0)]
    assert spiral_order(3, 3) == [(1, 1), (1, 2), (0, 2), (0, 1), (0, 0),
                                  (1, 0), (2, 0), (2, 1), (2, 2)]
    seq = spiral_order(5, 5)
    assert len(seq) == 25 and seq[0] == (2, 2) and seq[-1] == (4, 4)
    assert check_spiral(seq, 5, 5) == []


@given(st.integers(0, 6))
def test_spiral_square_grids_pass_checker(k):
    n = 2 * k + 1
    assert check_spiral(spiral_order(n, n), n, n) == []
    assert spiral_order(n, n) == spiral_order(n, n)


def test_spiral_non_square_is_permutation():
    seq = spiral_order(3, 5)
    assert sorted(seq) == [(a, b) for a in range(3) for b in range(5)]
    assert seq[0] == (1, 2)


@pytest.mark.parametrize("shape", [(2, 3), (3, 4), (0, 1)])
def test_spiral_rejects_even(shape):
    with pytest.raises(LightFieldError):
        spiral_order(*shape)


def test_angular_sample_examples():
    seq = spiral_order(5, 5)
    assert angular_sample(seq, 25) == seq
    assert angular_sample_positions(25, 10) == [0, 3, 5, 8, 11, 13, 16, 19, 21, 24]
    assert angular_sample(seq, 10) == [seq[i] for i in (0, 3, 5, 8, 11, 13, 16, 19, 21, 24)]
    assert angular_sample(seq, 1) == [(2, 2)]
    for bad in (0, 26):
        with pytest.raises(LightFieldError):
            angular_sample(seq, bad)


@given(st.integers(1, 200), st.data())
def test_angular_sample_positions_properties(L, data):
    n = data.draw(st.integers(1, L))
    pos = angular_sample_positions(L, n)
    assert len(pos) == n
    assert all(a < b for a, b in zip(pos, pos[1:]))
    assert pos[0] == 0
    if n >= 2:
        assert pos[-1] == L - 1
    # independent oracle: nearest integer to the uniform stride, ties upward
    for i, p in enumerate(pos):
        exact = i * (L - 1) / (n - 1) if n > 1 else 0
        assert abs(p - exact) <= 0.5


# -------------------------------------------------------------- interpolation

def test_grid_nodes_exact(small_lf):
    for u, v, y, x in [(0, 0, 0, 0), (2, 1, 7, 3), (1, 2, 4, 7)]:
        np.testing.assert_array_equal(sample_quadrilinear(small_lf, x, y, u, v),
                                      small_lf.data[u, v, y, x])


def test_angular_blend_example():
    data = np.zeros((3, 3, 4, 4, 3), dtype=np.float32)
    data[1] = 0.2
    data[2] = 0.4
    lf = LightField(data)
    val = sample_quadrilinear(lf, 1.3, 2.7, 1.5, 0.25)
    np.testing.assert_allclose(val, 0.3, atol=1e-7)
    np.testing.assert_allclose(val, tent_sample(lf.data, 1.3, 2.7, 1.5, 0.25), atol=1e-7)


def test_clamp_rule(small_lf):
    np.testing.assert_array_equal(sample_quadrilinear(small_lf, -5.0, 2.0, 1.0, 1.0),
                                  sample_quadrilinear(small_lf, 0.0, 2.0, 1.0, 1.0))
    np.testing.assert_array_equal(sample_quadrilinear(small_lf, 3.0, 2.0, 1.0, 9.0),
                                  small_lf.data[1, 2, 2, 3])


coord = st.floats(-3.0, 12.0, allow_nan=False)


@settings(max_examples=60)
@given(coord, coord, coord, coord)
def test_matches_tent_oracle(x, y, u, v):
    lf = random_lf(np.random.default_rng(5), 3, 4, 6, 9)
    np.testing.assert_allclose(sample_quadrilinear(lf, x, y, u, v),
                               tent_sample(lf.data, x, y, u, v), atol=1e-6)


@given(coord, coord, coord, coord, st.sampled_from([0.0, 0.25, 0.7, 1.0]))
def test_constant_field_exact(x, y, u, v, c):
    lf = LightField(np.full((3, 3, 5, 5, 3), c, dtype=np.float32))
    np.testing.assert_array_equal(sample_quadrilinear(lf, x, y, u, v), np.float32(c))


@settings(max_examples=40)
@given(coord, coord, coord, coord, st.integers(0, 3), st.floats(1e-6, 0.3))
def test_continuity(x, y, u, v, axis, eps):
    lf = random_lf(np.random.default_rng(9), 3, 3, 6, 6)
    a = np.array([x, y, u, v])
    b = a.copy()
    b[axis] += eps
    d = np.abs(sample_quadrilinear(lf, *b).astype(np.float64)
               - sample_quadrilinear(lf, *a).astype(np.float64))
    rng_ = float(lf.data.max() - lf.data.min())
    assert np.all(d <= eps * rng_ * 2 + 1e-6)


# ------------------------------------------------------------------------ EPI

def test_epi_shapes_and_content():
    data = np.zeros((5, 5, 320, 512, 3), dtype=np.float32)
    for u in range(5):
        data[u] = u / 10
    lf = LightField(data)
    epi = extract_epi(lf, "horizontal", 100, 2)
    assert epi.shape[:2] == (5, 512)
    for i in range(5):
        np.testing.assert_array_equal(epi[i], np.float32(i / 10))
    assert extract_epi(lf, "vertical", 10, 1).shape[:2] == (5, 320)


def test_epi_identical_views_give_identical_rows(rng):
    view = rng.random((6, 7, 3)).astype(np.float32)
    lf = LightField(np.broadcast_to(view, (3, 3, 6, 7, 3)).copy())
    epi = extract_epi(lf, "horizontal", 2, 0)
    assert all(np.array_equal(epi[0], r) for r in epi)


@pytest.mark.parametrize("args", [("horizontal", 6, 0), ("horizontal", 0, 3),
                                  ("vertical", 7, 0), ("vertical", 0, -1), ("diagonal", 0, 0)])
def test_epi_out_of_range(args, rng):
    lf = random_lf(rng, 3, 3, 6, 7)
    with pytest.raises(LightFieldError):
        extract_epi(lf, *args)
