import numpy as np
import pytest
from hypothesis import given, strategies as st

from biascope.errors import DegenerateAttractor
from biascope.synthgen.ifs import (
    AffineMap2D,
    IfsSystem,
    _check_bounded,
    chaos_points,
    det_probabilities,
    render_fractal,
    sample_ifs,
    sierpinski,
)


def box_count_dimension(occupied: np.ndarray, scales=(2, 4, 8, 16, 32, 64)) -> float:
    """Independent oracle: least-squares slope of log N(s) against log(1/s)."""
    size = occupied.shape[0]
    counts = []
    for s in scales:
        blocks = occupied.reshape(size // s, s, size // s, s).any(axis=(1, 3))
        counts.append(blocks.sum())
    slope, _ = np.polyfit(np.log(1.0 / np.array(scales)), np.log(counts), 1)
    return float(slope)


def test_sample_ifs_is_deterministic():
    a, b = sample_ifs(7), sample_ifs(7)
    assert a == b
    assert a.to_json() == b.to_json()


@pytest.mark.parametrize("seed", range(25))
def test_sampled_systems_satisfy_invariants(seed):
    ifs = sample_ifs(seed)
    ifs.check()
    assert 2 <= len(ifs.maps) <= 8
    assert abs(ifs.probabilities.sum() - 1) <= 1e-9
    assert ifs.weighted_contraction <= 0.95
    assert all(m.sigma_max <= 1 + 1e-12 and m.p > 0 for m in ifs.maps)


def test_probabilities_follow_det_with_floor():
    ifs = sample_ifs(11)
    lin, _, p = ifs.as_arrays()
    w = np.abs(lin[:, 0, 0] * lin[:, 1, 1] - lin[:, 0, 1] * lin[:, 1, 0]) + 0.01
    np.testing.assert_allclose(p, w / w.sum(), rtol=0, atol=1e-12)


def test_det_probabilities_floor_keeps_singular_maps_selectable():
    lin = np.array([[[1.0, 0.0], [0.0, 0.0]], [[0.5, 0.0], [0.0, 0.5]]])
    p = det_probabilities(lin)
    assert p[0] > 0
    np.testing.assert_allclose(p, [0.01 / 0.27, 0.26 / 0.27])


def test_collapsed_single_map_is_degenerate():
    ifs = IfsSystem((AffineMap2D(0.5, 0, 0, 0.5, 0, 0, 1.0),), seed=0)
    with pytest.raises(DegenerateAttractor):
        render_fractal(ifs, 64, seed=0)


def test_sierpinski_box_count_dimension():
    img = render_fractal(sierpinski(), 256, n_points=10 * 256 * 256, seed=1)
    dim = box_count_dimension(img[:, :, 0] > 0)
    assert abs(dim - np.log(3) / np.log(2)) < 0.1


def test_box_count_oracle_on_known_sets():
    full = np.ones((256, 256), dtype=bool)
    assert box_count_dimension(full) == pytest.approx(2.0, abs=1e-9)
    line = np.zeros((256, 256), dtype=bool)
    line[100, :] = True
    assert box_count_dimension(line) == pytest.approx(1.0, abs=1e-9)


def test_render_shape_range_and_determinism():
    ifs = sample_ifs(3)
    a = render_fractal(ifs, 64, seed=5)
    b = render_fractal(ifs, 64, seed=5)
    assert a.shape == (64, 64, 1)
    assert np.array_equal(a, b)
    assert a.min() >= 0 and a.max() == 1.0
    occ = (a > 0).mean()
    assert 0.01 <= occ <= 0.5


def test_render_rotation_varies_instances():
    ifs = sample_ifs(3)
    a = render_fractal(ifs, 64, seed=5, max_rotation=15)
    b = render_fractal(ifs, 64, seed=6, max_rotation=15)
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("size,n_points", [(8, None), (64, 100)])
def test_render_preconditions(size, n_points):
    with pytest.raises(ValueError):
        render_fractal(sierpinski(), size, n_points)


def test_orbit_stays_bounded():
    for seed in range(10):
        pts = chaos_points(sample_ifs(seed), 20000, seed)
        _check_bounded(pts)


def test_escape_is_detected():
    pts = np.zeros((2000, 2))
    pts[:1000] = np.random.default_rng(0).uniform(-1, 1, size=(1000, 2))
    pts[1500] = [50.0, 0.0]
    with pytest.raises(AssertionError):
        _check_bounded(pts)


def test_json_roundtrip():
    ifs = sample_ifs(21)
    assert IfsSystem.from_json(ifs.to_json()) == ifs


@given(st.integers(min_value=0, max_value=2**63 - 1))
def test_property_sample_ifs_invariants(seed):
    ifs = sample_ifs(seed)
    ifs.check()
    assert ifs.weighted_contraction <= 0.95
