import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biascope.synthgen.cue import (
    N_CLASSES,
    SHAPES,
    TEXTURES,
    TextureOracle,
    gen_cue_conflict,
    render_cue_conflict,
    shape_oracle,
)


@pytest.fixture(scope="module")
def texture_oracle():
    return TextureOracle()


def test_libraries_have_eight_classes():
    assert len(SHAPES) == len(TEXTURES) == N_CLASSES == 8


def test_gen_returns_both_labels_and_valid_image():
    img, s, t = gen_cue_conflict(3, 5, seed=1)
    assert (s, t) == (3, 5)
    assert img.shape == (64, 64, 3) and img.dtype == np.float64
    assert np.isfinite(img).all() and img.min() >= 0 and img.max() <= 1


def test_deterministic_in_seed():
    a = render_cue_conflict(2, 6, seed=9)
    b = render_cue_conflict(2, 6, seed=9)
    assert np.array_equal(a.image, b.image) and np.array_equal(a.mask, b.mask)
    assert not np.array_equal(a.image, render_cue_conflict(2, 6, seed=10).image)


@pytest.mark.parametrize("bad", [(-1, 0), (0, 8), (8, 1)])
def test_class_range_checked(bad):
    with pytest.raises(ValueError):
        gen_cue_conflict(*bad, seed=0)


def test_silhouette_fully_inside_frame():
    for seed in range(50):
        sample = render_cue_conflict(seed % 8, (seed + 1) % 8, seed)
        p = sample.pose
        assert sample.mask.any()
        # every silhouette lies within its unit circle, which must fit in the frame
        assert p.radius <= p.cx <= 64 - p.radius and p.radius <= p.cy <= 64 - p.radius


def test_pose_scale_range():
    for seed in range(50):
        pose = render_cue_conflict(0, 1, seed).pose
        assert 0.4 * 32 <= pose.radius <= 0.8 * 32


def test_same_shape_different_texture_keeps_mask():
    a = render_cue_conflict(4, 0, seed=77)
    b = render_cue_conflict(4, 7, seed=77)
    assert np.array_equal(a.mask, b.mask)


def test_shape_oracle_on_every_class_pair():
    hits = 0
    total = 0
    for s in range(8):
        for t in range(8):
            for seed in range(3):
                sample = render_cue_conflict(s, t, 1000 * s + 10 * t + seed)
                hits += shape_oracle(sample.mask) == s
                total += 1
    assert hits == total


def test_texture_oracle_threshold(texture_oracle):
    rng = np.random.default_rng(4242)
    correct = 0
    n = 160
    for i in range(n):
        s, t = rng.choice(8, size=2, replace=False)
        sample = render_cue_conflict(int(s), int(t), 900_000 + i)
        correct += texture_oracle(sample.image, sample.mask) == t
    assert correct / n >= 0.95


@given(st.integers(0, 7), st.integers(0, 7), st.integers(0, 2**62))
@settings(max_examples=25)
def test_property_shape_oracle_recovers_label(s, t, seed):
    sample = render_cue_conflict(s, t, seed)
    assert shape_oracle(sample.mask) == s
