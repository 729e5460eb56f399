import numpy as np
import pytest

from symfuse.errors import DimensionError, InvariantError
from symfuse.quality import (
    QualityConfig,
    assess_fingerprint,
    block_average,
    block_correlation,
    block_quality,
    downsize,
    interest_mask,
    overall_quality,
    pair_correlation,
)
from symfuse.synth import add_noise, generate_test_pattern


def test_block_average_constant():
    assert np.all(block_average(np.full((16, 24), 0.7), 8) == pytest.approx(0.7))


def test_block_average_single_pixel():
    f = np.zeros((8, 8))
    f[3, 5] = 64
    assert block_average(f, 8).tolist() == [[1.0]]


def test_block_average_partial_blocks():
    f = np.arange(100, dtype=float).reshape(10, 10)
    out = block_average(f, 8)
    assert out.shape == (2, 2)
    assert out[1, 1] == pytest.approx(f[8:, 8:].mean())


def test_block_average_errors():
    with pytest.raises(InvariantError):
        block_average(np.zeros((4, 4)), 1)
    with pytest.raises(DimensionError):
        block_average(np.zeros(4), 2)


def test_block_correlation_cases(rng):
    a = rng.random((8, 8))
    assert block_correlation(a, a, 8)[0, 0] == pytest.approx(1.0)
    assert block_correlation(a, 1 - a, 8)[0, 0] == pytest.approx(-1.0)
    assert block_correlation(np.full((8, 8), 0.3), a, 8)[0, 0] == 0.0
    with pytest.raises(DimensionError):
        block_correlation(a, a[:4], 8)


def test_pair_correlation_vanishing_field(rng):
    a = rng.random((8, 16)) + 0.1
    c = np.zeros((8, 16))
    assert pair_correlation(a, c, 8).tolist() == [[-1.0, -1.0]]
    # both vanishing keeps the zero-variance convention
    assert pair_correlation(c, c, 8).tolist() == [[0.0, 0.0]]


def test_block_quality_examples():
    assert block_quality(-1.0, 0.9) == pytest.approx(0.9)
    assert block_quality(1.0, 0.77) == 0
    assert block_quality(0.0, 0.6) == pytest.approx(0.3)
    with pytest.raises(InvariantError):
        block_quality(1.2, 0.5)
    with pytest.raises(DimensionError):
        block_quality(np.zeros(2), np.zeros(3))


def test_interest_mask():
    assert not interest_mask(np.zeros((3, 3)), 0.1).any()
    s = np.zeros((2, 2))
    s[1, 0] = 0.5
    assert interest_mask(s, 0.3).tolist() == [[False, False], [True, False]]
    assert not interest_mask(np.full(3, 0.1), 0.1).any()
    with pytest.raises(InvariantError):
        interest_mask(s, -1)


def test_overall_quality():
    assert overall_quality(np.ones((2, 2)), np.zeros((2, 2), bool)) == 0.0
    assert overall_quality(np.full((2, 2), 0.7), np.ones((2, 2), bool)) == pytest.approx(0.7)
    assert overall_quality(np.array([0.2, 0.8, 0.9]), np.array([1, 1, 0], bool)) == pytest.approx(0.5)


def test_black_image_quality_zero():
    rep = assess_fingerprint(np.zeros((64, 64)))
    assert rep.quality == 0.0 and not rep.mask.any()


def test_grating_beats_noise():
    grating = generate_test_pattern(0, size=128)
    noise = np.random.default_rng(3).random((128, 128))
    assert assess_fingerprint(grating).quality > assess_fingerprint(noise).quality


def test_noise_ladder_monotone():
    g = generate_test_pattern(0, size=128)
    qs = [assess_fingerprint(add_noise(g, s, seed=7)).quality for s in (0.1, 0.2, 0.4)]
    assert qs[0] > qs[1] > qs[2]


def test_quality_range_and_report(rng):
    rep = assess_fingerprint(rng.random((48, 40)), keep_fields=True)
    assert 0 <= rep.quality <= 1
    assert rep.quality_map.shape == (6, 5) == rep.mask.shape
    assert np.all((rep.quality_map >= 0) & (rep.quality_map <= 1))
    assert set(rep.fields) == {"image", "z", "responses", "inhibited", "total"}


def test_downsize_rule():
    cfg = QualityConfig()
    assert cfg.factor_for((300, 200)) == 1
    assert cfg.factor_for((301, 200)) == 2
    assert QualityConfig(downsize_factor=3).factor_for((50, 50)) == 3
    big = generate_test_pattern(0, size=320)
    assert assess_fingerprint(big).downsize_factor == 2
    assert downsize(np.arange(16.0).reshape(4, 4), 2)[0, 0] == pytest.approx(2.5)


def test_config_validation():
    with pytest.raises(InvariantError):
        QualityConfig(block_size=1)
    with pytest.raises(InvariantError):
        QualityConfig(tau_s=-0.1)


def test_single_order_config():
    rep = assess_fingerprint(generate_test_pattern(0, size=64), QualityConfig(orders=(0,)))
    assert np.all(rep.correlation_map == 0)
