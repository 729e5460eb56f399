import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symfuse.errors import ExpertFailure, InvariantError, PanelError, TrainingSizeError
from symfuse.fusion import (
    ALPHA_FLOOR,
    CascadeConfig,
    SupervisorSide,
    TrainedSupervisor,
    bayes_fuse,
    calibrate,
    cascade_scores,
    cascaded_fuse,
    combine,
    decide,
    default_thresholds,
    estimate_side,
    expected_execution_fraction,
    fuse_max,
    fuse_sum,
    quality_index,
    score_variance,
    supervisor_quality,
    train_supervisor,
)

from oracles import alpha_m_v


def side(m, v, a):
    return SupervisorSide(np.atleast_1d(m), np.atleast_1d(v), np.atleast_1d(a), 4)


def test_quality_index_and_variance():
    assert quality_index(1.3, 0.9) == 0.9
    assert quality_index(0, 2) == 0
    assert quality_index(1, 1) == 1
    assert score_variance(1) == 1
    assert score_variance(2) == pytest.approx(0.25)
    assert score_variance(0) == pytest.approx(400)
    with pytest.raises(InvariantError):
        score_variance(-0.1)
    assert supervisor_quality(0.5) == pytest.approx(1.0)


def test_training_worked_example():
    sup = train_supervisor([[0.9], [0.8], [0.9], [0.8]], [[0.1], [0.0], [0.2], [0.1]])
    assert sup.client.alpha[0] == pytest.approx(0.01)
    assert sup.client.bias[0] == pytest.approx(0.15)
    assert sup.client.variance[0] == pytest.approx(0.0025)
    assert sup.experts == ("1",)


def test_training_matches_oracle(rng):
    z = rng.normal(0.1, 0.2, 9)
    s = rng.uniform(0.3, 3.0, 9)
    side_ = estimate_side(z, s)
    a, m, v = alpha_m_v(z, s)
    assert side_.alpha[0] == pytest.approx(a)
    assert side_.bias[0] == pytest.approx(m)
    assert side_.variance[0] == pytest.approx(v)


def test_identical_errors_hit_floor():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        s = estimate_side(np.full(5, 0.3))
    assert s.alpha[0] == ALPHA_FLOOR
    assert s.bias[0] == pytest.approx(0.3)


def test_training_errors():
    with pytest.raises(TrainingSizeError):
        estimate_side(np.zeros((3, 2)))
    with pytest.raises(PanelError):
        estimate_side(np.array([[0.1, np.nan]] * 5))
    with pytest.raises(PanelError):
        train_supervisor(np.zeros((4, 2)), np.zeros((4, 3)))
    with pytest.raises(PanelError):
        train_supervisor(np.zeros((4, 2)), np.zeros((4, 2)), experts=["a"])


def test_calibration_examples():
    m, v = calibrate(side(0.15, 0.0025, 0.01), 0.8, 1.0)
    assert m == pytest.approx(0.95) and v == pytest.approx(0.0125)
    m, v = calibrate(side(0.0, 1e-15, 0.01), 0.42, 1.0)
    assert m == pytest.approx(0.42)
    m, v = calibrate(side(0.15, 0.0025, 0.01), 0.8, 0.0)
    assert v == pytest.approx(0.0025)


def test_combine_examples():
    assert combine([0.7], [0.3]) == pytest.approx(0.7)
    assert combine([0.9, 0.7], [0.01, 0.04]) == pytest.approx(0.86)
    assert combine([0.2, 0.6, 1.0], [0.5] * 3) == pytest.approx(0.6)
    with pytest.raises(InvariantError):
        combine([0.5, 0.5], [0.1, 0.0])


def test_decide_examples():
    d = decide(0.9, 0.3)
    assert d.client and d.score == 0.9 and d.branch == "client"
    d = decide(0.8, 0.2)
    assert not d.client and d.score == 0.2
    d = decide(0.5, 0.6)
    assert d.client and d.score == 0.5
    batch = decide(np.array([0.9, 0.8]), np.array([0.3, 0.2]))
    assert batch.branch.tolist() == ["client", "impostor"]


@settings(max_examples=200, deadline=None)
@given(st.floats(-2, 3), st.floats(-2, 3))
def test_decide_reflection_flips_branch(mc, mi):
    d1 = decide(mc, mi)
    d2 = decide(1 - mi, 1 - mc)
    if abs(abs(1 - mc) - abs(mi)) > 1e-9:
        assert d1.client != d2.client


def _sup(mc, mi, alpha=0.01, v=1e-4, m=2):
    return TrainedSupervisor(
        tuple("AB"[:m]),
        side(np.full(m, mc), np.full(m, v), np.full(m, alpha)),
        side(np.full(m, mi), np.full(m, v), np.full(m, alpha)),
    )


def test_unit_quality_adaptive_equals_plain(rng):
    sup = _sup(0.1, -0.1)
    x = rng.random((50, 2))
    q = np.ones((50, 2))
    a = bayes_fuse(sup, x, q, q, adaptive=True).score
    b = bayes_fuse(sup, x, adaptive=False).score
    assert np.array_equal(a, b)


def test_higher_quality_gets_more_weight():
    sup = _sup(0.1, -0.1)
    s = np.array([score_variance(2.0), score_variance(0.5)])
    _, v = calibrate(sup.client, np.array([0.7, 0.7]), s)
    assert 1 / v[0] > 1 / v[1]
    # the fused score follows the high-quality expert
    f = bayes_fuse(sup, [0.9, 0.3], [2.0, 0.5], [2.0, 2.0]).client_score
    assert abs(f - 1.0) < abs(f - 0.5)


def test_bayes_fuse_shape_errors():
    sup = _sup(0.1, -0.1)
    with pytest.raises(PanelError):
        bayes_fuse(sup, [0.5, 0.5, 0.5])
    with pytest.raises(PanelError):
        bayes_fuse(sup, [0.5, np.nan])
    assert np.ndim(bayes_fuse(sup, [0.5, 0.5]).score) == 0


def test_simple_rules():
    assert fuse_sum([0.2, 0.8]) == pytest.approx(0.5)
    assert fuse_max([0.2, 0.8]) == 0.8
    assert fuse_sum([0.3]) == fuse_max([0.3]) == 0.3
    with pytest.raises(PanelError):
        fuse_sum([])
    with pytest.raises(PanelError):
        fuse_max(np.zeros((3, 0)))


def test_cascade_examples():
    cfg = CascadeConfig((0.5,), "max")
    assert cascaded_fuse(cfg, 0.7, [lambda: 0.4, lambda: 0.9]) == (0.4, 1)
    assert cascaded_fuse(cfg, 0.3, [lambda: 0.4, lambda: 0.9]) == (0.9, 2)
    cfg3 = CascadeConfig((0.5, 0.25), "sum")
    score, used = cascaded_fuse(cfg3, 0.0, [lambda: 0.1, lambda: 0.5, lambda: 0.6])
    assert used == 3 and score == fuse_sum([0.1, 0.5, 0.6])


def test_cascade_is_lazy_and_reports_failures():
    calls = []

    def boom():
        raise RuntimeError("matcher crashed")

    cfg = CascadeConfig((0.5,))
    cascaded_fuse(cfg, 0.9, [lambda: calls.append(1) or 0.5, boom])
    assert calls == [1]
    with pytest.raises(ExpertFailure) as info:
        cascaded_fuse(cfg, 0.1, [lambda: 0.5, boom])
    assert info.value.index == 2


def test_cascade_validation():
    with pytest.raises(InvariantError):
        CascadeConfig((0.25, 0.5))
    with pytest.raises(ValueError):
        CascadeConfig((0.5,), "median")
    with pytest.raises(PanelError):
        cascaded_fuse(CascadeConfig((0.5,)), 0.3, [lambda: 0.1])


def test_cascade_batch_matches_lazy(rng):
    cfg = CascadeConfig(default_thresholds(3), "sum")
    x = rng.random((200, 3))
    c = rng.random(200)
    fused, used = cascade_scores(cfg, x, c)
    for k in range(200):
        cols = [(lambda v=v: v) for v in x[k]]
        assert (fused[k], used[k]) == cascaded_fuse(cfg, c[k], cols)


def test_thresholds_and_fraction():
    assert default_thresholds(3) == (0.5, 0.25)
    assert default_thresholds(2, q_best=2) == (1.0,)
    assert expected_execution_fraction(1) == 1.0
    assert expected_execution_fraction(2) == pytest.approx(0.75)
    assert expected_execution_fraction(3) == pytest.approx(0.58333, abs=1e-4)
    with pytest.raises(InvariantError):
        default_thresholds(1)
