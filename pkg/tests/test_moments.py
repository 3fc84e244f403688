from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from helpers import oracle_product_moment
from spomix.domain import Dataset, MomentBundle
from spomix.errors import EmptyDataset
from spomix.moments import condition_diagnostic, cross_moment, estimate_bundle, mean_vector
from spomix.synthetic import exact_bundle, exact_ground_truth, paper_model, sample


def test_mean_vector_basic():
    d = Dataset(z=[[1, 0], [0, 1]], x=[[1, 0], [0, 1]], t=[0, 1], y=[0, 0])
    assert np.array_equal(mean_vector(d), [0.5, 0.5])
    d1 = Dataset(z=[[1, 0]], x=[[0.3, 0.3]], t=[0], y=[0])
    assert np.array_equal(mean_vector(d1), [0.3, 0.3])


def test_cross_moment_basic():
    d = Dataset(z=np.eye(2), x=np.eye(2), t=[0, 1], y=[0, 0])
    assert np.array_equal(cross_moment(d), [[0.5, 0], [0, 0.5]])
    assert np.array_equal(cross_moment(d, weight=True), np.zeros((2, 2)))


def test_empty_dataset_raises():
    d = Dataset(z=np.zeros((0, 2)), x=np.zeros((0, 2)), t=[], y=[])
    with pytest.raises(EmptyDataset):
        mean_vector(d)
    with pytest.raises(EmptyDataset):
        cross_moment(d)


def test_one_row_per_arm():
    d = Dataset(z=[[1, 2], [3, 4]], x=[[5, 6], [7, 8]], t=[0, 1], y=[1, 0.5])
    b = estimate_bundle(d)
    assert np.array_equal(b.m_zx_t[0], np.outer([1, 2], [5, 6]))
    assert np.array_equal(b.m_zx_t[1], np.outer([3, 4], [7, 8]))
    assert np.array_equal(b.m_zxy_t[1], 0.5 * np.outer([3, 4], [7, 8]))
    assert np.array_equal(b.m_zy_t[0], [1, 2])
    assert b.n_t == (1, 1)


def _model_b_arm1_by_hand():
    # P(z, x, U=u | T=1) enumerated with rationals, independently of the package
    q = Fraction
    pz1 = {0: q(1, 4), 1: q(3, 4)}  # P(Z=1 | U=u), same table for X
    pt1 = {0: q(3, 4), 1: q(1, 4)}  # P(T=1 | Z=z), free of U when mu_zt = 1
    m = [[q(0)] * 2 for _ in range(2)]
    p_t1 = q(0)
    for u in (0, 1):
        for z in (0, 1):
            for x in (0, 1):
                pz = pz1[u] if z == 1 else 1 - pz1[u]
                px = pz1[u] if x == 1 else 1 - pz1[u]
                p = q(1, 2) * pz * px * pt1[z]
                m[z][x] += p
                p_t1 += p
    return [[float(m[i][j] / p_t1) for j in range(2)] for i in range(2)], float(p_t1)


def test_model_b_exact_moments():
    b = exact_bundle(paper_model(1, 0))
    assert np.allclose(b.m_x, [0.5, 0.5], atol=1e-15)
    assert np.allclose(b.m_zx_t[1], np.array([[15, 9], [3, 5]]) / 32, atol=1e-15)
    by_hand, p_t1 = _model_b_arm1_by_hand()
    assert p_t1 == 0.5
    assert np.allclose(b.m_zx_t[1], by_hand, atol=1e-15)


def test_condition_diagnostic():
    eye = np.eye(2)
    b = MomentBundle(m_x=[0.5, 0.5], m_zx_t=(eye, eye), m_zy_t=([0, 0], [0, 0]), m_zxy_t=(eye, eye))
    a0, a1 = condition_diagnostic(b)
    assert a0.sigma_min == pytest.approx(1.0) and a0.condition == pytest.approx(1.0)
    assert not a0.rank_deficient
    ones = np.ones((2, 2))
    b = MomentBundle(m_x=[0.5, 0.5], m_zx_t=(ones, eye), m_zy_t=([0, 0], [0, 0]), m_zxy_t=(eye, eye))
    assert condition_diagnostic(b)[0].rank_deficient
    arm1 = condition_diagnostic(exact_bundle(paper_model(1, 0)))[1]
    assert not arm1.rank_deficient and arm1.sigma_min > 0.05


def test_sampled_bundle_close_to_oracle():
    spec = paper_model(1, 0)
    est = estimate_bundle(sample(spec, 100_000, seed=11))
    ex = exact_bundle(spec)
    for t in (0, 1):
        assert np.max(np.abs(est.m_zx_t[t] - ex.m_zx_t[t])) < 0.01
        assert np.max(np.abs(est.m_zy_t[t] - ex.m_zy_t[t])) < 0.01
        assert np.max(np.abs(est.m_zxy_t[t] - ex.m_zxy_t[t])) < 0.01


def test_second_moment_factorizes_through_u_in_model_a():
    spec = paper_model(0, 0)
    truth = exact_ground_truth(spec)
    ok = 0
    for seed in range(40):
        b = estimate_bundle(sample(spec, 100_000, seed))
        dev = max(np.max(np.abs(b.m_zx_t[t] - oracle_product_moment(truth, spec, t))) for t in (0, 1))
        ok += dev < 0.02
    assert ok >= 38


@settings(max_examples=40, deadline=None)
@given(arrays(float, (12, 3), elements=st.floats(-5, 5)), st.randoms(use_true_random=False))
def test_moments_row_permutation_invariant(a, rnd):
    d = Dataset(z=a[:, :2], x=a[:, 1:], t=np.arange(12) % 2, y=a[:, 0])
    perm = list(range(12))
    rnd.shuffle(perm)
    p = d.take(perm)
    assert np.allclose(mean_vector(p), mean_vector(d), rtol=1e-12, atol=1e-12)
    assert np.allclose(cross_moment(p, weight=True), cross_moment(d, weight=True), rtol=1e-12, atol=1e-12)


def test_oracle_bundle_deterministic():
    a, b = exact_bundle(paper_model(0.3, 0.7)), exact_bundle(paper_model(0.3, 0.7))
    assert a.to_json() == b.to_json()


def test_compensated_path_matches_plain(monkeypatch):
    import spomix.moments as mm

    d = sample(paper_model(1, 0), 5000, seed=2)
    plain = estimate_bundle(d)
    monkeypatch.setattr(mm, "_COMPENSATE_ABOVE", 100)
    monkeypatch.setattr(mm, "_CHUNK", 333)
    chunked = estimate_bundle(d)
    assert np.allclose(chunked.m_zxy_t[1], plain.m_zxy_t[1], atol=1e-15)
    assert np.allclose(chunked.m_x, plain.m_x, atol=1e-15)
