import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spomix.baseline import (
    JointTensor,
    MixtureFactors,
    _als,
    ate_error,
    cp_als,
    joint_tensor,
    joint_tensor_from_truth,
    mte_error,
    tv_distance,
)
from spomix.domain import Dataset, MixtureOfEffects
from spomix.errors import ConvergenceFailure, DimensionMismatch, NonBinaryData
from spomix.synthetic import appendix_model, exact_ground_truth, make_rng, paper_model, sample


def _factors_from_truth(truth):
    j = truth.joint.reshape(2, 2, 2, 4)  # [u, z, x, s]
    w = j.sum(axis=(1, 2, 3))
    f_z = (j.sum(axis=(2, 3)) / w[:, None]).T
    f_x = (j.sum(axis=(1, 3)) / w[:, None]).T
    f_s = (j.sum(axis=(1, 2)) / w[:, None]).T
    return MixtureFactors(w, f_z, f_x, f_s, 0.0, True)


def test_single_row_tensor_is_one_hot():
    d = Dataset(z=[[0, 1]], x=[[1, 0]], t=[1], y=[0])
    t = joint_tensor(d).values
    assert t.sum() == 1.0 and t[1, 0, 2] == 1.0


def test_joint_tensor_matches_oracle_in_large_sample():
    spec = paper_model(0, 0)
    emp = joint_tensor(sample(spec, 200_000, seed=4)).values
    ex = joint_tensor_from_truth(exact_ground_truth(spec)).values
    assert np.max(np.abs(emp - ex)) < 0.005


def test_model_a_tensor_is_a_product_mixture():
    truth = exact_ground_truth(paper_model(0, 0))
    f = _factors_from_truth(truth)
    assert np.allclose(f.joint().sum(axis=0), joint_tensor_from_truth(truth).values, atol=1e-15)
    assert tv_distance(truth, f) < 1e-15


def test_bits_encoding_for_appendix_model():
    spec = appendix_model()
    t = joint_tensor(sample(spec, 1000, seed=0), spec.z_encoding, spec.x_encoding)
    assert t.dims == (4, 4, 4)
    with pytest.raises(NonBinaryData):
        joint_tensor(Dataset(z=[[0.5, 0.5]], x=[[1, 0]], t=[1], y=[0]))


def test_rank_one_recovery():
    a, b, c = np.array([0.2, 0.8]), np.array([0.1, 0.6, 0.3]), np.array([0.4, 0.1, 0.2, 0.3])
    t = JointTensor(np.einsum("i,j,k->ijk", a, b, c))
    f = cp_als(t, 1, restarts=2, seed=0)
    assert f.residual < 1e-10
    assert np.allclose(f.f_z[:, 0], a) and np.allclose(f.f_x[:, 0], b) and np.allclose(f.f_s[:, 0], c)


def test_exact_model_a_recovered():
    truth = exact_ground_truth(paper_model(0, 0))
    f = cp_als(joint_tensor_from_truth(truth), 2, seed=0)
    assert tv_distance(truth, f) < 1e-6


def test_exact_model_b_not_a_product_mixture():
    truth = exact_ground_truth(paper_model(1, 0))
    f = cp_als(joint_tensor_from_truth(truth), 2, seed=0)
    assert f.residual > 1e-3
    assert tv_distance(truth, f) > 0.1


def test_factor_normalization_and_order():
    f = cp_als(joint_tensor(sample(paper_model(0.5, 0.5), 1000, seed=3)), 2, seed=1)
    assert np.all(f.weights >= 0) and f.weights.sum() == pytest.approx(1.0)
    for m in (f.f_z, f.f_x, f.f_s):
        assert np.all(m >= 0) and np.allclose(m.sum(axis=0), 1.0)
    assert f.weights[0] >= f.weights[1]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_als_residual_non_increasing(seed, k):
    rng = np.random.default_rng(seed)
    t = rng.random((2, 3, 4))
    t /= t.sum()
    *_, history, _ = _als(t, k, make_rng(seed), 200, 0.0)
    assert np.all(np.diff(history) <= 1e-12)


def test_cp_als_deterministic():
    t = joint_tensor(sample(paper_model(1, 0), 1000, seed=5))
    a, b = cp_als(t, 2, seed=7), cp_als(t, 2, seed=7)
    for f in ("weights", "f_z", "f_x", "f_s"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_convergence_failure_warns():
    t = joint_tensor(sample(paper_model(1, 0), 1000, seed=5))
    with pytest.warns(ConvergenceFailure):
        f = cp_als(t, 2, restarts=1, seed=0, max_iter=1, tol=0.0)
    assert not f.converged


def _swap(f: MixtureFactors) -> MixtureFactors:
    p = [1, 0]
    return MixtureFactors(f.weights[p], f.f_z[:, p], f.f_x[:, p], f.f_s[:, p], f.residual, f.converged)


def test_tv_distance_label_symmetry_and_range():
    truth = exact_ground_truth(paper_model(0, 0))
    f = _factors_from_truth(truth)
    assert tv_distance(truth, _swap(f)) < 1e-15
    est = cp_als(joint_tensor(sample(paper_model(1, 0), 500, seed=0)), 2, seed=0)
    v = tv_distance(truth, est)
    assert 0 <= v <= 1
    assert tv_distance(truth, _swap(est)) == pytest.approx(v, abs=1e-15)
    with pytest.raises(DimensionMismatch):
        tv_distance(exact_ground_truth(appendix_model()), est)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_mte_error_properties(seed, k):
    rng = np.random.default_rng(seed)
    a = MixtureOfEffects(rng.dirichlet(np.ones(k)), rng.uniform(-1, 1, k))
    b = MixtureOfEffects(rng.dirichlet(np.ones(k)), rng.uniform(-1, 1, k))
    p = rng.permutation(k)
    bp = MixtureOfEffects(b.weights[p], b.effects[p])
    assert mte_error(a, a) == 0.0
    assert mte_error(a, b) >= 0
    assert mte_error(a, bp) == pytest.approx(mte_error(a, b), abs=1e-15)
    assert mte_error(b, a) == pytest.approx(mte_error(a, b), abs=1e-15)


def test_metric_examples():
    t = MixtureOfEffects([0.5, 0.5], [-0.75, 0.75])
    assert mte_error(t, MixtureOfEffects([0.5, 0.5], [0.75, -0.75])) == 0.0
    assert ate_error(0.25, 0.25) == 0.0
    assert ate_error(0, 0.1) == pytest.approx(0.01)


def test_appendix_ate_error_concentration():
    from spomix.moments import estimate_bundle
    from spomix.spo import ate

    spec = appendix_model()
    truth = exact_ground_truth(spec).ate
    ok = sum(ate_error(truth, ate(estimate_bundle(sample(spec, 100_000, s)))) < 4e-4 for s in range(100))
    assert ok >= 95
