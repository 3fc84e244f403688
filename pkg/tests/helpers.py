"""Independent oracles shared across test modules."""
from fractions import Fraction

import numpy as np

from spomix.domain import MixtureOfEffects, MomentSequence


def exact_forward_moments(mix: MixtureOfEffects) -> MomentSequence:
    """nu_1..nu_{2k-1} in rational arithmetic, rounded once at the end.

    The float inputs are taken at face value (Fraction of a float is exact),
    so the only error left is the final rounding of each moment.
    """
    w = [Fraction(float(v)) for v in mix.weights]
    e = [Fraction(float(v)) for v in mix.effects]
    vals = [float(sum(wj * ej**l for wj, ej in zip(w, e))) for l in range(1, 2 * mix.k)]
    return MomentSequence(k=mix.k, values=np.array(vals))


def random_mixture(rng, k, w_floor=0.05, gap=0.05, lo=-1.0, hi=1.0) -> MixtureOfEffects:
    """Effects uniform on [lo, hi] with pairwise gap >= ``gap``; weights >= ``w_floor``."""
    while True:
        e = np.sort(rng.uniform(lo, hi, size=k))
        if k == 1 or np.min(np.diff(e)) >= gap:
            break
    w = w_floor + (1.0 - k * w_floor) * rng.dirichlet(np.ones(k))
    return MixtureOfEffects.canonical(w, e)


def max_param_error(a: MixtureOfEffects, b: MixtureOfEffects) -> float:
    return float(max(np.max(np.abs(a.weights - b.weights)), np.max(np.abs(a.effects - b.effects))))


def oracle_product_moment(truth, spec, arm):
    """E[Z|U,t] diag(P[U|t]) E[X|U,t]^T from the enumerated joint."""
    j = truth.joint.sum(axis=4)[:, :, :, arm]  # [u, z, x]
    p_ut = j.sum(axis=(1, 2))
    p_u_given_t = p_ut / p_ut.sum()
    ez = spec.z_features.T @ (j.sum(axis=2) / p_ut[:, None]).T  # [d_z, u]
    ex = spec.x_features.T @ (j.sum(axis=1) / p_ut[:, None]).T  # [d_x, u]
    return ez @ np.diag(p_u_given_t) @ ex.T


def random_spec(rng, k, rct=False, d=None):
    """Random one-hot model with k latent classes and d-valued Z and X."""
    from spomix.synthetic import ModelSpec

    d = k if d is None else d

    def cond(rows):
        return rng.dirichlet(np.ones(rows) * 2.0, size=k).T

    p_t = np.full((d, k), rng.uniform(0.2, 0.8)) if rct else rng.uniform(0.15, 0.85, (d, k))
    return ModelSpec(
        p_u=rng.dirichlet(np.ones(k) * 3.0),
        p_z_given_u=cond(d),
        p_x_given_u=cond(d),
        p_t_given_zu=p_t,
        p_y0_given_xu=rng.uniform(0, 1, (d, k)),
        p_y1_given_xu=rng.uniform(0, 1, (d, k)),
        z_features=np.eye(d),
        x_features=np.eye(d),
    )
