"""Discrete structural models over (U, Z, X, T, Y), sampling and exact oracles.

A :class:`ModelSpec` stores categorical tables indexed ``[raw value, u]``.
Raw Z and X values are mapped to feature vectors by ``z_features`` and
``x_features``; a single binary covariate uses one-hot rows, several binary
covariates use their bits (bit ``j`` of the raw index is covariate ``j``).

Sampling uses numpy's Philox counter-based bit generator seeded with a
64-bit integer, so a given (spec, n, seed) reproduces byte-for-byte across
platforms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import Dataset, MixtureOfEffects, MomentBundle
from .errors import OutOfRange

PROB_TOL = 1e-12


def _table(a, name):
    arr = np.array(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d table indexed [value, u]")
    arr.flags.writeable = False
    return arr


def one_hot_covariate(p_one) -> tuple[np.ndarray, np.ndarray]:
    """Table and one-hot features for one binary covariate with P(=1 | u) = p_one[u]."""
    p = np.asarray(p_one, dtype=float)
    return np.vstack([1.0 - p, p]), np.eye(2)


def bernoulli_covariates(p_one) -> tuple[np.ndarray, np.ndarray]:
    """Joint table and bit features for independent binary covariates.

    ``p_one[j, u]`` is P(covariate j = 1 | U = u). Returns a
    (2**m, k) table over raw indices and a (2**m, m) 0/1 feature matrix.
    """
    p = np.atleast_2d(np.asarray(p_one, dtype=float))
    m, k = p.shape
    bits = binary_code_features(m)
    table = np.ones((2**m, k))
    for j in range(m):
        table *= np.where(bits[:, j : j + 1] == 1, p[j][None, :], 1.0 - p[j][None, :])
    return table, bits


def binary_code_features(m: int) -> np.ndarray:
    """Row v holds the bits of v, least significant first."""
    v = np.arange(2**m)
    return ((v[:, None] >> np.arange(m)[None, :]) & 1).astype(float)


@dataclass(frozen=True)
class ModelSpec:
    p_u: np.ndarray
    p_z_given_u: np.ndarray
    p_x_given_u: np.ndarray
    p_t_given_zu: np.ndarray
    p_y0_given_xu: np.ndarray
    p_y1_given_xu: np.ndarray
    z_features: np.ndarray
    x_features: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        p_u = np.array(self.p_u, dtype=float)
        p_u.flags.writeable = False
        object.__setattr__(self, "p_u", p_u)
        for f in (
            "p_z_given_u",
            "p_x_given_u",
            "p_t_given_zu",
            "p_y0_given_xu",
            "p_y1_given_xu",
            "z_features",
            "x_features",
        ):
            object.__setattr__(self, f, _table(getattr(self, f), f))
        k = p_u.shape[0]
        nz, nx = self.p_z_given_u.shape[0], self.p_x_given_u.shape[0]
        shapes = {
            "p_z_given_u": (nz, k),
            "p_x_given_u": (nx, k),
            "p_t_given_zu": (nz, k),
            "p_y0_given_xu": (nx, k),
            "p_y1_given_xu": (nx, k),
        }
        for f, shape in shapes.items():
            if getattr(self, f).shape != shape:
                raise ValueError(f"{f} has shape {getattr(self, f).shape}, expected {shape}")
        if self.z_features.shape[0] != nz or self.x_features.shape[0] != nx:
            raise ValueError("feature maps must have one row per raw covariate value")
        for f in ("p_u",) + tuple(shapes):
            a = getattr(self, f)
            if np.any(a < 0) or np.any(a > 1) or not np.all(np.isfinite(a)):
                raise OutOfRange(f"{f} has entries outside [0, 1]")
        if abs(p_u.sum() - 1.0) > PROB_TOL:
            raise OutOfRange("p_u does not sum to 1")
        for f in ("p_z_given_u", "p_x_given_u"):
            if np.any(np.abs(getattr(self, f).sum(axis=0) - 1.0) > PROB_TOL):
                raise OutOfRange(f"columns of {f} do not sum to 1")
        pt = self.p_t_given_zu
        if np.any(pt <= 0) or np.any(pt >= 1):
            raise OutOfRange("positivity violated: need 0 < P(T=1 | z, u) < 1")

    @property
    def k(self) -> int:
        return int(self.p_u.shape[0])

    @property
    def d_z(self) -> int:
        return int(self.z_features.shape[1])

    @property
    def d_x(self) -> int:
        return int(self.x_features.shape[1])

    @property
    def z_encoding(self) -> str:
        return _encoding(self.z_features)

    @property
    def x_encoding(self) -> str:
        return _encoding(self.x_features)


def _encoding(features):
    n, d = features.shape
    if n == d and np.array_equal(features, np.eye(n)):
        return "onehot"
    if n == 2**d and np.array_equal(features, binary_code_features(d)):
        return "bits"
    return "custom"


def _check_unit(name, v):
    if not (0.0 <= v <= 1.0):
        raise OutOfRange(f"{name}={v} outside [0, 1]")


def paper_model(mu_zt: float, mu_xy: float) -> ModelSpec:
    """The two-parameter binary family; rows index Z (or X), columns index U.

    ``mu_zt`` moves treatment assignment from U-driven (0) to Z-driven (1);
    ``mu_xy`` moves the treatment response from U-driven (0) to X-driven (1).
    Model A is (0, 0), Model B is (1, 0), Model C is (1, 1).
    """
    _check_unit("mu_zt", mu_zt)
    _check_unit("mu_xy", mu_xy)
    p_cov = np.array([0.25, 0.75])
    p_z, f_z = one_hot_covariate(p_cov)
    p_x, f_x = one_hot_covariate(p_cov)
    p_t = np.array([[3, 1], [3, 1]]) / 4 + mu_zt / 4 * np.array([[0, 2], [-2, 0]])
    p_y0 = np.array([[7, 1], [7, 1]]) / 8 + mu_xy / 8 * np.array([[0, 6], [-6, 0]])
    p_y1 = np.array([[1, 7], [1, 7]]) / 8 + mu_xy / 8 * np.array([[0, -6], [6, 0]])
    return ModelSpec(
        p_u=[0.5, 0.5],
        p_z_given_u=p_z,
        p_x_given_u=p_x,
        p_t_given_zu=p_t,
        p_y0_given_xu=p_y0,
        p_y1_given_xu=p_y1,
        z_features=f_z,
        x_features=f_x,
        name=f"paper(mu_zt={mu_zt:g}, mu_xy={mu_xy:g})",
    )


def appendix_model() -> ModelSpec:
    """Four Bernoulli proxies (two Z, two X) used directly as 0/1 features.

    P(T=1 | U) = 3/4 - U/2 and P(Y=1 | T, U) = 1/4 + T/4 + 1(U = T)/4; the
    outcome does not depend on X.
    """
    u = np.array([0.0, 1.0])
    p_z, f_z = bernoulli_covariates([0.2 + 0.3 * u, 0.28 + 0.3 * (1 - u)])
    p_x, f_x = bernoulli_covariates([0.36 + 0.3 * u, 0.44 + 0.3 * (1 - u)])

    def p_y(t):
        row = 0.25 + t / 4 + (u == t) / 4
        return np.tile(row, (p_x.shape[0], 1))

    return ModelSpec(
        p_u=[0.5, 0.5],
        p_z_given_u=p_z,
        p_x_given_u=p_x,
        p_t_given_zu=np.tile(0.75 - u / 2, (p_z.shape[0], 1)),
        p_y0_given_xu=p_y(0),
        p_y1_given_xu=p_y(1),
        z_features=f_z,
        x_features=f_x,
        name="four-proxy",
    )


def _categorical(rng, table, u):
    """Draw one raw value per row from the column ``table[:, u_i]``."""
    cdf = np.cumsum(table, axis=0)[:, u].T
    draw = rng.random(u.shape[0])
    idx = (draw[:, None] >= cdf[:, :-1]).sum(axis=1)
    return idx


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def sample(spec: ModelSpec, n: int, seed: int, return_raw: bool = False):
    """Ancestral sample U -> (Z, X) -> T -> (Y^(0), Y^(1)) -> Y = Y^(T).

    Both potential outcomes are drawn independently given (X, U) and only
    Y^(T) is revealed. With ``return_raw`` the raw Z/X indices and potential
    outcomes are returned alongside the dataset.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    u = _categorical(rng, spec.p_u[:, None], np.zeros(n, dtype=int))
    z = _categorical(rng, spec.p_z_given_u, u)
    x = _categorical(rng, spec.p_x_given_u, u)
    t = (rng.random(n) < spec.p_t_given_zu[z, u]).astype(int)
    y0 = (rng.random(n) < spec.p_y0_given_xu[x, u]).astype(int)
    y1 = (rng.random(n) < spec.p_y1_given_xu[x, u]).astype(int)
    y = np.where(t == 1, y1, y0)
    d = Dataset(z=spec.z_features[z], x=spec.x_features[x], t=t, y=y, u=u)
    if return_raw:
        return d, {"z": z, "x": x, "y0": y0, "y1": y1}
    return d


@dataclass(frozen=True)
class GroundTruth:
    """Exact population quantities for a spec.

    ``joint`` is indexed [u, z, x, t, y] and ``joint_potential`` is indexed
    [u, z, x, t, y0, y1]; z and x are raw indices.
    """

    ate: float
    mte: MixtureOfEffects
    joint: np.ndarray
    joint_potential: np.ndarray


def _bernoulli_pair(p):
    return np.stack([1.0 - p, p], axis=-1)


def exact_ground_truth(spec: ModelSpec) -> GroundTruth:
    """Enumerate every (U, Z, X, T, Y^(0), Y^(1)) configuration."""
    pu = spec.p_u
    pz = spec.p_z_given_u.T  # [u, z]
    px = spec.p_x_given_u.T  # [u, x]
    pt = _bernoulli_pair(spec.p_t_given_zu.T)  # [u, z, t]
    py0 = _bernoulli_pair(spec.p_y0_given_xu.T)  # [u, x, y0]
    py1 = _bernoulli_pair(spec.p_y1_given_xu.T)  # [u, x, y1]
    jp = np.einsum("u,uz,ux,uzt,uxa,uxb->uzxtab", pu, pz, px, pt, py0, py1)
    joint = np.empty(jp.shape[:5])
    joint[..., 0, :] = jp[..., 0, :, :].sum(axis=-1)  # T=0 reveals Y^(0)
    joint[..., 1, :] = jp[..., 1, :, :].sum(axis=-2)  # T=1 reveals Y^(1)
    response = np.array([[0.0, 1.0], [-1.0, 0.0]])  # y1 - y0 indexed [y0, y1]
    per_u = np.einsum("uzxtab,ab->u", jp, response)
    p_u = jp.sum(axis=(1, 2, 3, 4, 5))
    effects = per_u / p_u
    return GroundTruth(
        ate=float(per_u.sum()),
        mte=MixtureOfEffects.canonical(p_u, effects),
        joint=joint,
        joint_potential=jp,
    )


def exact_bundle(spec: ModelSpec, truth: Optional[GroundTruth] = None) -> MomentBundle:
    """Population MomentBundle computed from the enumerated joint."""
    joint = (truth or exact_ground_truth(spec)).joint.sum(axis=0)  # [z, x, t, y]
    fz, fx = spec.z_features, spec.x_features
    p_t = joint.sum(axis=(0, 1, 3))
    m_x = fx.T @ joint.sum(axis=(0, 2, 3))
    m_zx, m_zy, m_zxy = [], [], []
    for t in (0, 1):
        cond = joint[:, :, t, :] / p_t[t]  # [z, x, y]
        pzx = cond.sum(axis=2)
        pzx_y1 = cond[:, :, 1]
        m_zx.append(fz.T @ pzx @ fx)
        m_zy.append(fz.T @ pzx_y1.sum(axis=1))
        m_zxy.append(fz.T @ pzx_y1 @ fx)
    return MomentBundle(
        m_x=m_x,
        m_zx_t=tuple(m_zx),
        m_zy_t=tuple(m_zy),
        m_zxy_t=tuple(m_zxy),
        n_t=(0, 0),
        exact=True,
    )
