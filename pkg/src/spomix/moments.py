"""Empirical observable moments and conditioning diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import Dataset, MomentBundle, split_by_treatment
from .errors import EmptyDataset

# rows per chunk once compensated accumulation kicks in
_CHUNK = 1 << 18
_COMPENSATE_ABOVE = 10**6

DEFAULT_RANK_TOL = 1e-8


def _fsum_rows(chunks) -> np.ndarray:
    """Sum per-chunk partial sums entry-wise with math.fsum."""
    parts = list(chunks)
    stacked = np.stack(parts)
    flat = stacked.reshape(len(parts), -1)
    out = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return out.reshape(stacked.shape[1:])


def mean_vector(d: Dataset) -> np.ndarray:
    """Mean of the X-features, shape (d_X,)."""
    n = d.n
    if n == 0:
        raise EmptyDataset("mean_vector of an empty dataset")
    if n > _COMPENSATE_ABOVE:
        total = _fsum_rows(d.x[s : s + _CHUNK].sum(axis=0) for s in range(0, n, _CHUNK))
        return total / n
    return d.x.mean(axis=0)


def cross_moment(d: Dataset, weight: bool = False) -> np.ndarray:
    """Second-order moment matrix M[Z, X], or M[Z, XY] when ``weight`` is set.

    Entry (i, j) is the sample average of z_i * x_j (times y when weighted).
    """
    n = d.n
    if n == 0:
        raise EmptyDataset("cross_moment of an empty dataset")

    def block(s, e):
        x = d.x[s:e]
        if weight:
            x = x * d.y[s:e, None]
        return d.z[s:e].T @ x

    if n > _COMPENSATE_ABOVE:
        return _fsum_rows(block(s, s + _CHUNK) for s in range(0, n, _CHUNK)) / n
    return block(0, n) / n


def _zy_moment(d: Dataset) -> np.ndarray:
    n = d.n
    if n > _COMPENSATE_ABOVE:
        total = _fsum_rows(
            d.z[s : s + _CHUNK].T @ d.y[s : s + _CHUNK] for s in range(0, n, _CHUNK)
        )
        return total / n
    return d.z.T @ d.y / n


def estimate_bundle(d: Dataset) -> MomentBundle:
    """Within-arm empirical moments of ``d`` (raises EmptyArm if an arm is empty)."""
    arms = split_by_treatment(d)
    return MomentBundle(
        m_x=mean_vector(d),
        m_zx_t=tuple(cross_moment(a) for a in arms),
        m_zy_t=tuple(_zy_moment(a) for a in arms),
        m_zxy_t=tuple(cross_moment(a, weight=True) for a in arms),
        n_t=tuple(a.n for a in arms),
        exact=False,
    )


@dataclass(frozen=True)
class ArmCondition:
    arm: int
    sigma_min: float
    sigma_max: float
    condition: float
    rank_deficient: bool


def condition_diagnostic(
    bundle: MomentBundle, tol: Optional[float] = None
) -> tuple[ArmCondition, ArmCondition]:
    """Smallest singular value and condition number of M[Z, X | t] per arm.

    An arm is flagged rank-deficient when sigma_min < tol * sigma_max
    (``tol`` defaults to 1e-8).
    """
    tol = DEFAULT_RANK_TOL if tol is None else tol
    out = []
    for arm, m in enumerate(bundle.m_zx_t):
        s = np.linalg.svd(m, compute_uv=False)
        smax, smin = float(s[0]), float(s[-1])
        if m.shape[0] < m.shape[1]:
            smin = 0.0
        cond = smax / smin if smin > 0 else math.inf
        out.append(ArmCondition(arm, smin, smax, cond, smin < tol * smax or smax == 0.0))
    return out[0], out[1]
