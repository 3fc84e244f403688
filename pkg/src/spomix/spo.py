"""Synthetic potential outcomes: SPO coefficients, ATE and response moments.

The recursion follows the first/next-moment coefficient scheme: order-1
coefficients copy E[Y^(t) | U] through the X-features, and every higher
order multiplies the previous synthetic response by Y before moment-matching
against Z again. ``nu_l = M[X]^T gamma^(l)`` is then the l-th element-wise
moment of the treatment response.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.linalg

from . import moment_problem
from .domain import MomentBundle, MomentSequence, SpoCoefficients
from .errors import DimensionMismatch, RankDeficient, SingularMomentMatrix
from .moments import DEFAULT_RANK_TOL

__all__ = [
    "first_moment_coeffs",
    "next_moment_coeffs",
    "ate",
    "response_moment_sequence",
    "ate_via_pseudoinverse",
    "recover_mte",
    "spo_coefficients",
    "ArmSolver",
]


class ArmSolver:
    """Column-pivoted QR of one arm's M[Z, X | t], reused across orders.

    ``ridge`` adds a multiple of the identity before factoring. It is an
    exploratory, off-by-default knob: it biases every estimate and can hide
    exactly the identifiability failures the singularity check reports.
    """

    def __init__(self, m_zx: np.ndarray, arm: int, tol: Optional[float] = None, ridge: float = 0.0):
        tol = DEFAULT_RANK_TOL if tol is None else tol
        m = np.asarray(m_zx, dtype=float)
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatch(
                f"arm {arm}: square solve needs d_Z == d_X, got {m.shape[0]}x{m.shape[1]}"
            )
        if ridge:
            m = m + ridge * np.eye(m.shape[0])
        s = np.linalg.svd(m, compute_uv=False)
        if s[0] == 0.0 or s[-1] < tol * s[0]:
            raise SingularMomentMatrix(arm, float(s[-1]), float(s[0]))
        self.arm = arm
        self.q, self.r, self.perm = scipy.linalg.qr(m, pivoting=True)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = scipy.linalg.solve_triangular(self.r, self.q.T @ rhs)
        out = np.empty_like(y)
        out[self.perm] = y
        return out


def _solvers(bundle, tol, ridge):
    return tuple(ArmSolver(bundle.m_zx_t[t], t, tol, ridge) for t in (0, 1))


def _first(bundle, solvers) -> SpoCoefficients:
    beta = solvers[0].solve(bundle.m_zy_t[0])
    alpha = solvers[1].solve(bundle.m_zy_t[1])
    return SpoCoefficients(order=1, alpha=alpha, beta=beta)


def _next(bundle, solvers, prev: SpoCoefficients) -> SpoCoefficients:
    g = prev.gamma
    if g.shape[0] != bundle.d_x:
        raise DimensionMismatch(f"previous gamma has length {g.shape[0]}, expected {bundle.d_x}")
    beta = solvers[0].solve(bundle.m_zxy_t[0] @ g)
    alpha = solvers[1].solve(bundle.m_zxy_t[1] @ g)
    return SpoCoefficients(order=prev.order + 1, alpha=alpha, beta=beta)


def first_moment_coeffs(
    bundle: MomentBundle, tol: Optional[float] = None, ridge: float = 0.0
) -> SpoCoefficients:
    """Order-1 coefficients: alpha solves M[Z,X|1] a = M[Z,Y|1], beta the T=0 analogue."""
    return _first(bundle, _solvers(bundle, tol, ridge))


def next_moment_coeffs(
    bundle: MomentBundle,
    prev: SpoCoefficients,
    tol: Optional[float] = None,
    ridge: float = 0.0,
) -> SpoCoefficients:
    """Order l+1 coefficients from ``prev`` (order l) via M[Z,XY|t] prev.gamma."""
    return _next(bundle, _solvers(bundle, tol, ridge), prev)


def ate(bundle: MomentBundle, tol: Optional[float] = None, ridge: float = 0.0) -> float:
    """Average treatment effect M[X]^T gamma^(1)."""
    return float(bundle.m_x @ first_moment_coeffs(bundle, tol, ridge).gamma)


def spo_coefficients(
    bundle: MomentBundle, max_order: int, tol: Optional[float] = None, ridge: float = 0.0
) -> list[SpoCoefficients]:
    """Coefficients for orders 1..max_order, factoring each arm once."""
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    solvers = _solvers(bundle, tol, ridge)
    coeffs = [_first(bundle, solvers)]
    for _ in range(2, max_order + 1):
        coeffs.append(_next(bundle, solvers, coeffs[-1]))
    return coeffs


def response_moment_sequence(
    bundle: MomentBundle, k: int, tol: Optional[float] = None, ridge: float = 0.0
) -> MomentSequence:
    """Element-wise response moments nu_1..nu_{2k-1} for a k-component mixture."""
    if k < 1:
        raise ValueError("k must be >= 1")
    coeffs = spo_coefficients(bundle, 2 * k - 1, tol, ridge)
    return MomentSequence(k=k, values=np.array([bundle.m_x @ c.gamma for c in coeffs]))


def ate_via_pseudoinverse(bundle: MomentBundle, tol: Optional[float] = None) -> float:
    """ATE from E[Y^(t)] = M[Y,Z|t] M[X,Z|t]^+ E[X], allowing d_Z >= d_X.

    Requires each M[Z, X | t] to have full column rank (relative sigma_min
    above ``tol``); raises RankDeficient otherwise.
    """
    tol = DEFAULT_RANK_TOL if tol is None else tol
    if bundle.d_z < bundle.d_x:
        raise DimensionMismatch(f"need d_Z >= d_X, got d_Z={bundle.d_z}, d_X={bundle.d_x}")
    potential = []
    for t in (0, 1):
        m_xz = bundle.m_zx_t[t].T
        s = np.linalg.svd(m_xz, compute_uv=False)
        if s[0] == 0.0 or s[-1] < tol * s[0]:
            raise RankDeficient(
                f"M[Z,X|T={t}] lacks full column rank (sigma_min={s[-1]:.3e}, sigma_max={s[0]:.3e})"
            )
        potential.append(float(bundle.m_zy_t[t] @ np.linalg.pinv(m_xz) @ bundle.m_x))
    return potential[1] - potential[0]


def recover_mte(
    bundle: MomentBundle,
    k: int,
    method: str = "pencil",
    tol: Optional[float] = None,
    ridge: float = 0.0,
):
    """Full pipeline: response moments then the sparse moment problem.

    Returns ``(MixtureOfEffects, PencilDiagnostics | None)``; diagnostics are
    only produced by the matrix pencil solver.
    """
    seq = response_moment_sequence(bundle, k, tol, ridge)
    if method == "pencil":
        return moment_problem.matrix_pencil(seq)
    if method == "prony":
        return moment_problem.prony(seq), None
    raise ValueError(f"unknown moment-problem method {method!r}")

