"""Sparse Hausdorff moment problem: k atoms from nu_0..nu_{2k-1}.

Two solvers are provided. :func:`matrix_pencil` (the default) reads the atoms
off the generalized eigenvalues of the shifted Hankel pencil (H1, H0);
:func:`prony` finds the monic degree-k polynomial annihilating the sequence
and roots it. Both recover weights from the same Vandermonde system.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .domain import MixtureOfEffects, MomentSequence
from .errors import ComplexAtoms, DegenerateHankel, LengthMismatch

# relative to the largest singular value of H0
DEFAULT_HANKEL_TOL = 1e-13
IMAG_TOL = 1e-6


@dataclass(frozen=True)
class PencilDiagnostics:
    hankel_sigma_min: float
    # inf for a single atom: there is no pair to separate
    atom_separation: float
    weight_negativity: float


def hankel(seq: MomentSequence, shift: int = 0) -> np.ndarray:
    """k x k Hankel matrix with entry (i, j) = nu_{i + j + shift} (nu_0 = 1)."""
    if shift not in (0, 1):
        raise ValueError("shift must be 0 or 1")
    m = seq.with_zeroth()
    k = seq.k
    if m.shape[0] != 2 * k:
        raise LengthMismatch(f"expected {2 * k - 1} moments for k={k}")
    idx = np.add.outer(np.arange(k), np.arange(k)) + shift
    return m[idx]


def project_to_simplex(w) -> np.ndarray:
    """Euclidean projection of ``w`` onto the probability simplex."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("expected a non-empty vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("cannot project non-finite weights")
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, w.size + 1)
    rho = np.flatnonzero(u - css / ks > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(w - theta, 0.0)


def _check_h0(seq: MomentSequence, tol: Optional[float]):
    tol = DEFAULT_HANKEL_TOL if tol is None else tol
    h0 = hankel(seq, 0)
    s = np.linalg.svd(h0, compute_uv=False)
    if s[-1] < tol * s[0]:
        raise DegenerateHankel(
            f"H0 is numerically singular (sigma_min={s[-1]:.3e}); "
            f"fewer than k={seq.k} distinguishable components"
        )
    return h0, float(s[-1])


def _real_atoms(roots: np.ndarray, imag_tol: float) -> np.ndarray:
    worst = float(np.max(np.abs(roots.imag))) if roots.size else 0.0
    if worst >= imag_tol:
        raise ComplexAtoms(
            f"recovered atoms have imaginary parts up to {worst:.3e}; "
            "moments are inconsistent with a real k-atom mixture"
        )
    return np.sort(roots.real)


def _separation(effects: np.ndarray) -> float:
    if effects.size < 2:
        return math.inf
    return float(np.min(np.diff(np.sort(effects))))


def vandermonde_weights(effects: np.ndarray, seq: MomentSequence) -> np.ndarray:
    """Solve sum_j w_j e_j^i = nu_i for i = 0..k-1."""
    k = effects.shape[0]
    v = np.vander(effects, k, increasing=True).T
    return np.linalg.solve(v, seq.with_zeroth()[:k])


def _finish(effects, seq):
    if effects.size > 1 and np.min(np.diff(effects)) == 0.0:
        raise DegenerateHankel("recovered atoms coincide")
    raw = vandermonde_weights(effects, seq)
    mix = MixtureOfEffects.canonical(project_to_simplex(raw), effects)
    return mix, raw


def matrix_pencil(
    seq: MomentSequence, tol: Optional[float] = None, imag_tol: float = IMAG_TOL
) -> tuple[MixtureOfEffects, PencilDiagnostics]:
    """Atoms as eigenvalues of H0^{-1} H1, weights from the Vandermonde system.

    Moments of a genuine mixture make H0 positive definite, in which case the
    pencil is symmetric-definite and solved with a Cholesky-reduced symmetric
    eigensolver (its eigenvalues are real by construction). Noisy moments can
    leave H0 indefinite; the general eigensolver is used then, and conjugate
    pairs beyond ``imag_tol`` raise ComplexAtoms.
    """
    h0, sigma_min = _check_h0(seq, tol)
    h1 = hankel(seq, 1)
    try:
        effects = np.sort(scipy.linalg.eigh(h1, h0, eigvals_only=True))
    except np.linalg.LinAlgError:
        roots = np.linalg.eigvals(np.linalg.solve(h0, h1))
        effects = _real_atoms(roots, imag_tol)
    mix, raw = _finish(effects, seq)
    diag = PencilDiagnostics(
        hankel_sigma_min=sigma_min,
        atom_separation=_separation(mix.effects),
        weight_negativity=float(min(0.0, raw.min())),
    )
    return mix, diag


def prony(
    seq: MomentSequence, tol: Optional[float] = None, imag_tol: float = IMAG_TOL
) -> MixtureOfEffects:
    """Atoms as roots of the monic polynomial annihilating the moment sequence.

    The coefficients c_0..c_{k-1} solve sum_i c_i nu_{i+j} = -nu_{k+j} for
    j = 0..k-1.
    """
    h0, _ = _check_h0(seq, tol)
    k = seq.k
    m = seq.with_zeroth()
    c = np.linalg.solve(h0, -m[k : 2 * k])
    roots = np.roots(np.concatenate(([1.0], c[::-1])))
    effects = _real_atoms(roots, imag_tol)
    mix, _ = _finish(effects, seq)
    return mix


def forward_moments(mix: MixtureOfEffects) -> MomentSequence:
    """nu_l = sum_j w_j e_j^l for l = 1..2k-1."""
    k = mix.k
    powers = np.arange(1, 2 * k)
    values = (mix.weights[None, :] * mix.effects[None, :] ** powers[:, None]).sum(axis=1)
    return MomentSequence(k=k, values=values)
