"""Full-mixture baseline (CP decomposition by ALS) and evaluation metrics.

The baseline factors the empirical joint distribution of (Z, X, S), with
S = (T, Y) flattened as ``s = 2 * t + y``, into a rank-k sum of product
distributions and reads off P(U), P(Z|U), P(X|U) and P(S|U).
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .domain import Dataset, MixtureOfEffects
from .errors import ConvergenceFailure, DimensionMismatch, NonBinaryData
from .moment_problem import project_to_simplex
from .synthetic import GroundTruth, make_rng

MAX_ITER = 500
REL_TOL = 1e-9
RESTARTS = 10


@dataclass(frozen=True)
class JointTensor:
    """Probability tensor indexed [z, x, s] with s = 2 * t + y."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 3 or v.shape[2] != 4:
            raise DimensionMismatch(f"joint tensor must be |Z| x |X| x 4, got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.values.shape)


@dataclass(frozen=True)
class MixtureFactors:
    weights: np.ndarray
    f_z: np.ndarray
    f_x: np.ndarray
    f_s: np.ndarray
    residual: float
    converged: bool
    residual_history: tuple = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return int(self.weights.shape[0])

    def joint(self) -> np.ndarray:
        """Product-form joint indexed [u, z, x, s]."""
        return np.einsum("u,zu,xu,su->uzxs", self.weights, self.f_z, self.f_x, self.f_s)

    def potential_means(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-component E[Y | T=0, u] and E[Y | T=1, u] implied by f_s."""
        s = self.f_s
        with np.errstate(invalid="ignore", divide="ignore"):
            y0 = s[1] / (s[0] + s[1])
            y1 = s[3] / (s[2] + s[3])
        return y0, y1


def _decode(features: np.ndarray, encoding: str, name: str) -> tuple[np.ndarray, int]:
    f = np.asarray(features)
    if not np.all((f == 0) | (f == 1)):
        raise NonBinaryData(f"{name} features are not 0/1 coded")
    d = f.shape[1]
    is_onehot = bool(np.all(f.sum(axis=1) == 1))
    if encoding == "auto":
        encoding = "onehot" if is_onehot else "bits"
    if encoding == "onehot":
        if not is_onehot:
            raise NonBinaryData(f"{name} features are not one-hot")
        return f.argmax(axis=1), d
    if encoding == "bits":
        return (f.astype(np.int64) << np.arange(d)).sum(axis=1), 2**d
    raise ValueError(f"unknown encoding {encoding!r}")


def joint_tensor(d: Dataset, z_encoding: str = "auto", x_encoding: str = "auto") -> JointTensor:
    """Empirical frequency tensor over (z, x, s).

    Raw Z/X values are recovered from one-hot features (argmax) or from
    binary-coded features (bit j of the raw index is column j). ``auto``
    picks one-hot when every row has exactly one active column.
    """
    if d.n == 0:
        raise NonBinaryData("empty dataset")
    z, nz = _decode(d.z, z_encoding, "Z")
    x, nx = _decode(d.x, x_encoding, "X")
    if not np.all((d.y == 0) | (d.y == 1)) or not np.all((d.t == 0) | (d.t == 1)):
        raise NonBinaryData("T and Y must be binary for the joint tensor")
    s = 2 * d.t.astype(np.int64) + d.y.astype(np.int64)
    counts = np.zeros((nz, nx, 4))
    np.add.at(counts, (z, x, s), 1.0)
    return JointTensor(counts / d.n)


def joint_tensor_from_truth(truth: GroundTruth) -> JointTensor:
    j = truth.joint.sum(axis=0)  # [z, x, t, y]
    return JointTensor(j.reshape(j.shape[0], j.shape[1], 4))


def _reconstruct(a, b, c):
    return np.einsum("ir,jr,kr->ijk", a, b, c)


def _als(t, k, rng, max_iter, tol):
    dims = t.shape
    a, b, c = (rng.random((n, k)) for n in dims)
    norm_t = np.linalg.norm(t)
    history = [float(np.linalg.norm(t - _reconstruct(a, b, c)))]
    converged = False
    for _ in range(max_iter):
        a = np.einsum("ijk,jr,kr->ir", t, b, c) @ np.linalg.pinv((b.T @ b) * (c.T @ c))
        b = np.einsum("ijk,ir,kr->jr", t, a, c) @ np.linalg.pinv((a.T @ a) * (c.T @ c))
        c = np.einsum("ijk,ir,jr->kr", t, a, b) @ np.linalg.pinv((a.T @ a) * (b.T @ b))
        history.append(float(np.linalg.norm(t - _reconstruct(a, b, c))))
        if abs(history[-2] - history[-1]) <= tol * norm_t:
            converged = True
            break
    return a, b, c, history, converged


def _normalize(a, b, c):
    """Fix signs, clip negatives, turn columns into distributions."""
    k = a.shape[1]
    weights = np.zeros(k)
    cols = [np.zeros_like(m) for m in (a, b, c)]
    for r in range(k):
        sign = 1.0
        mass = 1.0
        for m, out in zip((a, b, c), cols):
            col = m[:, r]
            if col.sum() < 0:
                col = -col
                sign = -sign
            col = np.clip(col, 0.0, None)
            total = col.sum()
            if total > 0:
                out[:, r] = col / total
            else:
                out[:, r] = 1.0 / col.shape[0]
            mass *= total
        weights[r] = sign * mass
    return weights, cols


def cp_als(
    tensor: JointTensor,
    k: int,
    restarts: int = RESTARTS,
    seed: int = 0,
    max_iter: int = MAX_ITER,
    tol: float = REL_TOL,
) -> MixtureFactors:
    """Best-of-restarts rank-k CP fit by ALS, normalized into a mixture.

    Each restart starts from uniform [0, 1) factors and stops once the
    Frobenius residual changes by less than ``tol * ||T||`` between sweeps.
    Factors are then sign-fixed, clipped at zero and column-normalized, the
    column masses are absorbed into the weights and the weights projected to
    the simplex. Components are ordered by descending weight, ties broken by
    the lexicographic order of their f_s column.

    If the best restart did not converge, a :class:`ConvergenceFailure`
    warning is issued and ``converged`` is False; the best iterate is still
    returned.
    """
    if k < 1 or restarts < 1:
        raise ValueError("k and restarts must be >= 1")
    t = tensor.values
    rng = make_rng(seed)
    best = None
    for _ in range(restarts):
        fit = _als(t, k, rng, max_iter, tol)
        if best is None or fit[3][-1] < best[3][-1]:
            best = fit
    a, b, c, history, converged = best
    raw_w, (f_z, f_x, f_s) = _normalize(a, b, c)
    w = project_to_simplex(raw_w)
    order = np.lexsort(tuple(f_s[::-1]) + (-w,))
    if not converged:
        warnings.warn(
            ConvergenceFailure(f"ALS did not converge within {max_iter} iterations"),
            stacklevel=2,
        )
    return MixtureFactors(
        weights=w[order],
        f_z=f_z[:, order],
        f_x=f_x[:, order],
        f_s=f_s[:, order],
        residual=history[-1],
        converged=converged,
        residual_history=tuple(history),
    )


def _truth_joint(truth) -> np.ndarray:
    j = truth.joint if isinstance(truth, GroundTruth) else np.asarray(truth, dtype=float)
    if j.ndim == 5:  # [u, z, x, t, y]
        j = j.reshape(j.shape[0], j.shape[1], j.shape[2], 4)
    if j.ndim != 4 or j.shape[3] != 4:
        raise DimensionMismatch(f"truth joint must be [u, z, x, t, y], got {j.shape}")
    return j


def tv_distance(truth, est: MixtureFactors) -> float:
    """Total variation between the true joint over (U, Z, X, T, Y) and the
    product-form estimate, minimized over relabelings of U."""
    j = _truth_joint(truth)
    e = est.joint()
    if e.shape != j.shape:
        raise DimensionMismatch(f"estimate shape {e.shape} does not match truth {j.shape}")
    best = np.inf
    for perm in itertools.permutations(range(est.k)):
        best = min(best, 0.5 * float(np.abs(j - e[list(perm)]).sum()))
    return best


def mte_error(truth: MixtureOfEffects, est: MixtureOfEffects) -> float:
    """Squared l2 distance of (weights, effects), minimized over relabelings."""
    if truth.k != est.k:
        raise DimensionMismatch(f"component counts differ: {truth.k} vs {est.k}")
    best = np.inf
    for perm in itertools.permutations(range(est.k)):
        p = list(perm)
        err = np.sum((truth.weights - est.weights[p]) ** 2) + np.sum(
            (truth.effects - est.effects[p]) ** 2
        )
        best = min(best, float(err))
    return best


def ate_error(truth: float, est: float) -> float:
    return (float(truth) - float(est)) ** 2
