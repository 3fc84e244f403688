"""Core data containers shared by the estimators.

Feature maps are never built here: the ``z`` and ``x`` columns of a
:class:`Dataset` *are* the features. Binary raw covariates are expected to be
expanded by the caller (the synthetic generator emits one-hot indicators).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, EmptyArm, LengthMismatch, SpoError


def _frozen(a, dtype=float, ndim=None):
    arr = np.array(a, dtype=dtype, copy=True)
    if ndim is not None and arr.ndim != ndim:
        if ndim == 2 and arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, 0)
        else:
            raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """Tabular samples of (Z-features, X-features, T, Y) with optional latent ``u``.

    Arrays are copied and marked read-only on construction. Invariants are not
    enforced here; use :func:`validate_dataset` to list violations.
    """

    z: np.ndarray
    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    u: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "z", _frozen(self.z, ndim=2))
        object.__setattr__(self, "x", _frozen(self.x, ndim=2))
        object.__setattr__(self, "t", _frozen(self.t, ndim=1))
        object.__setattr__(self, "y", _frozen(self.y, ndim=1))
        if self.u is not None:
            object.__setattr__(self, "u", _frozen(self.u, ndim=1))

    @property
    def n(self) -> int:
        return int(self.t.shape[0])

    @property
    def d_z(self) -> int:
        return int(self.z.shape[1])

    @property
    def d_x(self) -> int:
        return int(self.x.shape[1])

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            z=self.z[rows],
            x=self.x[rows],
            t=self.t[rows],
            y=self.y[rows],
            u=None if self.u is None else self.u[rows],
        )


def validate_dataset(d: Dataset, k: Optional[int] = None) -> list[str]:
    """Return a list of human-readable invariant violations (empty when valid).

    ``k`` bounds the latent labels when given; otherwise only integrality and
    non-negativity of ``u`` are checked.
    """
    problems: list[str] = []
    n = d.t.shape[0]
    for name in ("z", "x", "y") + (("u",) if d.u is not None else ()):
        col = getattr(d, name)
        if col.shape[0] != n:
            problems.append(f"{name} has {col.shape[0]} rows, expected {n}")
    for name in ("z", "x", "t", "y") + (("u",) if d.u is not None else ()):
        col = getattr(d, name)
        bad = np.argwhere(~np.isfinite(col))
        for idx in bad[:10]:
            where = f"row {idx[0]}" + (f", column {idx[1]}" if col.ndim == 2 else "")
            problems.append(f"{name} missing or non-finite at {where}")
    for row in np.flatnonzero(np.isfinite(d.t) & (d.t != 0) & (d.t != 1)):
        problems.append(f"t not binary at row {row}")
    if n > 0:
        for arm in (0, 1):
            if not np.any(d.t == arm):
                problems.append(f"treatment arm {arm} empty")
    if d.u is not None and d.u.shape[0] == n:
        u = d.u
        finite = np.isfinite(u)
        bad = finite & ((u != np.round(u)) | (u < 0))
        if k is not None:
            bad |= finite & (u >= k)
        for row in np.flatnonzero(bad):
            problems.append(f"u out of range at row {row}")
    return problems


def split_by_treatment(d: Dataset) -> tuple[Dataset, Dataset]:
    """Partition rows into the control (t=0) and treated (t=1) arms."""
    arms = []
    for arm in (0, 1):
        rows = np.flatnonzero(d.t == arm)
        if rows.size == 0:
            raise EmptyArm(arm)
        arms.append(d.take(rows))
    return arms[0], arms[1]


@dataclass(frozen=True)
class MomentBundle:
    """Observable moments consumed by the SPO recursion.

    ``m_zx_t[t]``, ``m_zy_t[t]`` and ``m_zxy_t[t]`` are within-arm averages
    E[Z X^T | T=t], E[Z Y | T=t] and E[Z X^T Y | T=t]; ``m_x`` is the
    unconditional mean of the X-features.
    """

    m_x: np.ndarray
    m_zx_t: tuple[np.ndarray, np.ndarray]
    m_zy_t: tuple[np.ndarray, np.ndarray]
    m_zxy_t: tuple[np.ndarray, np.ndarray]
    n_t: tuple[int, int] = (0, 0)
    exact: bool = False

    def __post_init__(self):
        m_x = _frozen(self.m_x, ndim=1)
        m_zx = tuple(_frozen(m, ndim=2) for m in self.m_zx_t)
        m_zy = tuple(_frozen(m, ndim=1) for m in self.m_zy_t)
        m_zxy = tuple(_frozen(m, ndim=2) for m in self.m_zxy_t)
        if not (len(m_zx) == len(m_zy) == len(m_zxy) == 2):
            raise DimensionMismatch("moment bundle needs exactly two arms")
        d_z, d_x = m_zx[0].shape
        for arm in (0, 1):
            if m_zx[arm].shape != (d_z, d_x) or m_zxy[arm].shape != (d_z, d_x):
                raise DimensionMismatch(f"arm {arm}: cross moments not {d_z}x{d_x}")
            if m_zy[arm].shape != (d_z,):
                raise DimensionMismatch(f"arm {arm}: M[Z,Y] not length {d_z}")
        if m_x.shape != (d_x,):
            raise DimensionMismatch(f"M[X] has length {m_x.shape[0]}, expected {d_x}")
        arrays = (m_x,) + m_zx + m_zy + m_zxy
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise SpoError("moment bundle contains non-finite entries")
        object.__setattr__(self, "m_x", m_x)
        object.__setattr__(self, "m_zx_t", m_zx)
        object.__setattr__(self, "m_zy_t", m_zy)
        object.__setattr__(self, "m_zxy_t", m_zxy)
        object.__setattr__(self, "n_t", tuple(int(c) for c in self.n_t))

    @property
    def d_z(self) -> int:
        return int(self.m_zx_t[0].shape[0])

    @property
    def d_x(self) -> int:
        return int(self.m_zx_t[0].shape[1])

    def to_dict(self) -> dict:
        return {
            "m_x": self.m_x.tolist(),
            "m_zx_t": [m.tolist() for m in self.m_zx_t],
            "m_zy_t": [m.tolist() for m in self.m_zy_t],
            "m_zxy_t": [m.tolist() for m in self.m_zxy_t],
            "n_t": list(self.n_t),
            "exact": self.exact,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MomentBundle":
        return cls(
            m_x=doc["m_x"],
            m_zx_t=tuple(doc["m_zx_t"]),
            m_zy_t=tuple(doc["m_zy_t"]),
            m_zxy_t=tuple(doc["m_zxy_t"]),
            n_t=tuple(doc.get("n_t", (0, 0))),
            exact=bool(doc.get("exact", False)),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "MomentBundle":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SpoCoefficients:
    order: int
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        alpha = _frozen(self.alpha, ndim=1)
        beta = _frozen(self.beta, ndim=1)
        if alpha.shape != beta.shape:
            raise DimensionMismatch("alpha and beta differ in length")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", _frozen(alpha - beta))


@dataclass(frozen=True)
class MomentSequence:
    """Moments (nu_1, ..., nu_{2k-1}) of the response mixture; nu_0 = 1 is implicit."""

    k: int
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, ndim=1)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if values.shape[0] != 2 * self.k - 1:
            raise LengthMismatch(
                f"expected {2 * self.k - 1} moments for k={self.k}, got {values.shape[0]}"
            )
        if not np.all(np.isfinite(values)):
            raise SpoError("moment sequence contains non-finite entries")
        object.__setattr__(self, "values", values)

    def with_zeroth(self) -> np.ndarray:
        return np.concatenate(([1.0], self.values))


@dataclass(frozen=True)
class MixtureOfEffects:
    """Latent-class weights P[U] with per-class effects E[R|U].

    Use :meth:`canonical` to build one from unordered components; it sorts
    effects ascending and breaks ties by descending weight.
    """

    weights: np.ndarray
    effects: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights, ndim=1)
        e = _frozen(self.effects, ndim=1)
        if w.shape != e.shape:
            raise DimensionMismatch("weights and effects differ in length")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "effects", e)

    @property
    def k(self) -> int:
        return int(self.weights.shape[0])

    @classmethod
    def canonical(cls, weights, effects) -> "MixtureOfEffects":
        w = np.asarray(weights, dtype=float)
        e = np.asarray(effects, dtype=float)
        order = np.lexsort((-w, e))
        return cls(weights=w[order], effects=e[order])

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "effects": self.effects.tolist()}


# -- CSV round trip ---------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(d: Dataset, path) -> None:
    """Write ``d`` as ``z1..zdZ,x1..xdX,t,y[,u]`` with a header row."""
    header = [f"z{i + 1}" for i in range(d.d_z)] + [f"x{j + 1}" for j in range(d.d_x)]
    header += ["t", "y"] + (["u"] if d.u is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(d.n):
            row = [_fmt(v) for v in d.z[i]] + [_fmt(v) for v in d.x[i]]
            row += [str(int(d.t[i])), _fmt(d.y[i])]
            if d.u is not None:
                row.append(str(int(d.u[i])))
            w.writerow(row)


def read_csv(path) -> Dataset:
    """Parse a dataset CSV. Missing cells are rejected, never imputed."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SpoError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    z_cols = [i for i, h in enumerate(header) if h.startswith("z")]
    x_cols = [i for i, h in enumerate(header) if h.startswith("x")]
    if "t" not in header or "y" not in header or not z_cols or not x_cols:
        raise SpoError(f"{path}: header must contain z*, x*, t and y columns")
    data = np.full((len(rows), len(header)), np.nan)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise SpoError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                raise SpoError(f"{path}: missing value at row {r}, column {header[c]}")
            data[r, c] = float(cell)
    if np.isnan(data).any():
        r, c = np.argwhere(np.isnan(data))[0]
        raise SpoError(f"{path}: missing value at row {r}, column {header[c]}")
    u = data[:, header.index("u")] if "u" in header else None
    d = Dataset(
        z=data[:, z_cols],
        x=data[:, x_cols],
        t=data[:, header.index("t")],
        y=data[:, header.index("y")],
        u=u,
    )
    return d
