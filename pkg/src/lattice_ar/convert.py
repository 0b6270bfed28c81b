"""Conversions between a covariance matrix and its CAR / SAR parameterizations.

A CAR pair is unique for a given covariance; SAR pairs are not, one per root
``L`` of the precision matrix (``Sigma^{-1} = L L^T``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import InvalidParameter, NotPositiveDefinite, RootDiagonalZero
from .model import (CarModel, ConditionReport, CovarianceMatrix, SarModel, car_covariance,
                    certify, sar_covariance, validate_car)

ROOT_KINDS = ("cholesky", "spectral", "spectral-symmetric", "rotated")
DIAG_ZERO_RTOL = 1e-12


@dataclass(frozen=True)
class MatrixRoot:
    """``l`` with ``l @ l.T`` equal to the precision matrix."""

    l: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in ROOT_KINDS:
            raise ValueError(f"unknown root kind {self.kind!r}")
        a = np.array(self.l, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "l", a)

    @property
    def n(self) -> int:
        return self.l.shape[0]

    def precision(self) -> np.ndarray:
        return self.l @ self.l.T


def _sigma(sigma) -> np.ndarray:
    return certify(sigma).sigma


def precision(sigma, method: str = "cholesky") -> np.ndarray:
    """Inverse of a PD covariance.

    ``method="cholesky"`` back-substitutes through the Cholesky factor,
    ``method="solve"`` runs an LU solve against the identity. Both are
    symmetrized.
    """
    s = _sigma(sigma)
    eye = np.eye(s.shape[0])
    try:
        if method == "cholesky":
            q = sla.cho_solve(sla.cho_factor(s, lower=True), eye)
        elif method == "solve":
            q = sla.solve(s, eye)
        else:
            raise ValueError(f"unknown inversion method {method!r}")
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"factorization failed: {exc}") from exc
    return 0.5 * (q + q.T)


def _orient_eigenvectors(v: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each eigenvector made positive
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def root_of_precision(sigma, kind: str = "cholesky") -> MatrixRoot:
    """Factor the precision matrix as ``L L^T``.

    ``cholesky``
        lower triangular ``L`` with positive diagonal.
    ``spectral``
        ``L = V E^{-1/2}`` from ``Sigma = V E V^T``. Columns are ordered to
        maximize the product of ``|diag(L)|`` (ties keep ascending eigenvalue
        order), then signed so the diagonal is positive.
    ``spectral-symmetric``
        ``L = V E^{-1/2} V^T``, the symmetric inverse square root.
    """
    s = _sigma(sigma)
    if kind == "cholesky":
        try:
            l = np.linalg.cholesky(precision(s))
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(f"precision Cholesky failed: {exc}") from exc
        return MatrixRoot(l, kind)
    if kind in ("spectral", "spectral-symmetric"):
        e, v = np.linalg.eigh(s)
        if e[0] <= 0:
            raise NotPositiveDefinite(f"minimum eigenvalue {e[0]:.6g}", witness=float(e[0]))
        v = _orient_eigenvectors(v)
        l = v / np.sqrt(e)[None, :]
        if kind == "spectral-symmetric":
            l = l @ v.T
            l = 0.5 * (l + l.T)
        else:
            l = _positive_diagonal(_assign_columns(l))
        return MatrixRoot(l, kind)
    raise ValueError(f"unknown root kind {kind!r}")


def _assign_columns(l: np.ndarray) -> np.ndarray:
    # any column permutation is still a root; keep the diagonal away from zero
    with np.errstate(divide="ignore"):
        cost = -np.log(np.abs(l))
    cost[~np.isfinite(cost)] = 1e300
    rows, cols = linear_sum_assignment(cost)
    perm = cols[np.argsort(rows)]
    if cost[np.arange(l.shape[0]), perm].sum() < cost[np.arange(l.shape[0]), np.arange(l.shape[0])].sum() - 1e-9:
        return l[:, perm]
    return l


def _positive_diagonal(l: np.ndarray) -> np.ndarray:
    g = np.diag(l)
    tol = DIAG_ZERO_RTOL * np.abs(l).max()
    zero = np.flatnonzero(np.abs(g) <= tol)
    if zero.size:
        raise RootDiagonalZero(f"root has zero diagonal at {(zero + 1).tolist()}", witness=(zero + 1).tolist())
    # flipping a column keeps l @ l.T unchanged
    return l * np.where(g < 0, -1.0, 1.0)[None, :]


def sar_from_root(root: MatrixRoot) -> SarModel:
    """Split ``L = G - P`` (``G`` diagonal) and set ``Omega = G^{-2}``, ``B^T = P G^{-1}``.

    ``B`` and ``Omega`` do not depend on the column signs of ``L``, so a
    negative diagonal entry is accepted; an exactly zero one is not.
    """
    l = np.asarray(root.l, dtype=float)
    g = np.diag(l).copy()
    tol = DIAG_ZERO_RTOL * np.abs(l).max()
    zero = np.flatnonzero(np.abs(g) <= tol)
    if zero.size:
        raise RootDiagonalZero(f"root has zero diagonal at {(zero + 1).tolist()}", witness=(zero + 1).tolist())
    p = np.diag(g) - l
    b = (p / g[None, :]).T
    np.fill_diagonal(b, 0.0)
    return SarModel(b, np.diag(1.0 / g ** 2))


def sar_from_covariance(sigma, kind: str = "cholesky") -> SarModel:
    return sar_from_root(root_of_precision(sigma, kind))


def car_from_covariance(sigma, method: str = "cholesky") -> CarModel:
    """The unique CAR pair: ``C = D^{-1} R``, ``M = D^{-1}`` with ``Q = D - R``."""
    q = precision(sigma, method)
    d = np.diag(q).copy()
    if np.any(d <= 0):
        raise NotPositiveDefinite("precision has a nonpositive diagonal entry")
    c = -q / d[:, None]
    np.fill_diagonal(c, 0.0)
    return CarModel(c, np.diag(1.0 / d))


def car_from_sar(model: SarModel) -> CarModel:
    return car_from_covariance(sar_covariance(model))


def sar_from_car(model: CarModel, kind: str = "cholesky") -> SarModel:
    return sar_from_covariance(car_covariance(model), kind)


def haining_c_from_b(b) -> tuple[np.ndarray, ConditionReport]:
    """``C = B + B^T - B B^T`` checked as a CAR dependence matrix with ``M = I``.

    The diagonal of ``B B^T`` holds the squared row norms of ``B``, so C3
    fails whenever ``B`` has any nonzero entry.
    """
    b = np.asarray(getattr(b, "values", b), dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise InvalidParameter(f"B must be square, got shape {b.shape}")
    if np.any(np.diag(b) != 0):
        raise InvalidParameter("B must have a zero diagonal")
    c = b + b.T - b @ b.T
    return c, validate_car(c, np.eye(b.shape[0]))


def relative_frobenius(a, b) -> float:
    a = getattr(a, "sigma", a)
    b = getattr(b, "sigma", b)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))


__all__ = [
    "MatrixRoot", "precision", "root_of_precision", "sar_from_root", "sar_from_covariance",
    "car_from_covariance", "car_from_sar", "sar_from_car", "haining_c_from_b",
    "relative_frobenius", "CovarianceMatrix",
]
