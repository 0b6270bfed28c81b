"""CAR, SAR and spherical covariance construction, plus legality checks.

The CAR conditions checked by :func:`validate_car` are

* C1 ``I - C`` has only positive real eigenvalues,
* C2 ``M`` diagonal with positive entries,
* C3 zero diagonal in ``C``,
* C4 ``c_ij / m_ii == c_ji / m_jj``,

and the SAR conditions checked by :func:`validate_sar` are

* S1 ``I - B`` nonsingular,
* S2 ``Omega`` diagonal with positive entries,
* S3 zero diagonal in ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.linalg as sla
from scipy.spatial.distance import cdist

from .errors import AsymmetryViolation, InvalidParameter, NotPositiveDefinite, SingularSystem

SYM_RTOL = 1e-12
C4_RTOL = 1e-10
S1_RTOL = 1e-12
IMAG_RTOL = 1e-8


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def as_diagonal(m) -> np.ndarray:
    """Accept a vector of diagonal entries or a square matrix."""
    m = np.asarray(m, dtype=float)
    return np.diag(m) if m.ndim == 1 else m


def _dense(w) -> np.ndarray:
    return np.asarray(getattr(w, "values", w), dtype=float)


@dataclass(frozen=True)
class CarModel:
    """Dependence matrix ``c`` and diagonal conditional variances ``m``."""

    c: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", _frozen(_dense(self.c)))
        object.__setattr__(self, "m", _frozen(as_diagonal(self.m)))

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class SarModel:
    """Dependence matrix ``b`` and diagonal innovation variances ``omega``."""

    b: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", _frozen(_dense(self.b)))
        object.__setattr__(self, "omega", _frozen(as_diagonal(self.omega)))

    @property
    def n(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True)
class CovarianceMatrix:
    sigma: np.ndarray
    certified: bool = False
    min_eigenvalue: float | None = None

    @property
    def n(self) -> int:
        return self.sigma.shape[0]


def certify(sigma) -> CovarianceMatrix:
    """Check symmetry and positive definiteness; return a certified covariance."""
    if isinstance(sigma, CovarianceMatrix):
        if sigma.certified:
            return sigma
        sigma = sigma.sigma
    s = np.asarray(sigma, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise InvalidParameter(f"covariance must be square, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise NotPositiveDefinite("covariance has non-finite entries")
    scale = np.abs(s).max() if s.size else 0.0
    asym = np.abs(s - s.T).max() if s.size else 0.0
    if asym > SYM_RTOL * max(scale, np.finfo(float).tiny):
        raise AsymmetryViolation(f"covariance not symmetric (max |S - S^T| = {asym:.3g})", witness=float(asym))
    s = 0.5 * (s + s.T)
    lam = np.linalg.eigvalsh(s)
    if lam.size and lam[0] <= 0.0:
        raise NotPositiveDefinite(f"minimum eigenvalue {lam[0]:.6g} is not positive", witness=float(lam[0]))
    return CovarianceMatrix(_frozen(s), True, float(lam[0]) if lam.size else None)


# ---------------------------------------------------------------------------
# condition reports


@dataclass(frozen=True)
class ConditionResult:
    condition: str
    passed: bool
    witness: Any = None

    def to_dict(self) -> dict:
        return {"condition": self.condition, "pass": bool(self.passed), "witness": self.witness}


@dataclass(frozen=True)
class ConditionReport:
    results: tuple[ConditionResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> ConditionResult:
        for r in self.results:
            if r.condition == name:
                return r
        raise KeyError(name)

    def failed(self) -> list[str]:
        return [r.condition for r in self.results if not r.passed]

    def to_dict(self) -> list[dict]:
        return [r.to_dict() for r in self.results]


def _one_based(idx) -> list[int]:
    return (np.asarray(idx) + 1).tolist()


def _check_diag_positive(name: str, m: np.ndarray) -> ConditionResult:
    off = m - np.diag(np.diag(m))
    off_idx = np.argwhere(off != 0.0)
    nonpos = np.flatnonzero(np.diag(m) <= 0.0)
    ok = off_idx.size == 0 and nonpos.size == 0
    witness = None
    if not ok:
        witness = {"nonpositive_diagonal": _one_based(nonpos),
                   "offdiagonal_nonzero": (off_idx[:10] + 1).tolist()}
    return ConditionResult(name, ok, witness)


def _check_zero_diag(name: str, a: np.ndarray) -> ConditionResult:
    bad = np.flatnonzero(np.diag(a) != 0.0)
    witness = None
    if bad.size:
        witness = {"indices": _one_based(bad), "values": np.diag(a)[bad].tolist()}
    return ConditionResult(name, bad.size == 0, witness)


def _check_c4(c: np.ndarray, m: np.ndarray) -> ConditionResult:
    d = np.diag(m)
    lhs = c * d[None, :]   # c_ij m_jj
    rhs = c.T * d[:, None]  # c_ji m_ii, laid out at (i, j)
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1e-300)
    bad = np.abs(lhs - rhs) > C4_RTOL * scale
    witness = None
    if bad.any():
        pairs = np.argwhere(np.triu(bad | bad.T, 1))
        witness = {"pairs": (pairs[:10] + 1).tolist(),
                   "max_rel_diff": float((np.abs(lhs - rhs) / scale).max())}
    return ConditionResult("C4", not bad.any(), witness)


def _check_c1(c: np.ndarray) -> ConditionResult:
    a = np.eye(c.shape[0]) - c
    ev = np.linalg.eigvals(a)
    radius = np.abs(ev).max() if ev.size else 0.0
    max_imag = float(np.abs(ev.imag).max()) if ev.size else 0.0
    min_real = float(ev.real.min()) if ev.size else 1.0
    real = max_imag <= IMAG_RTOL * max(radius, np.finfo(float).tiny)
    ok = real and min_real > 0.0
    return ConditionResult("C1", ok, {"min_eigenvalue": min_real, "max_imag": max_imag})


def validate_car(c, m) -> ConditionReport:
    c = _dense(c)
    m = as_diagonal(m)
    if c.shape != m.shape or c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InvalidParameter(f"non-conformable inputs {c.shape} and {m.shape}")
    return ConditionReport((_check_c1(c), _check_diag_positive("C2", m),
                            _check_zero_diag("C3", c), _check_c4(c, m)))


def _check_s1(b: np.ndarray) -> ConditionResult:
    sv = np.linalg.svd(np.eye(b.shape[0]) - b, compute_uv=False)
    smin, smax = (float(sv.min()), float(sv.max())) if sv.size else (1.0, 1.0)
    return ConditionResult("S1", smin > S1_RTOL * smax, {"min_singular_value": smin, "max_singular_value": smax})


def validate_sar(b, omega) -> ConditionReport:
    b = _dense(b)
    omega = as_diagonal(omega)
    if b.shape != omega.shape or b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise InvalidParameter(f"non-conformable inputs {b.shape} and {omega.shape}")
    return ConditionReport((_check_s1(b), _check_diag_positive("S2", omega), _check_zero_diag("S3", b)))


# ---------------------------------------------------------------------------
# covariance builders


def car_covariance(model: CarModel) -> CovarianceMatrix:
    """``(I - C)^{-1} M`` for a legal CAR pair."""
    c, m = model.c, model.m
    for res in (_check_diag_positive("C2", m), _check_zero_diag("C3", c)):
        if not res.passed:
            raise InvalidParameter(f"CAR condition {res.condition} violated", witness=res.witness)
    c4 = _check_c4(c, m)
    if not c4.passed:
        raise AsymmetryViolation("CAR symmetry condition C4 violated", witness=c4.witness)
    c1 = _check_c1(c)
    if not c1.passed:
        raise NotPositiveDefinite("I - C has a nonpositive or complex eigenvalue", witness=c1.witness)
    try:
        s = np.linalg.solve(np.eye(model.n) - c, m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"I - C is singular: {exc}") from exc
    # exact symmetry holds under C4; remove rounding asymmetry only
    return certify(0.5 * (s + s.T))


def sar_covariance(model: SarModel) -> CovarianceMatrix:
    """``(I - B)^{-1} Omega (I - B^T)^{-1}`` for a legal SAR pair."""
    b, omega = model.b, model.omega
    for res in (_check_diag_positive("S2", omega), _check_zero_diag("S3", b)):
        if not res.passed:
            raise InvalidParameter(f"SAR condition {res.condition} violated", witness=res.witness)
    s1 = _check_s1(b)
    if not s1.passed:
        raise SingularSystem("I - B is singular", witness=s1.witness)
    x = sla.solve(np.eye(model.n) - b, np.diag(np.sqrt(np.diag(omega))))
    s = x @ x.T
    return certify(0.5 * (s + s.T))


@dataclass(frozen=True)
class Centroids:
    points: np.ndarray

    def __post_init__(self):
        p = _frozen(self.points)
        if p.ndim != 2 or p.shape[0] < 1:
            raise InvalidParameter(f"centroids must be an (n, d) array with n >= 1, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidParameter("centroid coordinates must be finite")
        object.__setattr__(self, "points", p)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def distances(self) -> np.ndarray:
        return cdist(self.points, self.points)


def spherical_correlation(dist: np.ndarray, alpha: float) -> np.ndarray:
    h = np.asarray(dist, dtype=float) / alpha
    return np.where(h < 1.0, 1.0 - 1.5 * h + 0.5 * h ** 3, 0.0)


def spherical_covariance(cent: Centroids, sigma2: float, alpha: float, delta2: float = 0.0,
                         dist: np.ndarray | None = None) -> CovarianceMatrix:
    """Partial sill ``sigma2`` times spherical correlation with range ``alpha``, plus nugget."""
    if not sigma2 > 0:
        raise InvalidParameter(f"sigma2 must be positive, got {sigma2}")
    if not alpha > 0:
        raise InvalidParameter(f"alpha must be positive, got {alpha}")
    if not delta2 >= 0:
        raise InvalidParameter(f"delta2 must be nonnegative, got {delta2}")
    e = cent.distances() if dist is None else dist
    s = sigma2 * spherical_correlation(e, alpha) + delta2 * np.eye(e.shape[0])
    return certify(s)


def marginal_summary(sigma: CovarianceMatrix) -> tuple[np.ndarray, np.ndarray]:
    s = certify(sigma).sigma
    var = np.diag(s).copy()
    d = 1.0 / np.sqrt(var)
    corr = s * d[:, None] * d[None, :]
    np.fill_diagonal(corr, 1.0)
    return var, corr
