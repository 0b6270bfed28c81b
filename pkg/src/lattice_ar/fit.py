"""REML estimation of CAR, SAR and spherical covariance models with a nugget.

Every family has three covariance parameters ``(sigma2, rho | alpha, delta2)``:

=====================  ==============================================
family                 covariance
=====================  ==============================================
car-unstandardized     ``sigma2 (I - rho W)^{-1} + delta2 I``
car-row-standardized   ``sigma2 (I - rho W+)^{-1} M+ + delta2 I``
sar                    ``sigma2 [(I - rho W)^T (I - rho W)]^{-1} + delta2 I``
spherical              ``sigma2 S(alpha) + delta2 I``
car-given-weights      ``sigma2 (I - rho W)^{-1} M + delta2 I``
=====================  ==============================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .errors import InvalidParameter, NonConvergence, NotPositiveDefinite
from .lattice import WeightsMatrix, rho_bounds, row_standardize
from .model import Centroids, CovarianceMatrix, as_diagonal, certify, spherical_correlation

FAMILIES = ("car-unstandardized", "car-row-standardized", "sar", "spherical", "car-given-weights")
RHO_MARGIN = 1e-6
SIGMA2_MIN = 1e-12
LOG_2PI = math.log(2.0 * math.pi)
DEFAULT_SEED = 20170401


@dataclass(frozen=True)
class ModelSpec:
    """Covariance family plus the fixed inputs it needs.

    ``bounds`` optionally overrides the default box, as a mapping from
    parameter name to ``(low, high)``.
    """

    family: str
    weights: np.ndarray | None = None
    m: np.ndarray | None = None
    centroids: Centroids | None = None
    bounds: dict | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameter(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "spherical":
            if self.centroids is None:
                raise InvalidParameter("spherical family needs centroids")
        elif self.weights is None:
            raise InvalidParameter(f"{self.family} family needs a weights matrix")
        if self.weights is not None:
            w = np.array(getattr(self.weights, "values", self.weights), dtype=float)
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        if self.m is not None:
            m = np.array(as_diagonal(self.m), dtype=float)
            m.setflags(write=False)
            object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.centroids.n if self.family == "spherical" else self.weights.shape[0]

    @property
    def param_names(self) -> tuple[str, str, str]:
        return ("sigma2", "alpha", "delta2") if self.family == "spherical" else ("sigma2", "rho", "delta2")

    @cached_property
    def _dependence(self) -> tuple[np.ndarray, np.ndarray]:
        """The (W, M) pair entering ``(I - rho W)^{-1} M``."""
        n = self.weights.shape[0]
        if self.family == "car-row-standardized":
            wp, mp = row_standardize(WeightsMatrix(self.weights))
            return np.asarray(wp.values), mp
        if self.family == "car-given-weights" and self.m is not None:
            return self.weights, self.m
        return self.weights, np.eye(n)

    @cached_property
    def _distances(self) -> np.ndarray:
        return self.centroids.distances()

    @cached_property
    def rho_bounds(self):
        return rho_bounds(self._dependence[0])

    def resolved_bounds(self) -> dict[str, tuple[float, float]]:
        if self.family == "spherical":
            dmax = float(self._distances.max())
            dmax = dmax if dmax > 0 else 1.0
            out = {"sigma2": (SIGMA2_MIN, np.inf), "alpha": (1e-6 * dmax, 2.0 * dmax), "delta2": (0.0, np.inf)}
        else:
            lo, hi = self.rho_bounds.shrunk(RHO_MARGIN)
            out = {"sigma2": (SIGMA2_MIN, np.inf), "rho": (lo, hi), "delta2": (0.0, np.inf)}
        if self.bounds:
            out.update({k: tuple(map(float, v)) for k, v in self.bounds.items()})
        return out

    def covariance_array(self, theta) -> np.ndarray:
        """Unchecked covariance at ``theta`` (symmetrized)."""
        s2, p, d2 = (float(t) for t in theta)
        if self.family == "spherical":
            s = s2 * spherical_correlation(self._distances, p)
        else:
            w, m = self._dependence
            a = np.eye(w.shape[0]) - p * w
            if self.family == "sar":
                x = sla.solve(a, np.eye(w.shape[0]))
                s = s2 * (x @ x.T)
            else:
                s = s2 * sla.solve(a, m)
        s = 0.5 * (s + s.T)
        s[np.diag_indices_from(s)] += d2
        return s


@dataclass(frozen=True)
class FitData:
    y: np.ndarray
    x: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        x = np.ones((y.size, 1)) if self.x is None else np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != y.size:
            raise InvalidParameter(f"design has {x.shape[0]} rows but y has {y.size}")
        if np.linalg.matrix_rank(x) < x.shape[1]:
            raise InvalidParameter("design matrix is not of full column rank")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.size


@dataclass
class FitResult:
    family: str
    theta_hat: dict[str, float]
    neg2_reml: float
    converged: bool
    iterations: int
    bounds: dict[str, tuple[float, float]]
    start: dict[str, float] = field(default_factory=dict)
    beta_hat: list[float] = field(default_factory=list)

    @property
    def theta(self) -> tuple[float, float, float]:
        return tuple(self.theta_hat.values())

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "theta_hat": self.theta_hat,
            "neg2_reml": self.neg2_reml,
            "converged": self.converged,
            "iterations": self.iterations,
            "bounds": {k: [_json_float(a), _json_float(b)] for k, (a, b) in self.bounds.items()},
            "start": self.start,
            "beta_hat": self.beta_hat,
        }


def _json_float(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _check_theta(spec: ModelSpec, theta) -> None:
    if len(theta) != 3:
        raise InvalidParameter(f"theta must have 3 entries, got {len(theta)}")
    for name, v, (lo, hi) in zip(spec.param_names, theta, spec.resolved_bounds().values()):
        if not lo <= v <= hi:
            raise InvalidParameter(f"{name}={v} outside bounds ({lo}, {hi})")


def build_sigma(spec: ModelSpec, theta, check_bounds: bool = True) -> CovarianceMatrix:
    if check_bounds:
        _check_theta(spec, theta)
    s = spec.covariance_array(theta)
    try:
        return certify(s)
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(f"covariance not PD at theta={tuple(theta)} "
                                  f"(cond={np.linalg.cond(s):.3g}): {exc}", witness=exc.witness) from exc


def _reml_from_sigma(s: np.ndarray, data: FitData) -> tuple[float, np.ndarray]:
    try:
        c = sla.cholesky(s, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky failed: {exc}") from exc
    xt = sla.solve_triangular(c, data.x, lower=True)
    yt = sla.solve_triangular(c, data.y, lower=True)
    xtx = xt.T @ xt
    beta = np.linalg.solve(xtx, xt.T @ yt)
    r = yt - xt @ beta
    sign, logdet_x = np.linalg.slogdet(xtx)
    p = data.x.shape[1]
    val = 2.0 * np.log(np.diag(c)).sum() + logdet_x + r @ r + (data.n - p) * LOG_2PI
    return float(val), beta


def neg2_reml(spec: ModelSpec, theta, data: FitData) -> float:
    """Minus twice the restricted log-likelihood, constants included."""
    if spec.n != data.n:
        raise InvalidParameter(f"spec has n={spec.n}, data has n={data.n}")
    return _reml_from_sigma(build_sigma(spec, theta).sigma, data)[0]


# ---------------------------------------------------------------------------
# optimizer


class _Transform:
    """Unconstrained coordinates: log / logit for open bounds, square root for delta2."""

    def __init__(self, bounds: dict[str, tuple[float, float]], scale: float):
        self.bounds = list(bounds.items())
        self.scale = scale

    def to_theta(self, u):
        out = []
        for (name, (lo, hi)), ui in zip(self.bounds, u):
            if name == "delta2":
                v = self.scale * ui * ui + lo
                out.append(min(v, hi))
            elif math.isfinite(hi):
                out.append(lo + (hi - lo) / (1.0 + math.exp(-ui)) if ui > -700 else lo)
            else:
                out.append(lo + math.exp(min(ui, 700.0)))
        return out

    def to_u(self, theta):
        out = []
        for (name, (lo, hi)), v in zip(self.bounds, theta):
            if name == "delta2":
                out.append(math.sqrt(max(v - lo, 0.0) / self.scale))
            elif math.isfinite(hi):
                f = (v - lo) / (hi - lo)
                f = min(max(f, 1e-12), 1 - 1e-12)
                out.append(math.log(f / (1 - f)))
            else:
                out.append(math.log(max(v - lo, 1e-300)))
        return np.array(out)


def default_start(spec: ModelSpec, data: FitData) -> list[float]:
    """Data-driven starting values.

    CAR and SAR families start at half the total variance in each component
    with ``rho`` halfway to its upper bound; the spherical family uses half
    the maximum inter-centroid distance as the range; car-given-weights
    starts at ``(1, 1, 0)``, where it reproduces the covariance its weights
    were derived from.
    """
    v = float(np.var(data.y, ddof=1)) if data.n > 1 else 1.0
    b = spec.resolved_bounds()
    if spec.family == "spherical":
        a = 0.5 * float(spec._distances.max())
        a = min(max(a, b["alpha"][0]), b["alpha"][1])
        return [0.5 * v, a, 0.5 * v]
    lo, hi = b["rho"]
    if spec.family == "car-given-weights":
        return [1.0, min(max(1.0, lo), hi), 0.0]
    return [0.5 * v, 0.5 * hi if hi > 0 else 0.0, 0.5 * v]


def fit(spec: ModelSpec, data: FitData, start=None, n_starts: int = 5, jitter: float = 0.1,
        seed: int = DEFAULT_SEED, xatol: float = 1e-8, fatol: float = 1e-8,
        maxiter: int = 20000, raise_on_failure: bool = True) -> FitResult:
    """Minimize ``neg2_reml`` over the box of covariance parameters.

    Nelder-Mead runs in transformed coordinates from ``start`` and from
    ``n_starts - 1`` points jittered around it (normal noise of sd
    ``jitter`` in transformed units); the best run is restarted until it
    stops improving.
    """
    if spec.n != data.n:
        raise InvalidParameter(f"spec has n={spec.n}, data has n={data.n}")
    bounds = spec.resolved_bounds()
    scale = float(np.var(data.y, ddof=1)) if data.n > 1 else 1.0
    scale = scale if scale > 0 else 1.0
    tr = _Transform(bounds, scale)
    theta0 = list(start) if start is not None else default_start(spec, data)
    _check_theta(spec, theta0)
    u0 = tr.to_u(theta0)

    nfev = 0

    def objective(u):
        nonlocal nfev
        nfev += 1
        try:
            return _reml_from_sigma(spec.covariance_array(tr.to_theta(u)), data)[0]
        except (np.linalg.LinAlgError, NotPositiveDefinite, ValueError, OverflowError):
            return np.inf

    def run(u):
        simplex = np.vstack([u] + [u + np.eye(3)[i] * 0.25 for i in range(3)])
        return minimize(objective, u, method="Nelder-Mead",
                        options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter,
                                 "maxfev": 4 * maxiter, "initial_simplex": simplex})

    rng = np.random.default_rng(seed)
    starts = [u0] + [u0 + jitter * rng.standard_normal(3) for _ in range(max(n_starts, 1) - 1)]
    best = None
    f0 = objective(u0)
    for u in starts:
        r = run(u)
        if best is None or r.fun < best.fun:
            best = r
    converged = bool(best.success)
    for _ in range(20):
        r = run(best.x)
        improved = r.fun < best.fun - fatol
        if r.fun <= best.fun:
            best = r
        converged = bool(r.success)
        if not improved:
            break

    # the start itself is always a candidate, so the fit never ends worse than it
    u_hat, f_hat = (best.x, float(best.fun)) if best.fun <= f0 else (u0, f0)
    theta_hat = tr.to_theta(u_hat)
    _, beta = _reml_from_sigma(spec.covariance_array(theta_hat), data)
    result = FitResult(
        family=spec.family,
        theta_hat=dict(zip(spec.param_names, map(float, theta_hat))),
        neg2_reml=f_hat,
        converged=converged and math.isfinite(f_hat),
        iterations=nfev,
        bounds=bounds,
        start=dict(zip(spec.param_names, map(float, theta0))),
        beta_hat=[float(b) for b in beta],
    )
    if not result.converged and raise_on_failure:
        raise NonConvergence(f"{spec.family} fit did not converge after {nfev} evaluations", best=result)
    return result


def geostatistical_assisted_spec(spherical_spec: ModelSpec, theta) -> ModelSpec:
    """CAR spec whose weights and conditional variances reproduce a fitted spherical covariance."""
    from .convert import car_from_covariance

    car = car_from_covariance(build_sigma(spherical_spec, theta, check_bounds=False))
    return ModelSpec("car-given-weights", weights=car.c, m=car.m)
