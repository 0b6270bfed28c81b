"""Givens rotations of precision roots and coordinate-descent sparsification of SAR weights.

Rotating a root ``L -> L A^T`` with orthonormal ``A`` leaves ``L L^T`` and hence
the covariance unchanged, while the SAR matrix ``B`` built from the root
changes. :func:`sparsify` walks all planes ``(h, s)`` and picks, per plane, the
angle that minimizes the fullness ``f(B) = sum|b| / sqrt(sum b^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .convert import MatrixRoot, sar_from_root
from .errors import InvalidPlane, UndefinedFullness, UndefinedSparseness
from .model import SarModel

TWO_PI = 2.0 * math.pi
GRID_POINTS = 360
GOLDEN_TOL = 1e-9
NONNEG_ATOL = 1e-12
ACCEPT_TOL = 1e-12
# a candidate whose root diagonal is this small relative to its column is rejected
DIAG_GUARD = 1e-8

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GivensRotation:
    h: int
    s: int
    theta: float

    def __post_init__(self):
        if not (0 <= self.h < self.s):
            raise InvalidPlane(f"need 0 <= h < s, got h={self.h}, s={self.s}")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    def matrix(self, n: int) -> np.ndarray:
        return givens_matrix(n, self.h, self.s, self.theta)


def givens_matrix(n: int, h: int, s: int, theta: float) -> np.ndarray:
    if not (0 <= h < s < n):
        raise InvalidPlane(f"need 0 <= h < s < n, got h={h}, s={s}, n={n}")
    a = np.eye(n)
    c, sn = math.cos(theta), math.sin(theta)
    a[h, h] = a[s, s] = c
    a[h, s] = sn
    a[s, h] = -sn
    return a


def _rotate_columns(l: np.ndarray, h: int, s: int, theta: float) -> np.ndarray:
    # l @ A_{h,s}(theta)^T touches columns h and s only
    c, sn = math.cos(theta), math.sin(theta)
    out = l.copy()
    out[:, h] = c * l[:, h] + sn * l[:, s]
    out[:, s] = -sn * l[:, h] + c * l[:, s]
    return out


def rotate_root(root: MatrixRoot, r: GivensRotation) -> MatrixRoot:
    if r.s >= root.n:
        raise InvalidPlane(f"plane ({r.h}, {r.s}) out of range for n={root.n}")
    return MatrixRoot(_rotate_columns(np.asarray(root.l), r.h, r.s, r.theta), "rotated")


def fullness(b) -> float:
    b = np.asarray(b, dtype=float).ravel()
    l2 = np.sqrt(np.sum(b * b))
    if l2 == 0.0:
        raise UndefinedFullness("fullness of an all-zero matrix is undefined")
    return float(np.sum(np.abs(b)) / l2)


def sparseness_index(x) -> float:
    """Hoyer sparseness: 1 for a one-hot vector, 0 for a constant one."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise UndefinedSparseness("sparseness needs at least two entries")
    l2 = np.sqrt(np.sum(x * x))
    if l2 == 0.0:
        raise UndefinedSparseness("sparseness of a zero vector is undefined")
    rn = math.sqrt(n)
    return float((rn - np.sum(np.abs(x)) / l2) / (rn - 1.0))


class _PlaneObjective:
    """Fullness of ``B`` as a function of the rotation angle in one plane.

    Row ``j`` of ``B`` is ``-L[:, j] / L[j, j]`` off the diagonal, so a rotation
    in plane ``(h, s)`` only changes rows ``h`` and ``s``.
    """

    def __init__(self, l: np.ndarray, h: int, s: int, nonneg: bool):
        self.lh = l[:, h].copy()
        self.ls = l[:, s].copy()
        self.h, self.s, self.nonneg = h, s, nonneg
        n = l.shape[0]
        g = np.diag(l)
        with np.errstate(divide="ignore", invalid="ignore"):
            b = -(l / g[None, :]).T
        np.fill_diagonal(b, 0.0)
        keep = np.ones(n, dtype=bool)
        keep[[h, s]] = False
        self.rest_l1 = float(np.abs(b[keep]).sum())
        self.rest_l2 = float((b[keep] ** 2).sum())

    def _row_terms(self, col: np.ndarray, j: int):
        # col: (T, n) candidate columns j of the rotated root
        d = col[:, j]
        absd = np.abs(d)
        norm2 = np.sum(col * col, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            l1 = (np.sum(np.abs(col), axis=1) - absd) / absd
            l2 = (norm2 - d * d) / (d * d)
        ok = absd > DIAG_GUARD * np.sqrt(norm2)
        if self.nonneg:
            with np.errstate(divide="ignore", invalid="ignore"):
                row = -col / d[:, None]
            row[:, j] = 0.0
            ok &= np.all(row >= -NONNEG_ATOL, axis=1)
        return l1, l2, ok

    def __call__(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        c, sn = np.cos(theta)[:, None], np.sin(theta)[:, None]
        col_h = c * self.lh[None, :] + sn * self.ls[None, :]
        col_s = -sn * self.lh[None, :] + c * self.ls[None, :]
        l1h, l2h, okh = self._row_terms(col_h, self.h)
        l1s, l2s, oks = self._row_terms(col_s, self.s)
        l1 = self.rest_l1 + l1h + l1s
        l2 = self.rest_l2 + l2h + l2s
        with np.errstate(divide="ignore", invalid="ignore"):
            f = l1 / np.sqrt(l2)
        f[~(okh & oks) | ~np.isfinite(f)] = np.inf
        return f


def _golden(fun, a: float, b: float, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


class ThetaStep(NamedTuple):
    theta: float
    fullness: float
    improved: bool
    feasible: bool


def _current_f(l: np.ndarray) -> float:
    return fullness(sar_from_root(MatrixRoot(l, "rotated")).b)


def _minimize_plane(l: np.ndarray, h: int, s: int, nonneg: bool, f0: float | None = None,
                    grid: int = GRID_POINTS) -> ThetaStep:
    obj = _PlaneObjective(l, h, s, nonneg)
    if f0 is None:
        f0 = _current_f(l)
    thetas = np.arange(grid) * (TWO_PI / grid)
    fg = obj(thetas)
    feasible = bool(np.isfinite(fg).any())
    if not feasible:
        return ThetaStep(0.0, f0, False, False)
    k = int(np.argmin(fg))
    step = TWO_PI / grid
    scalar = lambda t: float(obj(t)[0])
    t_ref, f_ref = _golden(scalar, thetas[k] - step, thetas[k] + step)
    if not f_ref <= fg[k]:
        t_ref, f_ref = float(thetas[k]), float(fg[k])
    if f_ref < f0 - ACCEPT_TOL:
        return ThetaStep(float(t_ref) % TWO_PI, float(f_ref), True, True)
    return ThetaStep(0.0, f0, False, True)


def minimize_theta(root: MatrixRoot, h: int, s: int, nonneg: bool = False) -> ThetaStep:
    """Best angle for a rotation of ``root`` in plane ``(h, s)`` (0-based).

    A 360-point grid over ``[0, 2 pi)`` is refined by golden-section search
    around the best grid point. With ``nonneg`` a candidate is feasible only
    if the rows of ``B`` it changes are nonnegative. ``theta = 0`` is
    returned unless the refined value strictly improves the current fullness.
    """
    if not (0 <= h < s < root.n):
        raise InvalidPlane(f"need 0 <= h < s < n, got h={h}, s={s}, n={root.n}")
    return _minimize_plane(np.asarray(root.l, dtype=float), h, s, nonneg)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    h: int
    s: int
    theta: float
    fullness: float


@dataclass
class SparsifyTrace:
    """Per-iteration record; ``h`` and ``s`` are stored 1-based."""

    rows: list[TraceRow] = field(default_factory=list)
    root_kind: str = ""
    nonneg: bool = False
    initial_fullness: float | None = None
    root: MatrixRoot | None = None

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.fullness for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("iteration,h,s,theta,f\n")
            for r in self.rows:
                fh.write(f"{r.iteration},{r.h},{r.s},{r.theta:.17g},{r.fullness:.17g}\n")


def planes(n: int):
    for h in range(n - 1):
        for s in range(h + 1, n):
            yield h, s


def sparsify(root: MatrixRoot, sweeps: int = 8, nonneg: bool = False) -> tuple[SarModel, SparsifyTrace]:
    """Coordinate descent of ``f(B)`` over Givens angles, ``sweeps`` passes over all planes."""
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    l = np.asarray(root.l, dtype=float).copy()
    start = sar_from_root(root)
    trace = SparsifyTrace(root_kind=root.kind, nonneg=nonneg)
    if not np.any(start.b):
        trace.root = root
        return start, trace
    f = fullness(start.b)
    trace.initial_fullness = f
    k = 0
    for _ in range(sweeps):
        for h, s in planes(root.n):
            k += 1
            step = _minimize_plane(l, h, s, nonneg, f0=f)
            if step.improved:
                l = _rotate_columns(l, h, s, step.theta)
                f = step.fullness
            trace.rows.append(TraceRow(k, h + 1, s + 1, step.theta, f))
    final = MatrixRoot(l, "rotated")
    trace.root = final
    return sar_from_root(final), trace
