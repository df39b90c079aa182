"""Deterministic Marchenko-Pastur / Silverstein machinery.

Everything here is about the companion resolvent equation

    z = 1/m(z) + r * integral s dnu(s) / (1 - s m(z)),

its inverse branch x(y) = 1/y + r * integral s dnu(s) / (1 - s y) on the real
line, and the centering constants built from a population spectrum.  m is the
Cauchy transform m(z) = integral dmu(s)/(z - s), so Im z > 0 forces Im m < 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, GapConditionError
from .sampling import EntryLaw
from .spectra import DiscreteMeasure

_RESIDUAL_TOL = 1e-10
_MAX_ITER = 10_000


@dataclass(frozen=True)
class MPParams:
    """White-noise aspect ratio r with bulk edges (1 +- sqrt(r))^2."""

    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("aspect ratio must be positive")

    @property
    def lambda_minus(self) -> float:
        return (1.0 - math.sqrt(self.r)) ** 2

    @property
    def lambda_plus(self) -> float:
        return (1.0 + math.sqrt(self.r)) ** 2


def mp_density(params: MPParams, lam: float) -> float:
    """Continuous Marchenko-Pastur density at lam > 0 (zero off the bulk)."""
    if lam <= 0:
        raise ValueError("density defined for lam > 0; the atom at 0 is mp_atom")
    inside = (params.lambda_plus - lam) * (lam - params.lambda_minus)
    if inside <= 0:
        return 0.0
    return math.sqrt(inside) / (2.0 * math.pi * params.r * lam)


def mp_atom(params: MPParams) -> float:
    """Mass of the atom at zero: (1 - 1/r)+."""
    return max(1.0 - 1.0 / params.r, 0.0)


@dataclass(frozen=True)
class FixedPointSolution:
    z: complex
    m: complex
    iterations: int
    residual: float


def _weighted_terms(nu: DiscreteMeasure, r: float):
    s = nu.locations.astype(float)
    c = r * nu.weights.astype(float)
    keep = s != 0.0
    return s[keep], c[keep]


def _curve(s: np.ndarray, c: np.ndarray, y):
    """x(y) = 1/y + sum c_k s_k / (1 - s_k y) and its derivative."""
    denom = 1.0 - np.multiply.outer(np.asarray(y, dtype=float), s)
    x = 1.0 / np.asarray(y, dtype=float) + np.sum(c * s / denom, axis=-1)
    xp = -1.0 / np.asarray(y, dtype=float) ** 2 + np.sum(c * s**2 / denom**2, axis=-1)
    return x, xp


def solve_fixed_point(
    nu: DiscreteMeasure,
    r: float,
    z: complex,
    tol: float = _RESIDUAL_TOL,
    max_iter: int = _MAX_ITER,
) -> FixedPointSolution:
    """Solve the companion fixed-point equation at one query point.

    Nonreal z: damped Picard iteration (weight 1/2) started at 1/z, with a
    Newton fallback once the residual stagnates.  Real z: the equation is
    inverted through the boundary curve with pole-aware bracketing, which
    requires z to lie outside the support and fails loudly otherwise.
    """
    if r <= 0:
        raise ValueError("aspect ratio must be positive")
    z = complex(z)
    s = nu.locations.astype(float)
    w = nu.weights.astype(float)

    if z.imag == 0.0:
        return _real_axis_transform(nu, r, z.real)
    if z.imag < 0.0:
        # Schwarz reflection: m(conj z) = conj m(z)
        sol = solve_fixed_point(nu, r, z.conjugate(), tol=tol, max_iter=max_iter)
        return FixedPointSolution(z, sol.m.conjugate(), sol.iterations, sol.residual)

    def integral(m):
        return np.sum(w * s / (1.0 - s * m))

    def residual_of(m):
        return abs(z - 1.0 / m - r * integral(m))

    m = 1.0 / z
    omega = 0.5
    best = residual_of(m)
    newton = False
    for it in range(1, max_iter + 1):
        if newton:
            f = z - 1.0 / m - r * integral(m)
            fp = 1.0 / m**2 - r * np.sum(w * s**2 / (1.0 - s * m) ** 2)
            step = f / fp
            m = m - step
        else:
            m = (1.0 - omega) * m + omega / (z - r * integral(m))
        res = residual_of(m)
        if res < tol:
            return FixedPointSolution(z, complex(m), it, float(res))
        if it % 50 == 0:
            if res > 0.5 * best:
                newton = True
            best = min(best, res)
    raise ConvergenceError(
        f"fixed point did not reach {tol:g} after {max_iter} iterations "
        f"(residual {res:.3e} at z = {z})"
    )


def _real_axis_transform(nu: DiscreteMeasure, r: float, x: float) -> FixedPointSolution:
    s, c = _weighted_terms(nu, r)
    hit = _find_boundary_root(s, c, x)
    if hit is None:
        raise ValueError(
            f"real query z = {x!r} lies inside the support; no certified branch"
        )
    y, res = hit
    return FixedPointSolution(complex(x), complex(y), 0, res)


def x_of_y(eigs, r_N: float, y: float) -> tuple[float, float]:
    """Boundary curve x(y) and x'(y) for the spectrum ``eigs`` with ratio r_N.

    The weighting is (1/n) = r_N / N per eigenvalue.  y must avoid 0 and the
    poles 1/lambda_k.
    """
    lam = np.asarray(eigs, dtype=float)
    if y == 0.0:
        raise ValueError("y = 0 is outside the domain of the boundary curve")
    if np.any(np.abs(1.0 - lam * y) < 1e-12):
        raise ValueError(f"1/y collides with a population eigenvalue at y = {y!r}")
    c = np.full(lam.shape, r_N / len(lam))
    x, xp = _curve(lam, c, y)
    return float(x), float(xp)


def boundary_scan(eigs, r_N: float, y_values) -> np.ndarray:
    """Rows (y, x, x') over a y grid, skipping pole collisions with NaN."""
    rows = np.empty((len(y_values), 3))
    for i, y in enumerate(y_values):
        try:
            x, xp = x_of_y(eigs, r_N, float(y))
        except ValueError:
            x, xp = math.nan, math.nan
        rows[i] = (y, x, xp)
    return rows


@dataclass(frozen=True)
class SupportQuery:
    """A certified point of the support complement: x = x(y) with x'(y) < 0."""

    y: float
    x: float
    x_prime: float


def _pole_intervals(s: np.ndarray, scale: float):
    """Open intervals of the domain between 0 and the poles 1/lambda_k."""
    poles = np.sort(np.unique(1.0 / s)) if len(s) else np.array([])
    # dedupe to avoid zero-width intervals from near-identical eigenvalues
    if len(poles) > 1:
        keep = np.concatenate([[True], np.diff(poles) > 1e-12 * np.abs(poles[1:])])
        poles = poles[keep]
    intervals = []
    u = np.linspace(-14.0, 14.0, 113)
    intervals.append((-np.power(10.0, u[::-1]) * scale, "neg"))
    if len(poles) == 0:
        intervals.append((np.power(10.0, u) * scale, "pos"))
        return intervals
    lo = 0.0
    for p in poles:
        width = p - lo
        t = np.linspace(1e-9, 1.0 - 1e-9, 129)
        intervals.append((lo + width * t, "mid"))
        lo = p
    tail = poles[-1] * (1.0 + np.power(10.0, np.linspace(-12.0, 12.0, 97)))
    intervals.append((tail, "tail"))
    return intervals


def _find_boundary_root(s: np.ndarray, c: np.ndarray, x: float):
    """Search every pole interval for y with x(y) = x and x'(y) < 0."""

    def g(y):
        denom = 1.0 - s * y
        return 1.0 / y + float(np.sum(c * s / denom)) - x

    def gprime(y):
        denom = 1.0 - s * y
        return -1.0 / y**2 + float(np.sum(c * s**2 / denom**2))

    scale = 1.0 / float(np.max(s)) if len(s) else 1.0
    for grid, _tag in _pole_intervals(s, scale):
        vals = np.array([g(y) for y in grid])
        ok = np.isfinite(vals)
        idx = np.nonzero(ok[:-1] & ok[1:] & (np.sign(vals[:-1]) != np.sign(vals[1:])))[0]
        for i in idx:
            try:
                root = brentq(g, grid[i], grid[i + 1], xtol=1e-300, rtol=9e-16)
            except ValueError:
                continue
            if gprime(root) < 0.0:
                residual = abs(g(root))
                return float(root), float(residual)
    return None


def support_complement(eigs, r_N: float, x: float):
    """Decide whether x lies outside the companion support.

    Returns (outside, witness): ``outside`` is the certified boolean and
    ``witness`` the SupportQuery carrying the root when outside, else None.
    """
    lam = np.asarray(eigs, dtype=float)
    c_full = np.full(lam.shape, r_N / len(lam))
    s, c = lam[lam != 0.0], c_full[lam != 0.0]
    if len(s) == 0:
        # pure point mass at zero: support is {0}
        if x == 0.0:
            return False, None
        y = 1.0 / x
        return True, SupportQuery(y=y, x=x, x_prime=-x * x)
    hit = _find_boundary_root(s, c, x)
    if hit is None:
        return False, None
    y, _res = hit
    xval, xp = _curve(s, c, y)
    return True, SupportQuery(y=float(y), x=float(xval), x_prime=float(xp))


def upper_support_edge(eigs, r_N: float) -> float:
    """Rightmost support point: the minimum of x(y) over y in (0, 1/lambda_1).

    On that interval x is strictly convex, so the unique root of x' is found
    by bracketed bisection and pinpoints the edge to near machine precision.
    """
    lam = np.asarray(eigs, dtype=float)
    lam1 = float(np.max(lam))
    if lam1 <= 0:
        raise ValueError("upper edge needs a positive top eigenvalue")
    s = lam[lam != 0.0]
    c = np.full(s.shape, r_N / len(lam))

    def xp(y):
        denom = 1.0 - s * y
        return -1.0 / y**2 + float(np.sum(c * s**2 / denom**2))

    top = 1.0 / lam1
    lo, hi = 1e-12 * top, (1.0 - 1e-12) * top
    while xp(lo) >= 0.0:
        lo *= 0.5
    while xp(hi) <= 0.0:
        hi = top - (top - hi) * 0.5
    y_star = brentq(xp, lo, hi, xtol=1e-300, rtol=9e-16)
    denom = 1.0 - s * y_star
    return float(1.0 / y_star + np.sum(c * s / denom))


def beta_centering(eigs, n: int) -> float:
    """Centering correction (1/n) * sum_{k>=2} lambda_k / (lambda_1 - lambda_k).

    Scale invariant in the spectrum; requires a strict gap lambda_1 > lambda_2.
    Summed with compensated accumulation since the denominators can be tiny.
    """
    lam = np.sort(np.asarray(eigs, dtype=float))[::-1]
    if len(lam) < 1 or lam[0] <= 0:
        raise ValueError("centering needs a positive top eigenvalue")
    if len(lam) >= 2 and lam[0] - lam[1] <= 0:
        raise GapConditionError(
            f"degenerate top eigenvalues lambda_1 = {lam[0]!r}, lambda_2 = {lam[1]!r}"
        )
    if n < 1:
        raise ValueError("n must be positive")
    tail = lam[1:]
    return math.fsum(tail / (lam[0] - tail)) / n


def theta_centering(eigs, n: int) -> float:
    """Centering location 1 + (1/n) sum_{k>=2} lambda_k/(1 - lambda_k) for a
    spectrum normalized to lambda_1 = 1."""
    lam = np.sort(np.asarray(eigs, dtype=float))[::-1]
    if abs(lam[0] - 1.0) > 1e-12:
        raise ValueError(f"spectrum must be normalized to lambda_1 = 1, got {lam[0]!r}")
    return 1.0 + beta_centering(lam, n)


def sigma_squared(law: EntryLaw) -> float:
    """Variance of the limiting Gaussian: fourth moment of the entries minus 1."""
    return law.fourth_moment - 1.0
