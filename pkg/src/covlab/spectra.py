"""Empirical spectral distributions and top-eigenvalue extraction."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import eigsh, svds

from .errors import ConvergenceError
from .population import SpectralDecomposition

_DENSE_CUTOFF = 400


@dataclass(frozen=True)
class DiscreteMeasure:
    """A weighted atom list (locations, weights); weights sum to one."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)
        if loc.shape != w.shape or loc.ndim != 1:
            raise ValueError("locations and weights must be matching 1-d arrays")
        if not np.all(np.isfinite(loc)):
            raise ValueError("atom locations must be finite")
        if np.any(w < -1e-15):
            raise ValueError("atom weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")

    @classmethod
    def point_mass(cls, location: float) -> "DiscreteMeasure":
        return cls(np.array([float(location)]), np.array([1.0]))

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * f(self.locations)))

    def moment(self, k: int) -> float:
        return float(np.sum(self.weights * self.locations**k))

    def merged(self, tol: float = 1e-10) -> "DiscreteMeasure":
        """Cluster atoms closer than ``tol`` (relative); presentation only."""
        order = np.argsort(self.locations)
        loc = self.locations[order]
        w = self.weights[order]
        out_loc, out_w = [], []
        i = 0
        while i < len(loc):
            j = i + 1
            while j < len(loc) and abs(loc[j] - loc[j - 1]) <= tol * max(1.0, abs(loc[j])):
                j += 1
            block = slice(i, j)
            mass = w[block].sum()
            center = float(np.sum(loc[block] * w[block]) / mass) if mass > 0 else float(loc[i])
            out_loc.append(center)
            out_w.append(float(mass))
            i = j
        return DiscreteMeasure(np.array(out_loc), np.array(out_w))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["location", "weight"])
            for x, w in zip(self.locations, self.weights):
                writer.writerow([format(x, ".17g"), format(w, ".17g")])

    @classmethod
    def from_csv(cls, path) -> "DiscreteMeasure":
        loc, w = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                loc.append(float(row["location"]))
                w.append(float(row["weight"]))
        return cls(np.array(loc), np.array(w))


def esd(dec) -> DiscreteMeasure:
    """Empirical spectral distribution: uniform weight 1/N on each eigenvalue."""
    eigs = dec.eigenvalues if isinstance(dec, SpectralDecomposition) else np.asarray(dec, dtype=float)
    n = len(eigs)
    return DiscreteMeasure(np.array(eigs, dtype=float), np.full(n, 1.0 / n))


def companion_esd(m: DiscreteMeasure, r_N: float) -> DiscreteMeasure:
    """Spectral measure of the companion matrix from the sample-covariance one.

    For r_N <= 1 this is the mixture (1 - r_N) delta_0 + r_N * m; for r_N > 1
    the relation is inverted, which removes (r_N - 1) of mass from the atom
    at zero.
    """
    if r_N <= 0:
        raise ValueError("aspect ratio must be positive")
    if r_N == 1.0:
        return DiscreteMeasure(m.locations.copy(), m.weights.copy())
    if r_N < 1.0:
        loc = np.concatenate([[0.0], m.locations])
        w = np.concatenate([[1.0 - r_N], r_N * m.weights])
        return DiscreteMeasure(loc, w)
    scale = max(1.0, float(np.max(np.abs(m.locations))) if len(m.locations) else 0.0)
    zero = np.abs(m.locations) <= 1e-12 * scale
    zero_mass = float(m.weights[zero].sum()) * r_N
    excess = zero_mass - (r_N - 1.0)
    if excess < -1e-9:
        raise ValueError(
            f"measure lacks the zero mass required for r_N = {r_N}: "
            f"needs {(r_N - 1.0) / r_N:.6g}, has {zero_mass / r_N:.6g}"
        )
    loc = np.concatenate([[0.0], m.locations[~zero]])
    w = np.concatenate([[max(excess, 0.0)], r_N * m.weights[~zero]])
    return DiscreteMeasure(loc, w / w.sum())


def _start_vector(m: int, dtype) -> np.ndarray:
    v = np.cos(np.arange(m) + 0.5)
    return v.astype(dtype, copy=False)


def top_two(obj, method: str = "auto") -> tuple[float, float]:
    """Two largest eigenvalues, descending.

    Accepts a SpectralDecomposition (read off) or a Hermitian matrix /
    LinearOperator.  Dense path uses a full symmetric solve; the iterative
    path is a two-eigenvalue Lanczos run with a fixed start vector.
    """
    if isinstance(obj, SpectralDecomposition):
        if obj.source_dimension < 2:
            raise ValueError("need at least a 2 x 2 spectrum")
        return float(obj.eigenvalues[0]), float(obj.eigenvalues[1])
    n = obj.shape[0]
    if n < 2:
        raise ValueError("need at least a 2 x 2 matrix")
    use_dense = method == "dense" or (method == "auto" and (n <= _DENSE_CUTOFF or n < 4))
    if use_dense and hasattr(obj, "__array__"):
        vals = np.linalg.eigvalsh(np.asarray(obj))
        return float(vals[-1]), float(vals[-2])
    try:
        vals = eigsh(
            obj,
            k=2,
            which="LA",
            v0=_start_vector(n, getattr(obj, "dtype", np.float64)),
            return_eigenvectors=False,
        )
    except Exception as exc:
        raise ConvergenceError(f"iterative top-2 eigensolve failed: {exc}") from exc
    vals = np.sort(vals)[::-1]
    return float(vals[0]), float(vals[1])


def largest_gram_eigenvalue(B: np.ndarray, divisor: float) -> float:
    """Largest eigenvalue of B B* / divisor via the top singular value of B."""
    m = min(B.shape)
    if m == 1:
        return float(np.linalg.norm(B) ** 2 / divisor)
    if m <= _DENSE_CUTOFF // 2:
        s = np.linalg.svd(B, compute_uv=False)[0]
        return float(s**2 / divisor)
    try:
        s = svds(B, k=1, v0=_start_vector(m, B.dtype), return_singular_vectors=False)
    except Exception as exc:
        raise ConvergenceError(f"iterative top singular value failed: {exc}") from exc
    return float(s[0] ** 2 / divisor)
