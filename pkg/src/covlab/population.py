"""Population covariance models and their spectral decompositions.

Supported model kinds:

* ``explicit``  - a user-supplied Hermitian PSD matrix,
* ``diagonal``  - eigenvalues placed on the diagonal,
* ``toeplitz``  - autocovariance matrix of a stationary long-memory
  process, entry (i, j) = gamma(i - j) with
  gamma(h) = L(h) / (1 + |h|)^(1 - 2d) * exp(i*h*theta),
* ``spiked``    - a few large "spike" eigenvalues on top of a constant bulk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import toeplitz as _toeplitz

from .errors import ConvergenceError
from . import splm

_HERMITIAN_ATOL = 1e-12
_PSD_CLAMP_REL = 1e-9


@dataclass(frozen=True)
class SlowlyVarying:
    """Slowly varying factor L(h) from a closed, serializable enumeration.

    ``constant``  : L(h) = param (param > 0)
    ``log_power`` : L(h) = log(2 + |h|) ** param
    """

    family: str = "constant"
    param: float = 1.0

    def __post_init__(self):
        if self.family not in ("constant", "log_power"):
            raise ValueError(f"unknown slowly varying family {self.family!r}")
        if self.family == "constant" and self.param <= 0:
            raise ValueError("constant family needs a positive value")

    def __call__(self, h):
        a = np.abs(np.asarray(h, dtype=float))
        if self.family == "constant":
            return np.full_like(a, self.param) if a.ndim else float(self.param)
        out = np.log(2.0 + a) ** self.param
        return out if a.ndim else float(out)

    def encode(self) -> str:
        if self.family == "constant" and self.param == 1.0:
            return "constant"
        return f"{self.family}:{self.param:g}"

    @classmethod
    def decode(cls, text: str) -> "SlowlyVarying":
        name, _, raw = text.partition(":")
        return cls(name, float(raw)) if raw else cls(name)


@dataclass(frozen=True)
class AutocovarianceSpec:
    """Long-memory autocovariance gamma(h) = L(h)/(1+|h|)^(1-2d) * e^(i h theta).

    ``d`` is the memory exponent, restricted to (0, 1/2) so that the sequence
    is regularly varying with index rho = 2d - 1 in (-1, 0) and not summable.
    ``theta`` modulates the phase; theta = 0 gives a real even sequence.
    """

    d: float
    slowly_varying: SlowlyVarying = field(default_factory=SlowlyVarying)
    theta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.d < 0.5:
            raise ValueError(f"memory exponent d must be in (0, 1/2), got {self.d}")
        if not -math.pi < self.theta <= math.pi:
            raise ValueError(f"theta must be in (-pi, pi], got {self.theta}")

    @property
    def rho(self) -> float:
        """Regular variation index of the sequence, 2d - 1."""
        return 2.0 * self.d - 1.0

    @property
    def is_complex(self) -> bool:
        return self.theta != 0.0

    def gamma(self, h):
        """Autocovariance at integer lag(s) h; complex iff theta != 0."""
        harr = np.asarray(h)
        base = self.slowly_varying(harr) / (1.0 + np.abs(harr)) ** (1.0 - 2.0 * self.d)
        if self.theta == 0.0:
            return base
        return base * np.exp(1j * self.theta * np.asarray(harr, dtype=float))


def autocovariance(spec: AutocovarianceSpec, h):
    """Evaluate the autocovariance of ``spec`` at lag ``h`` (any integer)."""
    return spec.gamma(h)


@dataclass(frozen=True)
class PopulationModel:
    """Serializable description of one population covariance matrix."""

    kind: str
    N: int
    matrix: np.ndarray | None = None
    eigenvalues: tuple | None = None
    autocov: AutocovarianceSpec | None = None
    spikes: tuple | None = None
    bulk: float | None = None

    @classmethod
    def explicit(cls, matrix) -> "PopulationModel":
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"explicit model needs a square matrix, got {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m))) if m.size else 0.0)
        if not np.allclose(m, m.conj().T, atol=_HERMITIAN_ATOL * scale, rtol=0.0):
            raise ValueError("explicit population matrix is not Hermitian")
        return cls(kind="explicit", N=m.shape[0], matrix=m)

    @classmethod
    def diagonal(cls, eigenvalues) -> "PopulationModel":
        vals = tuple(float(v) for v in eigenvalues)
        if any(v < 0 for v in vals):
            raise ValueError("diagonal population has a negative entry")
        return cls(kind="diagonal", N=len(vals), eigenvalues=vals)

    @classmethod
    def toeplitz(cls, autocov: AutocovarianceSpec, N: int) -> "PopulationModel":
        if N < 1:
            raise ValueError("dimension must be positive")
        return cls(kind="toeplitz", N=int(N), autocov=autocov)

    @classmethod
    def spiked(cls, spikes, bulk: float, N: int) -> "PopulationModel":
        sp = tuple(float(s) for s in spikes)
        if any(s < 0 for s in sp) or bulk < 0:
            raise ValueError("spiked population has a negative entry")
        if len(sp) > N:
            raise ValueError("more spikes than dimensions")
        return cls(kind="spiked", N=int(N), spikes=sp, bulk=float(bulk))

    def to_config(self) -> dict:
        cfg: dict = {"kind": self.kind, "N": self.N}
        if self.kind == "toeplitz":
            cfg["d"] = self.autocov.d
            cfg["slowly_varying"] = self.autocov.slowly_varying.encode()
            cfg["theta"] = self.autocov.theta
        elif self.kind == "spiked":
            cfg["spikes"] = list(self.spikes)
            cfg["bulk"] = self.bulk
        elif self.kind == "diagonal":
            cfg["eigenvalues"] = list(self.eigenvalues)
        return cfg

    @classmethod
    def from_config(cls, cfg: dict, N: int | None = None) -> "PopulationModel":
        kind = cfg.get("kind")
        if kind == "toeplitz":
            spec = AutocovarianceSpec(
                d=float(cfg["d"]),
                slowly_varying=SlowlyVarying.decode(cfg.get("slowly_varying", "constant")),
                theta=float(cfg.get("theta", 0.0)),
            )
            return cls.toeplitz(spec, int(N if N is not None else cfg["N"]))
        if kind == "spiked":
            return cls.spiked(cfg["spikes"], float(cfg.get("bulk", 1.0)),
                              int(N if N is not None else cfg["N"]))
        if kind == "diagonal":
            return cls.diagonal(cfg["eigenvalues"])
        if kind == "explicit":
            return cls.explicit(splm.read_matrix(cfg["matrix_path"]))
        raise ValueError(f"unknown population kind {kind!r}")


def build_population(model: PopulationModel) -> np.ndarray:
    """Materialize the N x N Hermitian matrix described by ``model``."""
    if model.kind == "explicit":
        return np.array(model.matrix)
    if model.kind == "diagonal":
        return np.diag(np.asarray(model.eigenvalues, dtype=float))
    if model.kind == "spiked":
        diag = np.full(model.N, model.bulk, dtype=float)
        diag[: len(model.spikes)] = model.spikes
        return np.diag(diag)
    if model.kind == "toeplitz":
        col = model.autocov.gamma(np.arange(model.N))
        if model.autocov.is_complex:
            return _toeplitz(col, col.conj())
        return _toeplitz(col)
    raise ValueError(f"unknown population kind {model.kind!r}")


@dataclass(eq=False)
class SpectralDecomposition:
    """Eigenvalues (descending) and aligned unitary eigenvectors of a PSD matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_dimension: int

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])

    @cached_property
    def psd_sqrt(self) -> np.ndarray:
        """Matrix square root U diag(sqrt(lambda)) U*, computed once and cached."""
        u = self.eigenvectors
        return (u * np.sqrt(self.eigenvalues)) @ u.conj().T

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def decompose(gamma) -> SpectralDecomposition:
    """Full symmetric eigendecomposition with PSD enforcement.

    Eigenvalues inside (-tol, 0) with tol = 1e-9 * lambda_max are clamped to
    zero; anything more negative means the input was not PSD and is rejected.
    """
    g = np.asarray(gamma)
    try:
        vals, vecs = np.linalg.eigh(g)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed on {g.shape} matrix: {exc}") from exc
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    lam_max = float(vals[0])
    tol = _PSD_CLAMP_REL * max(lam_max, 0.0)
    if vals[-1] < -tol:
        raise ValueError(
            f"matrix is not positive semidefinite: min eigenvalue {vals[-1]:.3e} "
            f"< -{tol:.3e}"
        )
    np.clip(vals, 0.0, None, out=vals)
    return SpectralDecomposition(vals, vecs, g.shape[0])


def spectral_gap_ratio(dec: SpectralDecomposition) -> float:
    """lambda_2 / lambda_1 of the population; < 1 means an isolated top eigenvalue."""
    if dec.source_dimension < 2:
        raise ValueError("gap ratio needs at least two eigenvalues")
    lam1 = dec.lambda_max
    if lam1 <= 0.0:
        raise ValueError("gap ratio undefined for lambda_max = 0")
    return float(dec.eigenvalues[1] / lam1)


def phase_conjugate(gamma, theta: float) -> np.ndarray:
    """Conjugate by the unitary diag(e^(i k theta)); the spectrum is unchanged.

    Entry-wise this multiplies gamma[i, j] by e^(i (i - j) theta), so theta = pi
    flips the sign of every odd diagonal while keeping the matrix real.
    """
    if not -math.pi < theta <= math.pi:
        raise ValueError(f"theta must be in (-pi, pi], got {theta}")
    g = np.asarray(gamma)
    if theta == 0.0:
        return g.copy()
    k = np.arange(1, g.shape[0] + 1)
    if theta == math.pi and not np.iscomplexobj(g):
        signs = np.where(k % 2 == 0, 1.0, -1.0)
        return g * np.outer(signs, signs)
    phases = np.exp(1j * theta * k)
    return g * np.outer(phases, phases.conj())
