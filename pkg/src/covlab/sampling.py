"""Random ingredients: entry matrices, sample covariances and companions.

Entry streams are counter-based (Philox) and keyed by (seed, replicate, row),
one stream per matrix row.  Two consequences the rest of the package relies
on:

* determinism - a (seed, replicate_index) pair fully determines the matrix,
  independent of worker count or call order;
* the subarray property - for a fixed seed and replicate, the (N, n) output
  is the top-left block of the (N', n') output whenever N' >= N, n' >= n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .population import SpectralDecomposition

_MASK64 = (1 << 64) - 1
_MAX_INDEX = 1 << 32


@dataclass(frozen=True)
class EntryLaw:
    """An entry distribution with mean 0, variance 1 and finite fourth moment."""

    name: str
    fourth_moment: float
    is_complex: bool

    @classmethod
    def from_name(cls, name: str) -> "EntryLaw":
        try:
            return LAWS[name]
        except KeyError:
            raise ValueError(f"unknown entry law {name!r}; known: {sorted(LAWS)}") from None


LAWS = {
    "real_gaussian": EntryLaw("real_gaussian", 3.0, False),
    "complex_gaussian": EntryLaw("complex_gaussian", 2.0, True),
    "std_exponential": EntryLaw("std_exponential", 9.0, False),
    "symmetric_bernoulli": EntryLaw("symmetric_bernoulli", 1.0, False),
}


@dataclass(frozen=True)
class SampleConfig:
    """Shape and stream identity of one sampled matrix.

    Either ``n`` or ``ratio`` fixes the column count: explicit n wins,
    otherwise n = floor(N / ratio).
    """

    N: int
    n: int | None = None
    ratio: float | None = None
    seed: int = 0
    replicate_index: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.n is None and self.ratio is None:
            raise ValueError("need n or ratio")
        if self.n is not None and self.n < 1:
            raise ValueError("n must be >= 1")
        if self.ratio is not None and self.ratio <= 0:
            raise ValueError("ratio must be positive")
        if not 0 <= self.replicate_index < _MAX_INDEX:
            raise ValueError("replicate_index out of range")

    @property
    def columns(self) -> int:
        return self.n if self.n is not None else int(self.N / self.ratio)

    @property
    def r_N(self) -> float:
        return self.N / self.columns


@dataclass(frozen=True)
class FluctuationRecord:
    """One Monte-Carlo replicate of the scaled top-eigenvalue statistic."""

    lambda_max: float
    theta_N: float
    beta_N: float
    F_N: float
    seed: int
    replicate_index: int


def _row_generator(seed: int, replicate: int, row: int) -> np.random.Generator:
    key = np.array(
        [seed & _MASK64, ((replicate << 32) | row) & _MASK64], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


def draw_entries(law: EntryLaw, N: int, n: int, cfg: SampleConfig) -> np.ndarray:
    """Draw an N x n matrix of i.i.d. entries under ``law``.

    Standardizations: real_gaussian ~ N(0,1); complex_gaussian = (U+iV) with
    U, V ~ N(0, 1/2) independent; std_exponential = Exp(1) - 1;
    symmetric_bernoulli uniform on {-1, +1}.
    """
    if N < 1 or n < 1:
        raise ValueError("matrix dimensions must be positive")
    if N > _MAX_INDEX:
        raise ValueError("row index space exhausted")
    out = np.empty((N, n), dtype=complex if law.is_complex else float)
    for i in range(N):
        g = _row_generator(cfg.seed, cfg.replicate_index, i)
        if law.name == "real_gaussian":
            out[i] = g.standard_normal(n)
        elif law.name == "complex_gaussian":
            a = g.standard_normal((n, 2))
            out[i] = (a[:, 0] + 1j * a[:, 1]) * math.sqrt(0.5)
        elif law.name == "std_exponential":
            out[i] = g.standard_exponential(n) - 1.0
        elif law.name == "symmetric_bernoulli":
            out[i] = np.where(g.random(n) < 0.5, -1.0, 1.0)
        else:
            raise ValueError(f"unknown entry law {law.name!r}")
    return out


def _hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2.0


def sample_covariance(gamma_half: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """(1/n) * G^(1/2) Z Z* G^(1/2), symmetrized before any eigensolve."""
    if gamma_half.shape[0] != gamma_half.shape[1]:
        raise ValueError("gamma_half must be square")
    if gamma_half.shape[1] != Z.shape[0]:
        raise ValueError(
            f"dimension mismatch: gamma_half {gamma_half.shape}, Z {Z.shape}"
        )
    b = gamma_half @ Z
    return _hermitize(b @ b.conj().T / Z.shape[1])


def companion(gamma: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """The n x n companion (1/n) Z* G Z; shares all nonzero eigenvalues with
    the sample covariance built from the same inputs."""
    if gamma.shape[0] != gamma.shape[1]:
        raise ValueError("gamma must be square")
    if gamma.shape[1] != Z.shape[0]:
        raise ValueError(f"dimension mismatch: gamma {gamma.shape}, Z {Z.shape}")
    return _hermitize(Z.conj().T @ (gamma @ Z) / Z.shape[1])


def gaussian_process_matrix(
    T: SpectralDecomposition, n: int, law: EntryLaw, cfg: SampleConfig
) -> np.ndarray:
    """N x n matrix whose columns are i.i.d. N(0, T) Gaussian vectors.

    Exact construction X = T^(1/2) Z, valid also for singular T.  Only
    Gaussian laws admit this representation, so anything else is rejected.
    """
    if law.name not in ("real_gaussian", "complex_gaussian"):
        raise ValueError(
            f"process representation requires a Gaussian law, got {law.name!r}"
        )
    Z = draw_entries(law, T.source_dimension, n, cfg)
    return T.psd_sqrt @ Z
