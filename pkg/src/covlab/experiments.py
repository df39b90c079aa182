"""Monte-Carlo harness for the convergence and fluctuation experiments.

Replicates are independent tasks keyed by (seed, replicate_index); every
number that reaches an output file is computed under a single BLAS thread so
that worker count and scheduling cannot change a single bit.  Gathering is
by replicate order, never by completion order.
"""
from __future__ import annotations

import io
import json
import logging
import math
import multiprocessing
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh
from scipy.special import ndtr
from threadpoolctl import threadpool_limits

from . import splm
from .errors import ConfigError, ConvergenceError
from .mp import beta_centering, sigma_squared
from .population import PopulationModel, build_population, decompose
from .sampling import EntryLaw, FluctuationRecord, SampleConfig, draw_entries
from .spectra import largest_gram_eigenvalue, _start_vector

__version__ = "0.1.0"

logger = logging.getLogger("covlab")


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass
class ExperimentConfig:
    population: dict
    law: EntryLaw
    N_ladder: list
    n_numerator: int = 5
    n_denominator: int = 4
    n_explicit: int | None = None
    replicates: int = 1
    seed: int = 0
    diagonalize_population: bool = False
    out_dir: Path | None = None
    workers: int = 1
    dump_matrices: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.N_ladder or any(int(N) < 2 for N in self.N_ladder):
            raise ConfigError("every ladder dimension must be >= 2")
        self.N_ladder = [int(N) for N in self.N_ladder]
        if self.n_explicit is None and (self.n_numerator < 1 or self.n_denominator < 1):
            raise ConfigError("column rule needs positive numerator and denominator")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.dump_matrices and self.law.is_complex:
            raise ConfigError("matrix dumps support real entry laws only")

    def n_for(self, N: int) -> int:
        if self.n_explicit is not None:
            return int(self.n_explicit)
        return (self.n_numerator * N) // self.n_denominator


# =============================================================================
# REPLICATE WORKERS
# =============================================================================

@dataclass
class _ReplicateContext:
    """Read-only payload shared by all replicate tasks of one ladder step."""

    law: EntryLaw
    N: int
    n: int
    seed: int
    d_half: np.ndarray | None = None     # diagonal populations: sqrt eigenvalues
    gamma: np.ndarray | None = None      # dense populations: companion route
    dump_dir: Path | None = None


_CTX: _ReplicateContext | None = None


def _lambda_max_replicate(rep: int) -> float:
    ctx = _CTX
    with threadpool_limits(limits=1):
        cfg = SampleConfig(N=ctx.N, n=ctx.n, seed=ctx.seed, replicate_index=rep)
        Z = draw_entries(ctx.law, ctx.N, ctx.n, cfg)
        if ctx.dump_dir is not None:
            splm.write_matrix(ctx.dump_dir / f"Z_N{ctx.N}_rep{rep}.splm", Z)
        if ctx.d_half is not None:
            return largest_gram_eigenvalue(ctx.d_half[:, None] * Z, ctx.n)
        gamma, n = ctx.gamma, ctx.n
        dtype = complex if (np.iscomplexobj(gamma) or np.iscomplexobj(Z)) else float
        Zc = Z.conj().T if dtype is complex else Z.T
        op = LinearOperator(
            (n, n), matvec=lambda v: Zc @ (gamma @ (Z @ v)) / n, dtype=dtype
        )
        try:
            w = eigsh(op, k=1, which="LA", v0=_start_vector(n, dtype),
                      return_eigenvectors=False)
        except Exception as exc:
            raise ConvergenceError(f"sample eigensolve failed: {exc}") from exc
        return float(w[0].real)


def _run_replicates(ctx: _ReplicateContext, replicates: int, workers: int) -> list:
    global _CTX
    _CTX = ctx
    try:
        if workers <= 1:
            return [_lambda_max_replicate(r) for r in range(replicates)]
        mp_ctx = multiprocessing.get_context("fork")
        chunk = max(1, replicates // (workers * 4))
        with mp_ctx.Pool(processes=workers) as pool:
            return pool.map(_lambda_max_replicate, range(replicates), chunksize=chunk)
    finally:
        _CTX = None


def _population_for(cfg: ExperimentConfig, N: int) -> PopulationModel:
    try:
        model = PopulationModel.from_config(cfg.population, N=N)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid population config: {exc}") from exc
    if model.N != N:
        raise ConfigError(
            f"population of kind {model.kind!r} has fixed dimension {model.N}, "
            f"but the ladder asks for N = {N}"
        )
    return model


def _context_for(cfg: ExperimentConfig, N: int, need_spectrum: bool):
    """Build the shared replicate payload plus (lambda_1, eigenvalues or None)."""
    model = _population_for(cfg, N)
    n = cfg.n_for(N)
    if n < 1:
        raise ConfigError(f"column rule gives n = {n} at N = {N}")
    dump_dir = None
    if cfg.dump_matrices:
        dump_dir = Path(cfg.out_dir or ".") / "matrices"
        dump_dir.mkdir(parents=True, exist_ok=True)
    gamma = build_population(model)
    with threadpool_limits(limits=1):
        if need_spectrum or cfg.diagonalize_population:
            dec = decompose(gamma)
            eigs = dec.eigenvalues
            lam1 = dec.lambda_max
        else:
            eigs = None
            lam1 = _iterative_lambda_max(gamma)
    diagonal_kind = model.kind in ("diagonal", "spiked")
    if cfg.diagonalize_population or diagonal_kind:
        d_half = np.sqrt(eigs if eigs is not None else np.sort(np.diag(gamma))[::-1])
        ctx = _ReplicateContext(cfg.law, N, n, cfg.seed, d_half=d_half, dump_dir=dump_dir)
    else:
        ctx = _ReplicateContext(cfg.law, N, n, cfg.seed, gamma=gamma, dump_dir=dump_dir)
    return ctx, float(lam1), eigs, model


def _iterative_lambda_max(gamma: np.ndarray) -> float:
    N = gamma.shape[0]
    if N <= 400:
        return float(np.linalg.eigvalsh(gamma)[-1])
    try:
        w = eigsh(gamma, k=1, which="LA", v0=_start_vector(N, gamma.dtype),
                  return_eigenvectors=False)
    except Exception as exc:
        raise ConvergenceError(f"population eigensolve failed: {exc}") from exc
    return float(w[0].real)


# =============================================================================
# STATISTICS
# =============================================================================

def ks_to_normal(samples, sigma_sq: float) -> float:
    """Sup distance between the empirical CDF and a centered normal CDF."""
    if sigma_sq <= 0:
        raise ValueError("ks_to_normal needs a positive variance")
    x = np.sort(np.asarray(samples, dtype=float))
    m = len(x)
    if m < 2:
        raise ValueError("need at least two samples")
    cdf = ndtr(x / math.sqrt(sigma_sq))
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


def fluctuation_record(
    lambda_max_S: float, population_eigs, n: int, seed: int = 0, replicate_index: int = 0
) -> FluctuationRecord:
    """Assemble one replicate record of the scaled, centered ratio statistic."""
    eigs = np.asarray(population_eigs, dtype=float)
    beta = beta_centering(eigs, n)
    lam1 = float(np.max(eigs))
    f = math.sqrt(n) * (lambda_max_S / lam1 - 1.0 - beta)
    return FluctuationRecord(
        lambda_max=float(lambda_max_S),
        theta_N=1.0 + beta,
        beta_N=beta,
        F_N=f,
        seed=seed,
        replicate_index=replicate_index,
    )


@dataclass(frozen=True)
class HistogramSummary:
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    variance: float
    ks_to_normal: float | None
    replicates: int


def _histogram(values: np.ndarray, sigma_sq: float) -> HistogramSummary:
    edges = np.histogram_bin_edges(values, bins="fd")
    counts, _ = np.histogram(values, bins=edges)
    ks = ks_to_normal(values, sigma_sq) if sigma_sq > 0 and len(values) >= 2 else None
    return HistogramSummary(
        bin_edges=edges,
        counts=counts,
        mean=float(values.mean()),
        variance=float(values.var(ddof=1)) if len(values) > 1 else 0.0,
        ks_to_normal=ks,
        replicates=len(values),
    )


# =============================================================================
# OUTPUT
# =============================================================================

def _g17(x) -> str:
    return format(float(x), ".17g")


def _csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(str(c) if isinstance(c, (int, str)) else _g17(c) for c in row))
        buf.write("\n")
    return buf.getvalue()


def write_summary(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _base_summary(cfg: ExperimentConfig, command: str) -> dict:
    experiment = {
        "N_ladder": list(cfg.N_ladder),
        "n_numerator": cfg.n_numerator,
        "n_denominator": cfg.n_denominator,
        "replicates": cfg.replicates,
        "seed": cfg.seed,
        "diagonalize_population": cfg.diagonalize_population,
        "dump_matrices": cfg.dump_matrices,
    }
    if cfg.n_explicit is not None:
        experiment["n"] = cfg.n_explicit
    return {
        "command": command,
        "code_version": __version__,
        "seed": cfg.seed,
        "config": {
            "population": dict(cfg.population),
            "law": {"name": cfg.law.name},
            "experiment": experiment,
        },
    }


# =============================================================================
# EXPERIMENT DRIVERS
# =============================================================================

@dataclass
class ConvergenceResult:
    rows: list
    csv_text: str
    summary: dict

    def write(self, out_dir: Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "convergence.csv").write_text(self.csv_text)
        write_summary(out_dir / "summary.json", self.summary)


def run_convergence(cfg: ExperimentConfig) -> ConvergenceResult:
    """Ratio lambda_max(S_N) / lambda_max(Gamma_N) across the N ladder."""
    rows = []
    per_n = {}
    for N in cfg.N_ladder:
        ctx, lam1, _eigs, _model = _context_for(cfg, N, need_spectrum=False)
        logger.info("convergence: N=%d n=%d replicates=%d", N, ctx.n, cfg.replicates)
        lams = _run_replicates(ctx, cfg.replicates, cfg.workers)
        ratios = np.array([lam / lam1 for lam in lams])
        for rep, (lam, ratio) in enumerate(zip(lams, ratios)):
            rows.append((N, ctx.n, rep, lam, lam1, ratio))
        per_n[str(N)] = {
            "n": ctx.n,
            "lambda_max_gamma": lam1,
            "median_abs_dev": float(np.median(np.abs(ratios - 1.0))),
            "ratio_min": float(ratios.min()),
            "ratio_max": float(ratios.max()),
        }
    csv_text = _csv_text(
        ["N", "n", "replicate", "lambda_max_S", "lambda_max_gamma", "ratio"], rows
    )
    summary = _base_summary(cfg, "simulate-convergence")
    summary["per_N"] = per_n
    result = ConvergenceResult(rows, csv_text, summary)
    if cfg.out_dir is not None:
        result.write(cfg.out_dir)
    return result


@dataclass
class FluctuationResult:
    records: list
    histogram: HistogramSummary
    csv_text: str
    summary: dict
    warnings: list

    def write(self, out_dir: Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "fluctuations.csv").write_text(self.csv_text)
        write_summary(out_dir / "summary.json", self.summary)


def run_fluctuations(cfg: ExperimentConfig) -> FluctuationResult:
    """Replicated draws of the centered, sqrt(n)-scaled top-eigenvalue ratio."""
    if len(cfg.N_ladder) != 1:
        raise ConfigError("fluctuation runs use a single dimension N")
    N = cfg.N_ladder[0]
    ctx, lam1, eigs, model = _context_for(cfg, N, need_spectrum=True)
    n = ctx.n

    warnings = []
    gap = float(eigs[1] / lam1) if len(eigs) > 1 and lam1 > 0 else 0.0
    if gap >= 0.98:
        warnings.append(
            f"spectral gap ratio {gap:.4f} is not bounded away from 1; "
            "fluctuation asymptotics may not apply"
        )
    diagonal_structure = cfg.diagonalize_population or model.kind in ("diagonal", "spiked")
    gaussian_ok = cfg.law.name == "complex_gaussian" or (
        cfg.law.name == "real_gaussian" and not np.iscomplexobj(ctx.gamma)
    )
    if not (diagonal_structure or gaussian_ok):
        warnings.append(
            "population is neither diagonalized nor paired with Gaussian entries; "
            "recording observations without a distributional guarantee"
        )

    beta = beta_centering(eigs, n)
    sig2 = sigma_squared(cfg.law)
    logger.info("fluctuations: N=%d n=%d replicates=%d law=%s", N, n, cfg.replicates, cfg.law.name)
    lams = _run_replicates(ctx, cfg.replicates, cfg.workers)
    sqrt_n = math.sqrt(n)
    records = [
        FluctuationRecord(
            lambda_max=lam,
            theta_N=1.0 + beta,
            beta_N=beta,
            F_N=sqrt_n * (lam / lam1 - 1.0 - beta),
            seed=cfg.seed,
            replicate_index=rep,
        )
        for rep, lam in enumerate(lams)
    ]
    values = np.array([rec.F_N for rec in records])
    hist = _histogram(values, sig2)

    csv_text = _csv_text(
        ["replicate", "lambda_max_S", "beta_N", "F_N"],
        [(rec.replicate_index, rec.lambda_max, rec.beta_N, rec.F_N) for rec in records],
    )
    summary = _base_summary(cfg, "simulate-fluctuations")
    summary.update(
        {
            "N": N,
            "n": n,
            "lambda_max_gamma": lam1,
            "beta_N": beta,
            "theta_N": 1.0 + beta,
            "sigma_squared": sig2,
            "population_diagonalized": bool(cfg.diagonalize_population),
            "spectrum_order": "descending",
            "moments": {"mean": hist.mean, "variance": hist.variance},
            "histogram": {
                "bin_edges": [float(e) for e in hist.bin_edges],
                "counts": [int(c) for c in hist.counts],
            },
            "ks_to_normal": hist.ks_to_normal,
            "quantiles": {
                q: float(np.quantile(values, float(q)))
                for q in ("0.05", "0.25", "0.5", "0.75", "0.95")
            },
            "warnings": warnings,
        }
    )
    result = FluctuationResult(records, hist, csv_text, summary, warnings)
    if cfg.out_dir is not None:
        result.write(cfg.out_dir)
    return result
