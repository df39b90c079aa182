"""covlab: largest-eigenvalue laboratory for sample covariance matrices
whose population spectral norm diverges.

Deterministic objects (boundary curves, centering constants, Toeplitz
operator limits) live in :mod:`covlab.mp` and :mod:`covlab.kernel`; random
objects in :mod:`covlab.sampling`; the Monte-Carlo harness in
:mod:`covlab.experiments`.
"""

from .errors import ConfigError, ConvergenceError, GapConditionError
from .population import (
    AutocovarianceSpec,
    PopulationModel,
    SlowlyVarying,
    SpectralDecomposition,
    autocovariance,
    build_population,
    decompose,
    phase_conjugate,
    spectral_gap_ratio,
)
from .sampling import (
    LAWS,
    EntryLaw,
    FluctuationRecord,
    SampleConfig,
    companion,
    draw_entries,
    gaussian_process_matrix,
    sample_covariance,
)
from .spectra import DiscreteMeasure, companion_esd, esd, top_two
from .mp import (
    FixedPointSolution,
    MPParams,
    SupportQuery,
    beta_centering,
    boundary_scan,
    mp_atom,
    mp_density,
    sigma_squared,
    solve_fixed_point,
    support_complement,
    theta_centering,
    upper_support_edge,
    x_of_y,
)
from .kernel import (
    KernelEigenEstimate,
    KernelSpec,
    gap_ratio_estimate,
    nystrom_limit_eigs,
    nystrom_limit_matrix,
    operator_distance_bound,
    operator_norm_bound,
    widom_shampine_eigs,
)
from .experiments import (
    ExperimentConfig,
    HistogramSummary,
    fluctuation_record,
    ks_to_normal,
    run_convergence,
    run_fluctuations,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
