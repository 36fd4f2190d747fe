"""Spectral estimation of the stochastic leverage effect.

High-frequency log prices go in; integrated leverage, integrated
variance, integrated vol-of-vol, and the normalized leverage ratio come
out, all through Fourier coefficients of the return measure and therefore
without any differentiation of the data.  The package also ships the
simulators, the cut-frequency tuning and control-variate machinery, a
Monte Carlo harness, and a tick-data pipeline; ``fourierlev --help``
exposes the same through a CLI.
"""

from .errors import (
    ConfigError,
    DataError,
    DegenerateValueError,
    FourierLevError,
    InvalidInputError,
)
from .estimators import (
    CutFrequencies,
    LeverageEstimate,
    RTEstimate,
    fel_corrected,
    fel_spectral,
    fel_triple_sum,
    fev,
    fev_grid,
    fevv,
    fevv_grid,
    leverage_grid,
    noise_bias_analytic,
    optimal_b,
    rt_estimate,
    upsilon,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    SimScenario,
    run_rt_tracking,
    run_sensitivity,
    run_table_experiment,
)
from .market_data import (
    DailySession,
    TickFile,
    acf,
    empirical_pipeline,
    load_sessions,
    sparse_realized_variance,
    summary_stats,
    write_sessions,
)
from .sde import (
    GenHestonParams,
    HestonParams,
    NoiseConfig,
    SimGrid,
    SimOutput,
    add_noise,
    noise_increment_moments,
    simulate_gen_heston,
    simulate_heston,
)
from .spectral import (
    SpectralCoefficients,
    TickSeries,
    dirichlet,
    dirichlet_derivative,
    integration_by_parts_check,
    return_coefficients,
    squared_return_coefficients,
    volatility_coefficients,
)
from .tuning import (
    GridSpec,
    TuningResult,
    consistency_schedule,
    corrected_from_matrices,
    corrected_procedure,
    default_m_grid,
    grid_search,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "DegenerateValueError",
    "FourierLevError",
    "InvalidInputError",
    "CutFrequencies",
    "LeverageEstimate",
    "RTEstimate",
    "fel_corrected",
    "fel_spectral",
    "fel_triple_sum",
    "fev",
    "fev_grid",
    "fevv",
    "fevv_grid",
    "leverage_grid",
    "noise_bias_analytic",
    "optimal_b",
    "rt_estimate",
    "upsilon",
    "ExperimentConfig",
    "ExperimentReport",
    "SimScenario",
    "run_rt_tracking",
    "run_sensitivity",
    "run_table_experiment",
    "DailySession",
    "TickFile",
    "acf",
    "empirical_pipeline",
    "load_sessions",
    "sparse_realized_variance",
    "summary_stats",
    "write_sessions",
    "GenHestonParams",
    "HestonParams",
    "NoiseConfig",
    "SimGrid",
    "SimOutput",
    "add_noise",
    "noise_increment_moments",
    "simulate_gen_heston",
    "simulate_heston",
    "SpectralCoefficients",
    "TickSeries",
    "dirichlet",
    "dirichlet_derivative",
    "integration_by_parts_check",
    "return_coefficients",
    "squared_return_coefficients",
    "volatility_coefficients",
    "GridSpec",
    "TuningResult",
    "consistency_schedule",
    "corrected_from_matrices",
    "corrected_procedure",
    "default_m_grid",
    "grid_search",
]
