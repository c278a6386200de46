"""Vintage-aware inflation forecasting with latent shock regression."""

from .backtest import (
    ALL_METHODOLOGIES,
    BacktestConfig,
    ForecastProfile,
    poison_after,
    realize,
    run_backtest,
)
from .benchmarks import BenchFit, bench_predict, fit_direct, fit_univariate
from .design import (
    LaggedDesign,
    WeightedMoments,
    build_lagged_design,
    exp_weights,
    weighted_moments,
)
from .evaluate import (
    EvalRecord,
    evaluate_profiles,
    f_test_mspe,
    mspe,
    outperform_share,
    predictor_effect,
    rank_table,
    summarize,
)
from .lsr import (
    LsrConfig,
    LsrFit,
    attach_latent_stats,
    estimate_rho,
    latent_series,
    lsr_fit,
    lsr_fit_ar,
    lsr_fit_ma,
    lsr_objective,
    lsr_predict,
)
from .optim import OptimResult, SimplexOptions, hannan_rissanen, nelder_mead
from .specgen import FactorSpec, FamilyRule, generate_specs
from .vintages import (
    CsvSchema,
    TransformSpec,
    VariableDef,
    VintageSeries,
    apply_transform,
    load_vintage_csv,
    load_vintage_store,
    variable_series,
)

__version__ = "0.1.0"
