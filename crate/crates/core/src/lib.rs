//! Simulation and verification engine for functionally generated trading
//! strategies over market-weight paths on the unit simplex.
//!
//! The crate is organized around five layers:
//!
//! - [`path_core`] — grid-agnostic pathwise calculus: left Riemann integrals,
//!   discrete brackets, total variation, Tanaka local times, ranking with
//!   ties, absorption scans, and the ranked-decomposition residual.
//! - [`market_models`] — reproducible path generation (geometric Brownian
//!   capitalizations, a two-asset weight martingale, a rank-drift model, an
//!   absorbed Brownian pair) plus the deterministic oscillator fixture.
//! - [`generators`] — generating functions `G` with derivative maps `DG` and
//!   their finite-variation processes Γ, by definition and in closed form.
//! - [`strategies`] — self-financing conversion of integrands, additive and
//!   multiplicative generation, portfolio weights, numéraire checks.
//! - [`diagnostics`] — outperformance certification, the shift-constant
//!   search, supermartingale Monte Carlo tests, Γ-uniqueness probes, and the
//!   variation divergence report.

// negated comparisons reject NaN parameters, which `<=` would wave through;
// index loops walk several parallel per-time arrays at once
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod generators;
pub mod market_models;
pub mod path_core;
pub mod strategies;

pub use error::{CoreError, Result};
pub use generators::{
    custom_concave, gamma_analytic, gamma_by_definition, gamma_with_gradient, normalize,
    GammaMethod, GammaSeries, Generator,
};
pub use market_models::{
    oscillation_count, oscillator_path, simulate, simulate_ensemble, to_market_weights,
    ModelSpec, SimConfig,
};
pub use path_core::{
    absorption_times, collision_local_time, left_riemann_integral, left_riemann_scalar,
    local_time, quadratic_covariation, rank_point, rank_with_ties,
    ranked_decomposition_residual, total_variation, AbsorptionTimes, LocalTimeDescriptor,
    LocalTimeSeries, MarketPath, RankedView, TimeGrid,
};
pub use strategies::{
    additive_generate, defect_q, make_self_financing, multiplicative_generate,
    numeraire_invariance_check, portfolio_weights, AdditiveStrategy, MultiplicativeStrategy,
    NumeraireReport, PortfolioWeights, StrategyMode, StrategySeries,
};
pub use diagnostics::{
    check_additive_outperformance, check_multiplicative_outperformance, covariation_gamma_probe,
    find_shift_c, gamma_uniqueness_check, horizon_bound, shift_bound, supermartingale_mc_test,
    variation_divergence_report, OscillatorRow, OutperformanceReport, PathOutperformance,
    SqrtQvRefinement, SupermartingaleReport, VariationReport,
};
