//! Regularized linear decision rules for multistage stochastic hydrothermal
//! dispatch.
//!
//! The crate estimates storage-target policies of the form
//! `v[t,h] = Ψ(ξ[t-τ..=t]) · Θ[t,h]` from a sample of inflow scenarios, with an
//! optional adaptive-LASSO penalty on the non-intercept coefficients, and
//! evaluates them out of sample by rolling a single-stage state-target tracking
//! LP forward through each scenario.
//!
//! Module map:
//!
//! - [`system`]: plants, cascade topology, discounting, system file parsing.
//! - [`scenario`]: synthetic inflow scenarios, CSV exchange, standardization.
//! - [`basis`]: polynomial feature vectors and the coefficient index set.
//! - [`lp`]: solver-neutral LP models with a built-in simplex and a HiGHS adapter.
//! - [`estimator`]: the sample-average estimation LP and policy files.
//! - [`stt`]: state-target tracking simulation.
//! - [`analytics`]: cost, sparsity and spot-price metrics plus the λ sweep.
//! - [`fixtures`]: bundled case-study data.
//! - [`run`]: run configuration and the command implementations behind the CLI.

pub mod analytics;
pub mod basis;
mod dispatch;
pub mod error;
pub mod estimator;
pub mod fixtures;
pub mod lp;
pub mod run;
pub mod scenario;
pub mod stt;
pub mod system;
mod util;

pub use analytics::{
    cost_metrics, sparsity_metrics, spot_metrics, sweep, CostMetrics, SparsityMetrics,
    SpotMetrics, SweepReport, SweepRow,
};
pub use basis::{features, index_set, BasisConfig, CoefficientIndex, InflowWindow};
pub use error::{Error, Result};
pub use estimator::{adalasso_weights, estimate, AdalassoWeights, Estimation, LdrPolicy};
pub use scenario::{ScenarioSet, ScenarioSpec, StandardizationStats};
pub use stt::{simulate, stt_step, SimulationResult, StageDecision, SttConfig};
pub use system::{HydroSystem, Hydro, Thermal, Violation};

/// Absolute threshold below which a coefficient counts as zero.
///
/// Features are standardized, so coefficients live on an O(1) scale and an
/// absolute threshold is meaningful.
pub const ZERO_TOL: f64 = 1e-6;

/// Absolute feasibility tolerance inherited by every residual check.
pub const FEAS_TOL: f64 = 1e-6;
