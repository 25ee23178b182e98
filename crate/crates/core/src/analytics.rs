//! Cost, sparsity and spot-price metrics, and the λ sweep.
//!
//! Percentiles use the nearest-rank rule on the sorted sample (rank
//! `⌈p·n/100⌉`), so every reported percentile is an observed value.

use std::ops::RangeInclusive;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisConfig, EXOGENOUS};
use crate::error::{Error, Result};
use crate::estimator::{adalasso_weights, estimate_with, Estimation, LdrPolicy};
use crate::lp::Backend;
use crate::scenario::ScenarioSet;
use crate::stt::{simulate, SimulationResult, SttConfig};
use crate::system::HydroSystem;
use crate::ZERO_TOL;

/// Arithmetic mean computed from the sorted sample with compensated
/// summation, so the result does not depend on the input order.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for &x in &sorted {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    (sum + carry) / values.len() as f64
}

/// Nearest-rank percentile of an ascending sample, `pct` in `1..=100`.
fn nearest_rank(sorted: &[f64], pct: usize) -> f64 {
    let n = sorted.len();
    let rank = (pct * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostMetrics {
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
    /// `P95 - P5`.
    pub spread: f64,
}

pub fn cost_metrics(costs: &[f64]) -> Result<CostMetrics> {
    if costs.is_empty() {
        return Err(Error::InvalidInput("cost metrics need at least one value".into()));
    }
    let mut sorted = costs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let p5 = nearest_rank(&sorted, 5);
    let p95 = nearest_rank(&sorted, 95);
    Ok(CostMetrics {
        mean: mean(costs),
        p5,
        p95,
        spread: p95 - p5,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityMetrics {
    pub nonzero_count: usize,
    pub n_penalized: usize,
    /// Share of non-intercept coefficients with `|θ| > ZERO_TOL`.
    pub nonzero_fraction: f64,
    /// Nonzero inflow coefficients at lag `l`, as a share of all
    /// non-intercept coefficients.
    pub nonzero_by_lag: Vec<f64>,
    /// `1 - ‖θ‖₁ / ‖θ0‖₁` over non-intercept coefficients.
    pub l1_shrinkage: f64,
}

pub fn sparsity_metrics(policy: &LdrPolicy, theta0: &LdrPolicy) -> Result<SparsityMetrics> {
    if policy.basis != theta0.basis || policy.horizon != theta0.horizon || policy.n_hydros != theta0.n_hydros {
        return Err(Error::InvalidInput("policies do not share an index set".into()));
    }
    let idx = policy.index_set();
    let mut by_lag = vec![0usize; policy.basis.max_lag + 1];
    let (mut nonzero, mut total) = (0usize, 0usize);
    let (mut l1, mut l1_0) = (0.0, 0.0);
    for ((c, th), th0) in idx.iter().zip(&policy.theta).zip(&theta0.theta) {
        if c.is_intercept() {
            continue;
        }
        total += 1;
        l1 += th.abs();
        l1_0 += th0.abs();
        if th.abs() > ZERO_TOL {
            nonzero += 1;
            if c.r != EXOGENOUS {
                by_lag[c.l] += 1;
            }
        }
    }
    let frac = |k: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };
    Ok(SparsityMetrics {
        nonzero_count: nonzero,
        n_penalized: total,
        nonzero_fraction: frac(nonzero),
        nonzero_by_lag: by_lag.into_iter().map(frac).collect(),
        l1_shrinkage: if l1_0 == 0.0 { 0.0 } else { 1.0 - l1 / l1_0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotMetrics {
    /// Mean over scenarios of the window-average spot price.
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
    /// Mean over window stages of the across-scenario `P95 - P5`.
    pub avg_uncertainty: f64,
    /// Mean relative stage-to-stage change, averaged over scenarios.
    pub time_variability: f64,
    /// Ratio terms skipped because the previous price was zero.
    pub skipped_zero_prices: usize,
}

/// Spot statistics over stages `window` (1-based, inclusive) from per-scenario paths.
pub fn spot_metrics_from_paths(paths: &[Vec<f64>], window: RangeInclusive<usize>) -> Result<SpotMetrics> {
    let (lo, hi) = (*window.start(), *window.end());
    if paths.is_empty() {
        return Err(Error::InvalidInput("spot metrics need at least one scenario".into()));
    }
    let horizon = paths[0].len();
    if lo < 1 || hi < lo || hi > horizon {
        return Err(Error::InvalidInput(format!(
            "spot window {lo}..={hi} is not within 1..={horizon}"
        )));
    }
    let tw = hi - lo + 1;
    let m = paths.len() as f64;
    let averages: Vec<f64> = paths.iter().map(|p| mean(&p[lo - 1..hi])).collect();
    let summary = cost_metrics(&averages)?;
    let spreads: Vec<f64> = (lo..=hi)
        .map(|t| {
            let col: Vec<f64> = paths.iter().map(|p| p[t - 1]).collect();
            cost_metrics(&col).map(|c| c.spread)
        })
        .collect::<Result<_>>()?;
    let mut skipped = 0;
    let mut variability = 0.0;
    if tw > 1 {
        for p in paths {
            let mut sum = 0.0;
            for t in lo + 1..=hi {
                let prev = p[t - 2];
                if prev == 0.0 {
                    skipped += 1;
                    continue;
                }
                sum += (p[t - 1] - prev).abs() / prev;
            }
            variability += sum / m;
        }
        variability /= (tw - 1) as f64;
    }
    if skipped > 0 {
        log::warn!("time variability skipped {skipped} ratio terms with a zero previous price");
    }
    Ok(SpotMetrics {
        mean: summary.mean,
        p5: summary.p5,
        p95: summary.p95,
        avg_uncertainty: mean(&spreads),
        time_variability: variability,
        skipped_zero_prices: skipped,
    })
}

/// Spot statistics at `bus` over stages `window`.
pub fn spot_metrics(sim: &SimulationResult, window: RangeInclusive<usize>, bus: usize) -> Result<SpotMetrics> {
    if sim.decisions.iter().flatten().any(|d| bus >= d.spot.len()) {
        return Err(Error::InvalidInput(format!("bus {bus} has no spot prices")));
    }
    spot_metrics_from_paths(&sim.spot_paths(bus), window)
}

/// Default penalty grid `{0, 0.1, 1, …, 10^6}`.
pub fn default_grid() -> Vec<f64> {
    vec![0.0, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6]
}

/// Sorted, de-duplicated grid containing 0.
pub fn normalize_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("lambda grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidInput(format!("lambda grid value {bad} must be finite and >= 0")));
    }
    let mut g = grid.to_vec();
    g.push(0.0);
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub in_sample_cost: f64,
    pub z_m: f64,
    pub p5: f64,
    pub p95: f64,
    pub nonzero_fraction: f64,
    pub l1_shrinkage: f64,
    pub weighted_l1: f64,
    pub estimation_seconds: f64,
    pub simulation_seconds: f64,
    pub spot: Option<SpotMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Ascending in λ.
    pub rows: Vec<SweepRow>,
    pub selected_lambda: f64,
    /// `(z_M(0) - z_M(λ*)) / z_M(0)`.
    pub gain: f64,
}

/// Index of the least λ attaining the minimum `z_M`, and the gain over λ = 0.
///
/// `z_m` must be ordered by ascending λ with λ = 0 first.
pub fn select(z_m: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, z) in z_m.iter().enumerate() {
        if *z < z_m[best] {
            best = i;
        }
    }
    let z0 = z_m[0];
    let gain = if z0 == 0.0 { 0.0 } else { (z0 - z_m[best]) / z0 };
    (best, gain)
}

impl SweepReport {
    pub fn from_rows(rows: Vec<SweepRow>) -> SweepReport {
        let z: Vec<f64> = rows.iter().map(|r| r.z_m).collect();
        let (best, gain) = select(&z);
        SweepReport {
            selected_lambda: rows[best].lambda,
            gain,
            rows,
        }
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        crate::util::csv_bytes(std::path::Path::new("<sweep>"), |w| {
            w.write_record([
                "lambda",
                "in_sample_cost",
                "z_m",
                "p5",
                "p95",
                "nonzero_fraction",
                "l1_shrinkage",
                "weighted_l1",
                "selected",
            ])?;
            for r in &self.rows {
                w.write_record([
                    r.lambda.to_string(),
                    r.in_sample_cost.to_string(),
                    r.z_m.to_string(),
                    r.p5.to_string(),
                    r.p95.to_string(),
                    r.nonzero_fraction.to_string(),
                    r.l1_shrinkage.to_string(),
                    r.weighted_l1.to_string(),
                    (r.lambda == self.selected_lambda).to_string(),
                ])?;
            }
            Ok(())
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    pub stt: SttConfig,
    /// Spot-price window; `None` skips spot metrics.
    pub spot_window: Option<RangeInclusive<usize>>,
    pub backend: Backend,
    /// Worker threads for the per-λ stage; 0 uses the global pool.
    pub jobs: usize,
}

/// Everything a sweep produced, for writing run directories.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub report: SweepReport,
    pub policies: Vec<LdrPolicy>,
    /// Out-of-sample discounted cost per scenario, per λ.
    pub out_of_sample_costs: Vec<Vec<f64>>,
    pub estimations: Vec<EstimationSummary>,
}

/// Estimation facts kept after the LP is dropped.
#[derive(Debug, Clone)]
pub struct EstimationSummary {
    pub log_record: serde_json::Value,
    pub max_water_residual: f64,
    pub max_energy_residual: f64,
}

impl EstimationSummary {
    pub fn of(system: &HydroSystem, scenarios: &ScenarioSet, est: &Estimation) -> EstimationSummary {
        let (w, e) = estimation_residuals(system, scenarios, est);
        EstimationSummary {
            log_record: est.log_record(),
            max_water_residual: w,
            max_energy_residual: e,
        }
    }
}

/// Largest water and energy balance residuals of an estimation's dispatch.
pub fn estimation_residuals(system: &HydroSystem, scenarios: &ScenarioSet, est: &Estimation) -> (f64, f64) {
    let v0: Vec<f64> = system.hydros.iter().map(|h| h.v0).collect();
    let (mut w, mut e) = (0.0_f64, 0.0_f64);
    for (s, path) in est.decisions.iter().enumerate() {
        let mut prev = v0.clone();
        for d in path {
            w = w.max(d.water_residual(system, &prev, scenarios.stage_inflows(s, d.t)));
            e = e.max(d.energy_residual(system));
            prev.clone_from(&d.v);
        }
    }
    (w, e)
}

/// Estimates Θ(0), derives weights, estimates and simulates every λ in the
/// grid, and selects the least λ with the lowest out-of-sample cost.
pub fn sweep(
    system: &HydroSystem,
    scenarios_in: &ScenarioSet,
    scenarios_out: &ScenarioSet,
    basis: &BasisConfig,
    config: &SweepConfig,
) -> Result<SweepRun> {
    let grid = normalize_grid(&config.grid)?;
    let run_one = |lambda: f64, weights: Option<&crate::estimator::AdalassoWeights>| -> Result<(SweepRow, LdrPolicy, Vec<f64>, EstimationSummary)> {
        let est = estimate_with(system, scenarios_in, basis, lambda, weights, config.backend)
            .map_err(|e| e.at(format!("lambda = {lambda}")))?;
        let summary = EstimationSummary::of(system, scenarios_in, &est);
        let started = Instant::now();
        let sim = simulate(system, &est.policy, scenarios_out, &config.stt)
            .map_err(|e| e.at(format!("lambda = {lambda}")))?;
        let simulation_seconds = started.elapsed().as_secs_f64();
        let costs = cost_metrics(&sim.scenario_costs)?;
        let spot = match &config.spot_window {
            Some(w) => Some(spot_metrics(&sim, w.clone(), 0)?),
            None => None,
        };
        let row = SweepRow {
            lambda,
            in_sample_cost: est.policy.in_sample_cost,
            z_m: sim.z_m,
            p5: costs.p5,
            p95: costs.p95,
            nonzero_fraction: 0.0,
            l1_shrinkage: 0.0,
            weighted_l1: est.weighted_l1,
            estimation_seconds: est.solve_seconds,
            simulation_seconds,
            spot,
        };
        Ok((row, est.policy, sim.scenario_costs, summary))
    };

    let (row0, policy0, costs0, summary0) = run_one(0.0, None)?;
    let weights = adalasso_weights(&policy0);
    let weighted_l1_0: f64 = policy0
        .index_set()
        .iter()
        .zip(&policy0.theta)
        .filter(|(c, _)| !c.is_intercept())
        .zip(&weights.w)
        .map(|((_, th), w)| w * th.abs())
        .sum();

    let rest: Vec<f64> = grid[1..].to_vec();
    let compute = || -> Result<Vec<_>> {
        use rayon::prelude::*;
        rest.par_iter().map(|&l| run_one(l, Some(&weights))).collect()
    };
    let others = if config.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot start {} worker threads: {e}", config.jobs)))?;
        pool.install(compute)?
    } else {
        compute()?
    };

    let mut rows = Vec::with_capacity(grid.len());
    let mut policies = Vec::with_capacity(grid.len());
    let mut out_costs = Vec::with_capacity(grid.len());
    let mut summaries = Vec::with_capacity(grid.len());
    let mut row0 = row0;
    row0.weighted_l1 = weighted_l1_0;
    for (row, policy, costs, summary) in std::iter::once((row0, policy0.clone(), costs0, summary0)).chain(others) {
        let sp = sparsity_metrics(&policy, &policy0)?;
        rows.push(SweepRow {
            nonzero_fraction: sp.nonzero_fraction,
            l1_shrinkage: sp.l1_shrinkage,
            ..row
        });
        policies.push(policy);
        out_costs.push(costs);
        summaries.push(summary);
    }
    Ok(SweepRun {
        report: SweepReport::from_rows(rows),
        policies,
        out_of_sample_costs: out_costs,
        estimations: summaries,
    })
}
