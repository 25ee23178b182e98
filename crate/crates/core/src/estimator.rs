//! Sample-average estimation of LDR coefficients.
//!
//! One LP couples the dispatch of every in-sample scenario through the shared
//! coefficient vector Θ: each scenario's end-of-stage storage must equal
//! `Ψ(ξ_{[t-τ:t],s}) · Θ[t,h]`. With `λ > 0` the objective adds the weighted
//! ℓ1 norm `λ Σ w_i |θ_i|` over non-intercept coefficients, linearized with
//! epigraph variables `φ_i ≥ |θ_i|`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::basis::{features, index_set, BasisConfig, CoefficientIndex, InflowWindow};
use crate::dispatch::{add_stage, Prev};
use crate::error::{Error, Result};
use crate::lp::{self, Backend, LpModel, Sense, VarId};
use crate::scenario::{standardize_stats, ScenarioSet, StandardizationStats};
use crate::stt::StageDecision;
use crate::system::HydroSystem;
use crate::util;
use crate::ZERO_TOL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdrPolicy {
    /// Coefficients in canonical [`index_set`] order.
    pub theta: Vec<f64>,
    pub stats: StandardizationStats,
    pub basis: BasisConfig,
    pub horizon: usize,
    pub n_hydros: usize,
    pub lambda: f64,
    /// In-sample operating cost, penalty excluded.
    pub in_sample_cost: f64,
}

impl LdrPolicy {
    pub fn index_set(&self) -> Vec<CoefficientIndex> {
        index_set(self.horizon, self.n_hydros, &self.basis)
    }

    /// Coefficients of block `(t, h)`.
    pub fn block(&self, t: usize, h: usize) -> &[f64] {
        let start = self.basis.block_offset(t, h, self.n_hydros);
        &self.theta[start..start + self.basis.block_len(self.n_hydros)]
    }

    /// Storage target `Ψ(window) · Θ[t,h]` for the window's last stage.
    pub fn target(&self, window: &InflowWindow, h: usize) -> Result<f64> {
        let t = window.stage;
        if t < 1 || t as usize > self.horizon {
            return Err(Error::StageOutOfRange {
                stage: t,
                horizon: self.horizon,
            });
        }
        let psi = features(window, &self.stats, h, &self.basis)?;
        Ok(psi.iter().zip(self.block(t as usize, h)).map(|(a, b)| a * b).sum())
    }

    /// Non-intercept coefficients with `|θ| > ZERO_TOL`.
    pub fn nonzero_count(&self) -> usize {
        self.index_set()
            .iter()
            .zip(&self.theta)
            .filter(|(c, v)| !c.is_intercept() && v.abs() > ZERO_TOL)
            .count()
    }

    pub fn n_penalized(&self) -> usize {
        self.theta.len() - self.horizon * self.n_hydros
    }

    /// Path of the metadata file stored next to a policy CSV.
    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Coefficient CSV `t,h,k,l,r,theta` with 1-based `t` and `h`.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        util::csv_bytes(Path::new("<policy>"), |w| {
            w.write_record(["t", "h", "k", "l", "r", "theta"])?;
            for (c, v) in self.index_set().iter().zip(&self.theta) {
                w.write_record([
                    c.t.to_string(),
                    (c.h + 1).to_string(),
                    c.k.to_string(),
                    c.l.to_string(),
                    c.r.to_string(),
                    v.to_string(),
                ])?;
            }
            Ok(())
        })
    }

    /// Writes the coefficient CSV and its JSON sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = PolicyMeta {
            lambda: self.lambda,
            in_sample_cost: self.in_sample_cost,
            horizon: self.horizon,
            n_hydros: self.n_hydros,
            basis: self.basis,
            stats: self.stats.clone(),
        };
        let json = serde_json::to_vec_pretty(&meta).expect("policy metadata serializes");
        util::atomic_write(&Self::sidecar_path(path), &json)?;
        util::atomic_write(path, &self.to_csv_bytes()?)
    }

    pub fn load(path: &Path) -> Result<LdrPolicy> {
        let side = Self::sidecar_path(path);
        let meta: PolicyMeta = serde_json::from_str(&util::read_to_string(&side)?)
            .map_err(|e| Error::parse(&side, e.to_string()))?;
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let theta = read_theta(file, path, &meta)?;
        Ok(LdrPolicy {
            theta,
            stats: meta.stats,
            basis: meta.basis,
            horizon: meta.horizon,
            n_hydros: meta.n_hydros,
            lambda: meta.lambda,
            in_sample_cost: meta.in_sample_cost,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyMeta {
    lambda: f64,
    in_sample_cost: f64,
    horizon: usize,
    n_hydros: usize,
    basis: BasisConfig,
    stats: StandardizationStats,
}

fn read_theta<R: std::io::Read>(reader: R, path: &Path, meta: &PolicyMeta) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        t: usize,
        h: usize,
        k: usize,
        l: usize,
        r: u8,
        theta: f64,
    }
    let expected = index_set(meta.horizon, meta.n_hydros, &meta.basis);
    let position: HashMap<CoefficientIndex, usize> = expected.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut theta = vec![f64::NAN; expected.len()];
    let mut seen = vec![false; expected.len()];
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::parse(path, util::csv_error_message(&e)))?;
    if header.iter().collect::<Vec<_>>() != ["t", "h", "k", "l", "r", "theta"] {
        return Err(Error::parse(path, "header must be t,h,k,l,r,theta"));
    }
    for rec in rdr.deserialize::<Row>() {
        let row = rec.map_err(|e| Error::parse(path, util::csv_error_message(&e)))?;
        if row.h == 0 {
            return Err(Error::parse(path, "reservoir numbers are 1-based"));
        }
        let idx = CoefficientIndex {
            t: row.t,
            h: row.h - 1,
            r: row.r,
            k: row.k,
            l: row.l,
        };
        let Some(&i) = position.get(&idx) else {
            return Err(Error::parse(path, format!("coefficient {idx} is not part of the declared basis")));
        };
        if seen[i] {
            return Err(Error::parse(path, format!("duplicate coefficient {idx}")));
        }
        if !row.theta.is_finite() {
            return Err(Error::parse(path, format!("coefficient {idx} is not finite")));
        }
        seen[i] = true;
        theta[i] = row.theta;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::parse(path, format!("missing coefficient {}", expected[i])));
    }
    Ok(theta)
}

/// Adaptive-LASSO weights for the non-intercept coefficients, in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdalassoWeights {
    pub w: Vec<f64>,
}

/// `w = 1/|θ0|`, or 1 where `|θ0| <= ZERO_TOL`; intercepts are skipped.
pub fn adalasso_weights(theta0: &LdrPolicy) -> AdalassoWeights {
    let w = theta0
        .index_set()
        .iter()
        .zip(&theta0.theta)
        .filter(|(c, _)| !c.is_intercept())
        .map(|(_, v)| if v.abs() > ZERO_TOL { 1.0 / v.abs() } else { 1.0 })
        .collect();
    AdalassoWeights { w }
}

/// Estimation output with the diagnostics needed for reporting and checks.
#[derive(Debug, Clone)]
pub struct Estimation {
    pub policy: LdrPolicy,
    /// LP objective, penalty included.
    pub objective: f64,
    /// `Σ w|θ|` over penalized coefficients, not multiplied by λ.
    pub weighted_l1: f64,
    /// Epigraph values `φ`, aligned with the weights; empty when λ = 0.
    pub phi: Vec<f64>,
    /// Discounted operating cost per in-sample scenario.
    pub scenario_costs: Vec<f64>,
    /// `[scenario][stage]` dispatch of the in-sample scenarios.
    pub decisions: Vec<Vec<StageDecision>>,
    pub solve_seconds: f64,
    pub n_vars: usize,
    pub n_rows: usize,
}

impl Estimation {
    /// One JSON line for the estimation log.
    pub fn log_record(&self) -> serde_json::Value {
        serde_json::json!({
            "lambda": self.policy.lambda,
            "solve_seconds": self.solve_seconds,
            "objective": self.objective,
            "operational_cost": self.policy.in_sample_cost,
            "penalty": self.policy.lambda * self.weighted_l1,
            "nonzero_count": self.policy.nonzero_count(),
            "n_penalized": self.policy.n_penalized(),
        })
    }
}

fn check_inputs(
    system: &HydroSystem,
    scenarios: &ScenarioSet,
    basis: &BasisConfig,
    lambda: f64,
    weights: Option<&AdalassoWeights>,
) -> Result<()> {
    system.validate()?;
    basis.validate()?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if scenarios.n_reservoirs() != system.n_hydros() {
        return Err(Error::InvalidInput(format!(
            "scenarios cover {} reservoirs, the system has {}",
            scenarios.n_reservoirs(),
            system.n_hydros()
        )));
    }
    if scenarios.horizon() != system.horizon {
        return Err(Error::InvalidInput(format!(
            "scenarios cover {} stages, the horizon is {}",
            scenarios.horizon(),
            system.horizon
        )));
    }
    if scenarios.history_len() < basis.max_lag {
        return Err(Error::InvalidInput(format!(
            "max_lag {} needs that many history stages, scenarios provide {}",
            basis.max_lag,
            scenarios.history_len()
        )));
    }
    if scenarios.exogenous_columns() != basis.exogenous_columns {
        return Err(Error::InvalidInput(format!(
            "basis expects {} exogenous columns, scenarios provide {}",
            basis.exogenous_columns,
            scenarios.exogenous_columns()
        )));
    }
    let n_pen = basis.n_coefficients(system.horizon, system.n_hydros()) - system.horizon * system.n_hydros();
    match weights {
        None if lambda > 0.0 => Err(Error::InvalidInput("lambda > 0 requires adaptive weights".into())),
        Some(w) if w.w.len() != n_pen => Err(Error::InvalidInput(format!(
            "{} weights for {n_pen} penalized coefficients",
            w.w.len()
        ))),
        Some(w) if w.w.iter().any(|x| !(x.is_finite() && *x > 0.0)) => {
            Err(Error::InvalidInput("weights must be finite and positive".into()))
        }
        _ => Ok(()),
    }
}

/// Estimates Θ with the backend chosen by `HYDRO_LDR_SOLVER`.
pub fn estimate(
    system: &HydroSystem,
    scenarios: &ScenarioSet,
    basis: &BasisConfig,
    lambda: f64,
    weights: Option<&AdalassoWeights>,
) -> Result<Estimation> {
    estimate_with(system, scenarios, basis, lambda, weights, Backend::from_env()?)
}

pub fn estimate_with(
    system: &HydroSystem,
    scenarios: &ScenarioSet,
    basis: &BasisConfig,
    lambda: f64,
    weights: Option<&AdalassoWeights>,
    backend: Backend,
) -> Result<Estimation> {
    check_inputs(system, scenarios, basis, lambda, weights)?;
    let stats = standardize_stats(scenarios);
    let n_h = system.n_hydros();
    let horizon = system.horizon;
    let n = scenarios.n_scenarios();
    let indices = index_set(horizon, n_h, basis);

    let mut model = LpModel::new();
    let theta: Vec<VarId> = indices
        .iter()
        .map(|c| {
            model.add_var(
                format!("theta_t{}_h{}_r{}_k{}_l{}", c.t, c.h + 1, c.r, c.k, c.l),
                f64::NEG_INFINITY,
                f64::INFINITY,
                0.0,
            )
        })
        .collect();
    let mut phi = Vec::new();
    if lambda > 0.0 {
        let w = &weights.expect("checked above").w;
        let mut wi = w.iter();
        for (c, &th) in indices.iter().zip(&theta) {
            if c.is_intercept() {
                continue;
            }
            let name = format!("t{}_h{}_r{}_k{}_l{}", c.t, c.h + 1, c.r, c.k, c.l);
            let p = model.add_var(format!("phi_{name}"), 0.0, f64::INFINITY, lambda * wi.next().unwrap());
            model.add_row(format!("epi_pos_{name}"), vec![(p, 1.0), (th, -1.0)], Sense::Ge, 0.0);
            model.add_row(format!("epi_neg_{name}"), vec![(p, 1.0), (th, 1.0)], Sense::Ge, 0.0);
            phi.push(p);
        }
    }

    let v0: Vec<f64> = system.hydros.iter().map(|h| h.v0).collect();
    let mut stages = Vec::with_capacity(n * horizon);
    let mut weights_t = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        weights_t.push(system.discount_factor(t)?);
    }
    for s in 0..n {
        let mut prev_vars: Option<Vec<VarId>> = None;
        for t in 1..=horizon {
            let tag = format!("s{}_t{}", s + 1, t);
            let prev = match &prev_vars {
                None => Prev::Fixed(&v0),
                Some(v) => Prev::Vars(v),
            };
            let inflow = scenarios.stage_inflows(s, t);
            let sv = add_stage(&mut model, system, t, &tag, prev, inflow, weights_t[t - 1] / n as f64);
            let window = InflowWindow::from_set(scenarios, s, t, basis.max_lag)?;
            for h in 0..n_h {
                let psi = features(&window, &stats, h, basis)?;
                let start = basis.block_offset(t, h, n_h);
                let mut coeffs = Vec::with_capacity(psi.len() + 1);
                coeffs.push((sv.v[h], 1.0));
                for (j, p) in psi.iter().enumerate() {
                    if *p != 0.0 {
                        coeffs.push((theta[start + j], -p));
                    }
                }
                model.add_row(format!("ldr_{tag}_{}", h + 1), coeffs, Sense::Eq, 0.0);
            }
            if t == horizon {
                for (h, hy) in system.hydros.iter().enumerate() {
                    model.add_row(format!("vf_s{}_{}", s + 1, h + 1), vec![(sv.v[h], 1.0)], Sense::Ge, hy.v_f);
                }
            }
            prev_vars = Some(sv.v.clone());
            stages.push(sv);
        }
    }

    log::info!(
        "estimation LP: lambda={lambda}, {} variables, {} rows, {} nonzeros",
        model.n_vars(),
        model.n_rows(),
        model.n_nonzeros()
    );
    let started = Instant::now();
    let sol = lp::solve_optimal(&model, backend, &format!("estimation LP (lambda = {lambda})"))?;
    let solve_seconds = started.elapsed().as_secs_f64();

    let theta_values: Vec<f64> = theta.iter().map(|&v| sol.value(v)).collect();
    let phi_values: Vec<f64> = phi.iter().map(|&v| sol.value(v)).collect();
    let weighted_l1 = match weights {
        Some(w) => indices
            .iter()
            .zip(&theta_values)
            .filter(|(c, _)| !c.is_intercept())
            .zip(&w.w)
            .map(|((_, th), w)| w * th.abs())
            .sum(),
        None => 0.0,
    };

    let mut scenario_costs = Vec::with_capacity(n);
    let mut decisions = Vec::with_capacity(n);
    for s in 0..n {
        let mut cost = 0.0;
        let mut path = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let sv = &stages[s * horizon + t - 1];
            // Row duals carry the scenario probability and discount factor.
            let scale = weights_t[t - 1] / n as f64;
            let d = StageDecision::from_solution(system, t, sv, &sol, scale);
            cost += weights_t[t - 1] * d.stage_cost;
            path.push(d);
        }
        scenario_costs.push(cost);
        decisions.push(path);
    }
    let in_sample_cost = crate::analytics::mean(&scenario_costs);

    Ok(Estimation {
        policy: LdrPolicy {
            theta: theta_values,
            stats,
            basis: *basis,
            horizon,
            n_hydros: n_h,
            lambda,
            in_sample_cost,
        },
        objective: sol.objective,
        weighted_l1,
        phi: phi_values,
        scenario_costs,
        decisions,
        solve_seconds,
        n_vars: model.n_vars(),
        n_rows: model.n_rows(),
    })
}
