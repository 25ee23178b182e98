//! Policy implementation by state-target tracking.
//!
//! At each stage the single-period dispatch LP receives the storage target
//! `Ψ(window) · Θ̂[t,h]` on the right-hand side of a tracking row
//! `v + e⁺ - e⁻ = target`, with deviations priced at `γ`. Scenarios are
//! rolled forward independently; deviations never enter reported costs.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::InflowWindow;
use crate::dispatch::{add_stage, Prev, StageVars};
use crate::error::{Error, Result};
use crate::estimator::LdrPolicy;
use crate::lp::{self, Backend, LpModel, LpSolution, LpStatus, Sense};
use crate::scenario::ScenarioSet;
use crate::system::HydroSystem;
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SttConfig {
    /// Deviation penalty per volume unit; `None` selects `10 · c_d · max ρ`.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_true")]
    pub apply_vf_at_t: bool,
    #[serde(default)]
    pub spill_penalty: f64,
    #[serde(skip)]
    pub backend: Backend,
}

fn default_true() -> bool {
    true
}

impl Default for SttConfig {
    fn default() -> Self {
        SttConfig {
            gamma: None,
            apply_vf_at_t: true,
            spill_penalty: 0.0,
            backend: Backend::Auto,
        }
    }
}

impl SttConfig {
    pub fn gamma_for(&self, system: &HydroSystem) -> f64 {
        self.gamma
            .unwrap_or(10.0 * system.deficit_cost * system.max_production_factor())
    }

    pub fn validate(&self, system: &HydroSystem) -> Result<()> {
        let gamma = self.gamma_for(system);
        let floor = system.deficit_cost * system.max_production_factor();
        if !(gamma.is_finite() && gamma > floor) {
            return Err(Error::InvalidInput(format!(
                "gamma {gamma} must exceed deficit_cost · max production factor = {floor}"
            )));
        }
        if !(self.spill_penalty.is_finite() && self.spill_penalty >= 0.0) {
            return Err(Error::InvalidInput("spill_penalty must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// One stage's implemented dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDecision {
    pub t: usize,
    pub g: Vec<f64>,
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub f: Vec<f64>,
    /// Load shed per bus.
    pub delta: Vec<f64>,
    pub v: Vec<f64>,
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
    /// Energy-balance dual per bus, undiscounted.
    pub spot: Vec<f64>,
    /// `c'g + c_d δ`, undiscounted.
    pub stage_cost: f64,
    /// Storage shortfall below `v_f` accepted at the last stage when the hard
    /// bound was unreachable; zero otherwise.
    pub vf_shortfall: Vec<f64>,
}

impl StageDecision {
    /// Reads the stage block out of a solved LP whose operating costs and row
    /// duals are scaled by `scale`.
    pub(crate) fn from_solution(system: &HydroSystem, t: usize, sv: &StageVars, sol: &LpSolution, scale: f64) -> StageDecision {
        let read = |ids: &[lp::VarId]| ids.iter().map(|&v| sol.value(v)).collect::<Vec<f64>>();
        let g = read(&sv.g);
        let delta = read(&sv.delta);
        let stage_cost = operating_cost(system, &g, &delta);
        StageDecision {
            t,
            u: read(&sv.u),
            s: read(&sv.s),
            f: read(&sv.f),
            v: read(&sv.v),
            e_plus: vec![0.0; system.n_hydros()],
            e_minus: vec![0.0; system.n_hydros()],
            spot: sv.eb.iter().map(|&r| sol.dual(r) / scale).collect(),
            stage_cost,
            vf_shortfall: vec![0.0; system.n_hydros()],
            g,
            delta,
        }
    }

    /// `max_h |v - v_prev + M(u + s) - ξ|`.
    pub fn water_residual(&self, system: &HydroSystem, v_prev: &[f64], inflow: &[f64]) -> f64 {
        (0..system.n_hydros())
            .map(|h| {
                let mut lhs = self.v[h] - v_prev[h] + self.u[h] + self.s[h];
                for up in system.upstream_of(h) {
                    lhs -= self.u[up] + self.s[up];
                }
                (lhs - inflow[h]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max_b |Tg + Hρu + Af + δ - d|`.
    pub fn energy_residual(&self, system: &HydroSystem) -> f64 {
        let mut supply = self.delta.clone();
        for (j, th) in system.thermals.iter().enumerate() {
            supply[th.bus] += self.g[j];
        }
        for (h, hy) in system.hydros.iter().enumerate() {
            supply[hy.bus] += hy.production_factor * self.u[h];
        }
        for (l, line) in system.lines().iter().enumerate() {
            supply[line.to] += self.f[l];
            supply[line.from] -= self.f[l];
        }
        supply
            .iter()
            .enumerate()
            .map(|(b, s)| (s - system.bus_demand(b, self.t)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest violation of variable bounds, including `v_f` at the horizon.
    pub fn bound_violation(&self, system: &HydroSystem) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, th) in system.thermals.iter().enumerate() {
            worst = worst.max(-self.g[j]).max(self.g[j] - th.capacity);
        }
        for (h, hy) in system.hydros.iter().enumerate() {
            worst = worst
                .max(hy.v_min - self.v[h])
                .max(self.v[h] - hy.v_max)
                .max(-self.u[h])
                .max(self.u[h] - hy.u_max)
                .max(-self.s[h]);
        }
        for d in &self.delta {
            worst = worst.max(-d);
        }
        worst
    }
}

fn operating_cost(system: &HydroSystem, g: &[f64], delta: &[f64]) -> f64 {
    let thermal: f64 = system.thermals.iter().zip(g).map(|(th, g)| th.variable_cost * g).sum();
    thermal + system.deficit_cost * delta.iter().sum::<f64>()
}

fn check_policy(system: &HydroSystem, policy: &LdrPolicy) -> Result<()> {
    if policy.n_hydros != system.n_hydros() || policy.horizon != system.horizon {
        return Err(Error::InvalidInput(format!(
            "policy was estimated for {} reservoirs over {} stages, the system has {} over {}",
            policy.n_hydros,
            policy.horizon,
            system.n_hydros(),
            system.horizon
        )));
    }
    Ok(())
}

/// Solves the tracking LP for stage `window.stage` from storage `v_prev`.
pub fn stt_step(
    system: &HydroSystem,
    policy: &LdrPolicy,
    v_prev: &[f64],
    window: &InflowWindow,
    config: &SttConfig,
) -> Result<StageDecision> {
    check_policy(system, policy)?;
    let t = window.stage;
    if t < 1 || t as usize > system.horizon {
        return Err(Error::StageOutOfRange {
            stage: t,
            horizon: system.horizon,
        });
    }
    let t = t as usize;
    if v_prev.len() != system.n_hydros() {
        return Err(Error::InvalidInput("v_prev length differs from the number of hydros".into()));
    }
    let targets = (0..system.n_hydros())
        .map(|h| policy.target(window, h))
        .collect::<Result<Vec<f64>>>()?;
    let inflow = &window.values[window.values.len() - window.n_reservoirs..];
    let gamma = config.gamma_for(system);
    let final_stage = t == system.horizon && config.apply_vf_at_t;

    let build = |soft_vf: bool| -> (LpModel, StageVars, Vec<(lp::VarId, lp::VarId)>, Vec<lp::VarId>) {
        let mut model = LpModel::new();
        let sv = add_stage(&mut model, system, t, "t", Prev::Fixed(v_prev), inflow, 1.0);
        let mut dev = Vec::with_capacity(system.n_hydros());
        let mut shortfall = Vec::new();
        for (h, hy) in system.hydros.iter().enumerate() {
            if config.spill_penalty > 0.0 {
                model.set_cost(sv.s[h], config.spill_penalty);
            }
            let ep = model.add_var(format!("eplus_{}", h + 1), 0.0, f64::INFINITY, gamma);
            let em = model.add_var(format!("eminus_{}", h + 1), 0.0, f64::INFINITY, gamma);
            model.add_row(
                format!("track_{}", h + 1),
                vec![(sv.v[h], 1.0), (ep, 1.0), (em, -1.0)],
                Sense::Eq,
                targets[h],
            );
            dev.push((ep, em));
            if final_stage && hy.v_f > hy.v_min {
                if soft_vf {
                    // Priced above tracking so the final requirement wins over the target.
                    let sf = model.add_var(format!("vf_short_{}", h + 1), 0.0, f64::INFINITY, 10.0 * gamma);
                    model.add_row(format!("vf_{}", h + 1), vec![(sv.v[h], 1.0), (sf, 1.0)], Sense::Ge, hy.v_f);
                    shortfall.push(sf);
                } else {
                    model.set_bounds(sv.v[h], hy.v_f.min(hy.v_max), hy.v_max);
                }
            }
        }
        (model, sv, dev, shortfall)
    };

    let (model, sv, dev, _) = build(false);
    let mut sol = lp::solve_with(&model, config.backend)?;
    let mut parts = (sv, dev, Vec::new());
    if sol.status == LpStatus::Infeasible && final_stage {
        let (model, sv, dev, shortfall) = build(true);
        log::warn!("stage {t}: final storage bound unreachable, accepting a penalized shortfall");
        sol = lp::solve_optimal(&model, config.backend, &format!("tracking LP at stage {t}"))?;
        parts = (sv, dev, shortfall);
    } else if sol.status != LpStatus::Optimal {
        let rows = if sol.status == LpStatus::Infeasible {
            lp::infeasible_rows(&model, config.backend).unwrap_or_default()
        } else {
            Vec::new()
        };
        return Err(Error::Lp {
            context: format!("tracking LP at stage {t}"),
            status: sol.status,
            rows,
        });
    }
    let (sv, dev, shortfall) = parts;
    let mut d = StageDecision::from_solution(system, t, &sv, &sol, 1.0);
    d.e_plus = dev.iter().map(|(p, _)| sol.value(*p)).collect();
    d.e_minus = dev.iter().map(|(_, m)| sol.value(*m)).collect();
    if !shortfall.is_empty() {
        let mut it = shortfall.iter();
        for (h, hy) in system.hydros.iter().enumerate() {
            if hy.v_f > hy.v_min {
                d.vf_shortfall[h] = sol.value(*it.next().unwrap());
            }
        }
    }
    Ok(d)
}

/// Outcome of rolling a policy through a scenario set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// Discounted operating cost per scenario.
    pub scenario_costs: Vec<f64>,
    /// `[scenario][stage]` decisions.
    pub decisions: Vec<Vec<StageDecision>>,
    /// Mean discounted cost.
    pub z_m: f64,
}

impl SimulationResult {
    pub fn n_scenarios(&self) -> usize {
        self.scenario_costs.len()
    }

    /// Spot price at `bus` for every `(scenario, stage)`.
    pub fn spot_paths(&self, bus: usize) -> Vec<Vec<f64>> {
        self.decisions
            .iter()
            .map(|path| path.iter().map(|d| d.spot[bus]).collect())
            .collect()
    }

    /// Number of stages where the final-storage bound had to be relaxed.
    pub fn vf_relaxations(&self) -> usize {
        self.decisions
            .iter()
            .flatten()
            .filter(|d| d.vf_shortfall.iter().any(|&x| x > 0.0))
            .count()
    }

    /// Long-format CSV `(scenario, stage, variable, value)`, 1-based indices.
    pub fn to_long_csv_bytes(&self) -> Result<Vec<u8>> {
        util::csv_bytes(Path::new("<simulation>"), |w| {
            w.write_record(["scenario", "stage", "variable", "value"])?;
            for (s, path) in self.decisions.iter().enumerate() {
                let sc = (s + 1).to_string();
                for d in path {
                    let st = d.t.to_string();
                    let mut emit = |name: &str, values: &[f64]| -> std::result::Result<(), csv::Error> {
                        for (i, v) in values.iter().enumerate() {
                            w.write_record([sc.as_str(), st.as_str(), &format!("{name}[{}]", i + 1), &v.to_string()])?;
                        }
                        Ok(())
                    };
                    emit("g", &d.g)?;
                    emit("u", &d.u)?;
                    emit("s", &d.s)?;
                    emit("f", &d.f)?;
                    emit("delta", &d.delta)?;
                    emit("v", &d.v)?;
                    emit("e_plus", &d.e_plus)?;
                    emit("e_minus", &d.e_minus)?;
                    emit("spot", &d.spot)?;
                    emit("stage_cost", &[d.stage_cost])?;
                }
            }
            Ok(())
        })
    }

    /// Summary CSV `(scenario, discounted_cost)`.
    pub fn summary_csv_bytes(&self) -> Result<Vec<u8>> {
        util::csv_bytes(Path::new("<summary>"), |w| {
            w.write_record(["scenario", "discounted_cost"])?;
            for (s, c) in self.scenario_costs.iter().enumerate() {
                w.write_record([(s + 1).to_string(), c.to_string()])?;
            }
            Ok(())
        })
    }
}

/// Rolls the policy forward through one scenario.
pub fn simulate_scenario(
    system: &HydroSystem,
    policy: &LdrPolicy,
    scenarios: &ScenarioSet,
    s: usize,
    config: &SttConfig,
) -> Result<(f64, Vec<StageDecision>)> {
    let mut v: Vec<f64> = system.hydros.iter().map(|h| h.v0).collect();
    let mut cost = 0.0;
    let mut path = Vec::with_capacity(system.horizon);
    for t in 1..=system.horizon {
        let window = InflowWindow::from_set(scenarios, s, t, policy.basis.max_lag)?;
        let d = stt_step(system, policy, &v, &window, config)
            .map_err(|e| e.at(format!("scenario {}, stage {t}", s + 1)))?;
        cost += system.discount_factor(t)? * d.stage_cost;
        v.clone_from(&d.v);
        path.push(d);
    }
    Ok((cost, path))
}

/// Simulates every scenario in parallel.
pub fn simulate(
    system: &HydroSystem,
    policy: &LdrPolicy,
    scenarios: &ScenarioSet,
    config: &SttConfig,
) -> Result<SimulationResult> {
    system.validate()?;
    config.validate(system)?;
    check_policy(system, policy)?;
    if scenarios.n_reservoirs() != system.n_hydros() || scenarios.horizon() != system.horizon {
        return Err(Error::InvalidInput(format!(
            "scenario set ({} reservoirs, {} stages) does not match the system ({} reservoirs, {} stages)",
            scenarios.n_reservoirs(),
            scenarios.horizon(),
            system.n_hydros(),
            system.horizon
        )));
    }
    if scenarios.history_len() < policy.basis.max_lag {
        return Err(Error::InvalidInput(format!(
            "policy needs {} history stages, scenarios provide {}",
            policy.basis.max_lag,
            scenarios.history_len()
        )));
    }
    let rolled: Vec<(f64, Vec<StageDecision>)> = (0..scenarios.n_scenarios())
        .into_par_iter()
        .map(|s| simulate_scenario(system, policy, scenarios, s, config))
        .collect::<Result<_>>()?;
    let (scenario_costs, decisions): (Vec<f64>, Vec<Vec<StageDecision>>) = rolled.into_iter().unzip();
    let z_m = crate::analytics::mean(&scenario_costs);
    Ok(SimulationResult {
        scenario_costs,
        decisions,
        z_m,
    })
}
