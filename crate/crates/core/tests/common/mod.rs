//! Independent oracles shared by the integration tests.
//!
//! The perfect-foresight LP is assembled here from the system data alone,
//! without the crate's dispatch builder, so agreement with the estimator is
//! a check between two separate formulations.

#![allow(dead_code)]

use hydro_ldr::lp::{self, Backend, LpModel, Sense};
use hydro_ldr::scenario::ScenarioSet;
use hydro_ldr::system::HydroSystem;

/// Minimum discounted cost of one scenario with all inflows known upfront.
///
/// `inflows[t][h]` for stages `1..=T` (index `t - 1`). Single-bus systems
/// only.
pub fn perfect_foresight_cost(system: &HydroSystem, inflows: &[Vec<f64>]) -> f64 {
    assert!(system.network.is_none(), "oracle covers single-bus systems");
    let n_h = system.hydros.len();
    let horizon = system.horizon;
    let mut m = LpModel::new();
    let mut prev_v: Option<Vec<hydro_ldr::lp::VarId>> = None;
    for t in 1..=horizon {
        let discount = (1.0 + system.discount_rate).powi(-(t as i32));
        let mut balance = Vec::new();
        for (j, th) in system.thermals.iter().enumerate() {
            let g = m.add_var(format!("g{t}_{j}"), 0.0, th.capacity, discount * th.variable_cost);
            balance.push((g, 1.0));
        }
        let deficit = m.add_var(format!("d{t}"), 0.0, f64::INFINITY, discount * system.deficit_cost);
        balance.push((deficit, 1.0));
        let mut u = Vec::with_capacity(n_h);
        let mut s = Vec::with_capacity(n_h);
        let mut v = Vec::with_capacity(n_h);
        for (h, hy) in system.hydros.iter().enumerate() {
            u.push(m.add_var(format!("u{t}_{h}"), 0.0, hy.u_max, 0.0));
            s.push(m.add_var(format!("s{t}_{h}"), 0.0, f64::INFINITY, 0.0));
            let lower = if t == horizon { hy.v_min.max(hy.v_f) } else { hy.v_min };
            v.push(m.add_var(format!("v{t}_{h}"), lower, hy.v_max, 0.0));
            balance.push((u[h], hy.production_factor));
        }
        m.add_row(format!("load{t}"), balance, Sense::Eq, system.demand[t - 1]);
        for (h, hy) in system.hydros.iter().enumerate() {
            let mut row = vec![(v[h], 1.0), (u[h], 1.0), (s[h], 1.0)];
            for (up, other) in system.hydros.iter().enumerate() {
                if other.downstream == Some(h) {
                    row.push((u[up], -1.0));
                    row.push((s[up], -1.0));
                }
            }
            let rhs = match &prev_v {
                Some(pv) => {
                    row.push((pv[h], -1.0));
                    inflows[t - 1][h]
                }
                None => inflows[t - 1][h] + hy.v0,
            };
            m.add_row(format!("water{t}_{h}"), row, Sense::Eq, rhs);
        }
        prev_v = Some(v);
    }
    let sol = lp::solve_with(&m, Backend::Simplex).expect("oracle LP solves");
    assert!(sol.is_optimal(), "oracle LP status {:?}", sol.status);
    sol.objective
}

/// Inflow path `[t][h]` of scenario `s`.
pub fn path_of(set: &ScenarioSet, s: usize) -> Vec<Vec<f64>> {
    (1..=set.horizon()).map(|t| set.stage_inflows(s, t).to_vec()).collect()
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
