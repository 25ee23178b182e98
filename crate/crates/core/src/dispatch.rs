//! Single-stage dispatch block shared by the estimation and tracking LPs.

use crate::lp::{LpModel, RowId, Sense, VarId};
use crate::system::HydroSystem;

/// Storage at the start of the stage.
pub(crate) enum Prev<'a> {
    Fixed(&'a [f64]),
    Vars(&'a [VarId]),
}

pub(crate) struct StageVars {
    pub g: Vec<VarId>,
    pub u: Vec<VarId>,
    pub s: Vec<VarId>,
    pub v: Vec<VarId>,
    pub f: Vec<VarId>,
    /// Load shed per bus.
    pub delta: Vec<VarId>,
    /// Energy balance per bus.
    pub eb: Vec<RowId>,
}

/// Adds stage `t` with operating costs scaled by `weight`.
///
/// Rows: per-bus energy balance `Σg + Σρu + Af + δ = d` and per-reservoir
/// water balance `v - v_prev + M(u + s) = ξ`.
pub(crate) fn add_stage(
    model: &mut LpModel,
    system: &HydroSystem,
    t: usize,
    tag: &str,
    prev: Prev<'_>,
    inflow: &[f64],
    weight: f64,
) -> StageVars {
    let inf = f64::INFINITY;
    let g: Vec<VarId> = system
        .thermals
        .iter()
        .enumerate()
        .map(|(j, th)| model.add_var(format!("g_{tag}_{}", j + 1), 0.0, th.capacity, weight * th.variable_cost))
        .collect();
    let mut u = Vec::with_capacity(system.n_hydros());
    let mut s = Vec::with_capacity(system.n_hydros());
    let mut v = Vec::with_capacity(system.n_hydros());
    for (h, hy) in system.hydros.iter().enumerate() {
        u.push(model.add_var(format!("u_{tag}_{}", h + 1), 0.0, hy.u_max, 0.0));
        s.push(model.add_var(format!("s_{tag}_{}", h + 1), 0.0, inf, 0.0));
        v.push(model.add_var(format!("v_{tag}_{}", h + 1), hy.v_min, hy.v_max, 0.0));
    }
    let f: Vec<VarId> = system
        .lines()
        .iter()
        .enumerate()
        .map(|(l, line)| model.add_var(format!("f_{tag}_{}", l + 1), -line.capacity, line.capacity, 0.0))
        .collect();
    let n_buses = system.n_buses();
    let delta: Vec<VarId> = (0..n_buses)
        .map(|b| model.add_var(format!("delta_{tag}_{}", b + 1), 0.0, inf, weight * system.deficit_cost))
        .collect();

    let mut eb = Vec::with_capacity(n_buses);
    for b in 0..n_buses {
        let mut coeffs = Vec::new();
        for (j, th) in system.thermals.iter().enumerate() {
            if th.bus == b {
                coeffs.push((g[j], 1.0));
            }
        }
        for (h, hy) in system.hydros.iter().enumerate() {
            if hy.bus == b {
                coeffs.push((u[h], hy.production_factor));
            }
        }
        for (l, line) in system.lines().iter().enumerate() {
            if line.to == b {
                coeffs.push((f[l], 1.0));
            }
            if line.from == b {
                coeffs.push((f[l], -1.0));
            }
        }
        coeffs.push((delta[b], 1.0));
        eb.push(model.add_row(format!("eb_{tag}_{}", b + 1), coeffs, Sense::Eq, system.bus_demand(b, t)));
    }

    for h in 0..system.n_hydros() {
        let mut coeffs = vec![(v[h], 1.0), (u[h], 1.0), (s[h], 1.0)];
        for up in system.upstream_of(h) {
            coeffs.push((u[up], -1.0));
            coeffs.push((s[up], -1.0));
        }
        let rhs = match prev {
            Prev::Fixed(values) => inflow[h] + values[h],
            Prev::Vars(vars) => {
                coeffs.push((vars[h], -1.0));
                inflow[h]
            }
        };
        model.add_row(format!("wb_{tag}_{}", h + 1), coeffs, Sense::Eq, rhs);
    }

    StageVars { g, u, s, v, f, delta, eb }
}
