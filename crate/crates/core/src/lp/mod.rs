//! Solver-neutral linear programs.
//!
//! Models are always minimizations. Row duals are reported as the derivative
//! of the optimal objective with respect to the row's right-hand side, so a
//! binding `>=` row has a nonnegative dual and a binding `<=` row a
//! nonpositive one.

mod highs;
mod lp_format;
pub mod simplex;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lp_format::to_lp_format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Error,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::Error => "error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
}

impl LpModel {
    pub fn new() -> LpModel {
        LpModel::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> RowId {
        self.rows.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) {
        self.rows[row.0].rhs = rhs;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.vars[var.0].lower = lower;
        self.vars[var.0].upper = upper;
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.vars[var.0].cost = cost;
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn row_by_name(&self, name: &str) -> Option<RowId> {
        self.rows.iter().position(|r| r.name == name).map(RowId)
    }

    /// Checks names, references, bounds and coefficients.
    pub fn validate(&self) -> Result<()> {
        let mut seen: HashMap<&str, ()> = HashMap::with_capacity(self.vars.len() + self.rows.len());
        for v in &self.vars {
            if seen.insert(&v.name, ()).is_some() {
                return Err(Error::InvalidInput(format!("duplicate LP name `{}`", v.name)));
            }
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper || v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(Error::InvalidInput(format!(
                    "variable `{}` has invalid bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if !v.cost.is_finite() {
                return Err(Error::InvalidInput(format!("variable `{}` has a non-finite cost", v.name)));
            }
        }
        for r in &self.rows {
            if seen.insert(&r.name, ()).is_some() {
                return Err(Error::InvalidInput(format!("duplicate LP name `{}`", r.name)));
            }
            if !r.rhs.is_finite() {
                return Err(Error::InvalidInput(format!("row `{}` has a non-finite rhs", r.name)));
            }
            for &(v, a) in &r.coeffs {
                if v.0 >= self.vars.len() {
                    return Err(Error::InvalidInput(format!("row `{}` references an unknown variable", r.name)));
                }
                if !a.is_finite() {
                    return Err(Error::InvalidInput(format!("row `{}` has a non-finite coefficient", r.name)));
                }
            }
        }
        Ok(())
    }

    /// Row activity `a_i x` for a candidate point.
    pub fn activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.rows[row.0].coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Largest bound or row violation of a candidate point.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, val) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - val).max(val - v.upper);
        }
        for (i, r) in self.rows.iter().enumerate() {
            let act = self.activity(RowId(i), x);
            let viol = match r.sense {
                Sense::Le => act - r.rhs,
                Sense::Ge => r.rhs - act,
                Sense::Eq => (act - r.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, val)| v.cost * val).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// Primal values in variable order; empty unless optimal.
    pub primal: Vec<f64>,
    /// Row duals `∂objective/∂rhs` in row order; empty unless optimal.
    pub duals: Vec<f64>,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus) -> LpSolution {
        LpSolution {
            status,
            objective: f64::NAN,
            primal: Vec::new(),
            duals: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.primal[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.duals[r.0]
    }

    pub fn value_by_name(&self, model: &LpModel, name: &str) -> Option<f64> {
        model.var_by_name(name).map(|v| self.value(v))
    }

    pub fn dual_by_name(&self, model: &LpModel, name: &str) -> Option<f64> {
        model.row_by_name(name).map(|r| self.dual(r))
    }

    /// Dual objective `b'y + Σ reduced-cost bound terms`, for strong-duality checks.
    pub fn dual_objective(&self, model: &LpModel) -> f64 {
        let mut reduced: Vec<f64> = model.vars.iter().map(|v| v.cost).collect();
        let mut value = 0.0;
        for (r, y) in model.rows.iter().zip(&self.duals) {
            value += r.rhs * y;
            for &(v, a) in &r.coeffs {
                reduced[v.0] -= a * y;
            }
        }
        for (v, d) in model.vars.iter().zip(reduced) {
            if d > 0.0 && v.lower.is_finite() {
                value += d * v.lower;
            } else if d < 0.0 && v.upper.is_finite() {
                value += d * v.upper;
            }
        }
        value
    }
}

/// LP backend selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Built-in simplex for small models, HiGHS otherwise.
    #[default]
    Auto,
    Simplex,
    Highs,
}

/// Models up to this many rows go to the built-in simplex under `Auto`.
const AUTO_SIMPLEX_ROWS: usize = 400;

impl Backend {
    /// Reads `HYDRO_LDR_SOLVER` (`auto`, `simplex`, `highs`); unset means `auto`.
    pub fn from_env() -> Result<Backend> {
        match std::env::var("HYDRO_LDR_SOLVER") {
            Err(_) => Ok(Backend::Auto),
            Ok(v) => v.parse(),
        }
    }

    fn resolve(self, model: &LpModel) -> Backend {
        match self {
            Backend::Auto if model.n_rows() <= AUTO_SIMPLEX_ROWS => Backend::Simplex,
            Backend::Auto => Backend::Highs,
            other => other,
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Backend> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "auto" => Ok(Backend::Auto),
            "simplex" => Ok(Backend::Simplex),
            "highs" => Ok(Backend::Highs),
            other => Err(Error::InvalidInput(format!(
                "unknown LP backend `{other}` (expected auto, simplex or highs)"
            ))),
        }
    }
}

/// Solves with the backend chosen by `HYDRO_LDR_SOLVER`.
pub fn solve(model: &LpModel) -> Result<LpSolution> {
    solve_with(model, Backend::from_env()?)
}

/// Infeasible and unbounded outcomes are statuses; only backend failures are errors.
pub fn solve_with(model: &LpModel, backend: Backend) -> Result<LpSolution> {
    model.validate()?;
    match backend.resolve(model) {
        Backend::Highs => highs::solve(model),
        _ => simplex::solve(model),
    }
}

/// Names of the rows that must be relaxed to restore feasibility.
///
/// Solves the elastic relaxation that adds a nonnegative slack on each side of
/// every row and minimizes their sum.
pub fn infeasible_rows(model: &LpModel, backend: Backend) -> Result<Vec<String>> {
    let mut elastic = LpModel::new();
    for v in &model.vars {
        elastic.add_var(v.name.clone(), v.lower, v.upper, 0.0);
    }
    let mut slacks = Vec::with_capacity(model.rows.len());
    for (i, r) in model.rows.iter().enumerate() {
        let mut coeffs = r.coeffs.clone();
        let up = elastic.add_var(format!("__elastic_up_{i}"), 0.0, f64::INFINITY, 1.0);
        let down = elastic.add_var(format!("__elastic_down_{i}"), 0.0, f64::INFINITY, 1.0);
        coeffs.push((up, 1.0));
        coeffs.push((down, -1.0));
        elastic.add_row(r.name.clone(), coeffs, r.sense, r.rhs);
        slacks.push((up, down));
    }
    let sol = solve_with(&elastic, backend)?;
    if !sol.is_optimal() {
        return Ok(Vec::new());
    }
    Ok(model
        .rows
        .iter()
        .zip(slacks)
        .filter(|(_, (up, down))| sol.value(*up) + sol.value(*down) > crate::FEAS_TOL)
        .map(|(r, _)| r.name.clone())
        .collect())
}

/// Solves and converts any non-optimal status into an error naming the rows
/// involved.
pub fn solve_optimal(model: &LpModel, backend: Backend, context: &str) -> Result<LpSolution> {
    let sol = solve_with(model, backend)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => {
            let rows = infeasible_rows(model, backend).unwrap_or_default();
            Err(Error::Lp {
                context: context.to_string(),
                status: sol.status,
                rows,
            })
        }
        status => Err(Error::Lp {
            context: context.to_string(),
            status,
            rows: Vec::new(),
        }),
    }
}
