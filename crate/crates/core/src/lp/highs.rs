//! HiGHS adapter.

use highs::{ColProblem, HighsModelStatus, Sense as HSense};

use super::{LpModel, LpSolution, LpStatus, Sense};
use crate::error::{Error, Result};

pub(super) fn solve(model: &LpModel) -> Result<LpSolution> {
    // Interior point with crossover is far faster on the dense, degenerate
    // estimation LPs; simplex runs classify non-optimal outcomes.
    if let Outcome::Solved(sol) = run(model, Method::Ipm)? {
        return Ok(sol);
    }
    match run(model, Method::Simplex { presolve: true })? {
        // Presolve cannot tell the two apart; a plain solve can.
        Outcome::Status(HighsModelStatus::UnboundedOrInfeasible) => match run(model, Method::Simplex { presolve: false })? {
            Outcome::Status(HighsModelStatus::UnboundedOrInfeasible) => Ok(LpSolution::without_point(LpStatus::Infeasible)),
            other => finish(other),
        },
        other => finish(other),
    }
}

#[derive(Clone, Copy)]
enum Method {
    Ipm,
    Simplex { presolve: bool },
}

enum Outcome {
    Solved(LpSolution),
    Status(HighsModelStatus),
    Failed(String),
}

fn set(m: &mut highs::Model, name: &str, value: &str) -> Result<()> {
    m.try_set_option(name, value)
        .map_err(|e| Error::Solver(format!("HiGHS option {name}: {e:?}")))
}

fn finish(outcome: Outcome) -> Result<LpSolution> {
    match outcome {
        Outcome::Solved(sol) => Ok(sol),
        Outcome::Status(HighsModelStatus::Infeasible) => Ok(LpSolution::without_point(LpStatus::Infeasible)),
        Outcome::Status(HighsModelStatus::Unbounded) => Ok(LpSolution::without_point(LpStatus::Unbounded)),
        Outcome::Status(HighsModelStatus::UnboundedOrInfeasible) => Ok(LpSolution::without_point(LpStatus::Infeasible)),
        Outcome::Status(other) => Err(Error::Solver(format!("HiGHS finished with status {other:?}"))),
        Outcome::Failed(message) => Err(Error::Solver(message)),
    }
}

fn run(model: &LpModel, method: Method) -> Result<Outcome> {
    let mut pb = ColProblem::new();
    let rows: Vec<_> = model
        .rows()
        .iter()
        .map(|r| match r.sense {
            Sense::Le => pb.add_row(..=r.rhs),
            Sense::Ge => pb.add_row(r.rhs..),
            Sense::Eq => pb.add_row(r.rhs..=r.rhs),
        })
        .collect();
    let mut columns: Vec<Vec<(highs::Row, f64)>> = vec![Vec::new(); model.n_vars()];
    for (i, r) in model.rows().iter().enumerate() {
        for &(v, a) in &r.coeffs {
            if a != 0.0 {
                columns[v.0].push((rows[i], a));
            }
        }
    }
    for (v, col) in model.vars().iter().zip(columns) {
        pb.add_column(v.cost, v.lower..=v.upper, col);
    }
    let mut m = pb
        .try_optimise(HSense::Minimise)
        .map_err(|s| Error::Solver(format!("HiGHS rejected the model: {s:?}")))?;
    m.make_quiet();
    m.set_threads(std::num::NonZeroU32::MIN);
    let opts: [(&str, f64); 2] = [("primal_feasibility_tolerance", 1e-8), ("dual_feasibility_tolerance", 1e-8)];
    for (name, value) in opts {
        m.try_set_option(name, value)
            .map_err(|e| Error::Solver(format!("HiGHS option {name}: {e:?}")))?;
    }
    match method {
        // Postsolve of the ill-conditioned polynomial rows fails to restore
        // a clean basis, so the interior point run skips presolve.
        Method::Ipm => {
            set(&mut m, "solver", "ipm")?;
            set(&mut m, "presolve", "off")?;
        }
        Method::Simplex { presolve } => {
            set(&mut m, "solver", "simplex")?;
            if !presolve {
                set(&mut m, "presolve", "off")?;
            }
        }
    }
    let solved = match m.try_solve() {
        Ok(solved) => solved,
        Err(status) => return Ok(Outcome::Failed(format!("HiGHS run failed: {status:?}"))),
    };
    let status = solved.status();
    if status != HighsModelStatus::Optimal {
        return Ok(Outcome::Status(status));
    }
    let sol = solved.get_solution();
    let primal = sol.columns().to_vec();
    let duals = sol.dual_rows().to_vec();
    Ok(Outcome::Solved(LpSolution {
        status: LpStatus::Optimal,
        objective: model.objective_at(&primal),
        primal,
        duals,
    }))
}
