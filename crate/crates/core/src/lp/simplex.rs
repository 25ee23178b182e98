//! Dense bounded-variable revised simplex.
//!
//! Every row gets a slack `s_i` with `a_i x + s_i = b_i`; the slack bounds
//! encode the row sense. Rows whose slack cannot absorb the starting residual
//! get an artificial variable and phase I minimizes the artificial sum.
//! Pricing is Dantzig's rule with a switch to Bland's rule after a run of
//! degenerate pivots; the ratio test is Harris's two-pass variant. The basis
//! inverse is kept dense and refactorized periodically, which suits the
//! stage-sized models this backend is meant for.

use super::{LpModel, LpSolution, LpStatus, Sense};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    /// Column-major structural matrix followed by slack and artificial columns.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    /// Row-major `m × m` basis inverse.
    binv: Vec<f64>,
    b: Vec<f64>,
    iterations: usize,
    limit: usize,
}

pub(super) fn solve(model: &LpModel) -> Result<LpSolution> {
    let n = model.n_vars();
    let m = model.n_rows();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, r) in model.rows().iter().enumerate() {
        for &(v, a) in &r.coeffs {
            if a != 0.0 {
                cols[v.0].push((i, a));
            }
        }
    }
    let mut lower: Vec<f64> = model.vars().iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = model.vars().iter().map(|v| v.upper).collect();
    let mut x = Vec::with_capacity(n + 2 * m);
    let mut state = Vec::with_capacity(n + 2 * m);
    for v in model.vars() {
        if v.lower.is_finite() {
            x.push(v.lower);
            state.push(State::AtLower);
        } else if v.upper.is_finite() {
            x.push(v.upper);
            state.push(State::AtUpper);
        } else {
            x.push(0.0);
            state.push(State::Zero);
        }
    }
    let b: Vec<f64> = model.rows().iter().map(|r| r.rhs).collect();
    let mut residual = b.clone();
    for (j, col) in cols.iter().enumerate() {
        for &(i, a) in col {
            residual[i] -= a * x[j];
        }
    }

    let mut basis = vec![0; m];
    let mut binv = vec![0.0; m * m];
    let mut artificials = Vec::new();
    let mut slack_cols = Vec::with_capacity(m);
    for (i, r) in model.rows().iter().enumerate() {
        let (lo, hi) = match r.sense {
            Sense::Le => (0.0, f64::INFINITY),
            Sense::Ge => (f64::NEG_INFINITY, 0.0),
            Sense::Eq => (0.0, 0.0),
        };
        slack_cols.push((lo, hi, residual[i]));
    }
    for (i, &(lo, hi, res)) in slack_cols.iter().enumerate() {
        let j = n + i;
        cols.push(vec![(i, 1.0)]);
        lower.push(lo);
        upper.push(hi);
        if res >= lo - PRIMAL_TOL && res <= hi + PRIMAL_TOL {
            x.push(res.clamp(lo, hi));
            state.push(State::Basic);
            basis[i] = j;
            binv[i * m + i] = 1.0;
        } else {
            let at = res.clamp(lo, hi);
            x.push(at);
            state.push(if at == lo { State::AtLower } else { State::AtUpper });
            artificials.push((i, res - at));
        }
    }
    for &(i, excess) in &artificials {
        let j = cols.len();
        let sign = excess.signum();
        cols.push(vec![(i, sign)]);
        lower.push(0.0);
        upper.push(f64::INFINITY);
        x.push(excess.abs());
        state.push(State::Basic);
        basis[i] = j;
        binv[i * m + i] = sign;
    }

    let total = cols.len();
    let mut tab = Tableau {
        m,
        cols,
        lower,
        upper,
        x,
        state,
        basis,
        binv,
        b,
        iterations: 0,
        limit: 200 * (m + total) + 10_000,
    };

    if !artificials.is_empty() {
        let mut phase1 = vec![0.0; total];
        for c in phase1.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        tab.run(&phase1)?;
        let infeasibility: f64 = (n + m..total).map(|j| tab.x[j]).sum();
        let scale = tab.b.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
        if infeasibility > 1e-8 * scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible));
        }
        for j in n + m..total {
            tab.upper[j] = 0.0;
            if tab.state[j] != State::Basic {
                tab.x[j] = 0.0;
                tab.state[j] = State::AtLower;
            }
        }
    }

    let mut cost = vec![0.0; total];
    for (c, v) in cost.iter_mut().zip(model.vars()) {
        *c = v.cost;
    }
    match tab.run(&cost)? {
        PhaseEnd::Unbounded => Ok(LpSolution::without_point(LpStatus::Unbounded)),
        PhaseEnd::Optimal => {
            tab.refactor()?;
            let duals = tab.duals(&cost);
            let primal = tab.x[..n].to_vec();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: model.objective_at(&primal),
                primal,
                duals,
            })
        }
    }
}

impl Tableau {
    fn run(&mut self, cost: &[f64]) -> Result<PhaseEnd> {
        let m = self.m;
        let cmax = cost.iter().fold(1.0_f64, |acc, c| acc.max(c.abs()));
        let dual_tol = 1e-9 * cmax;
        let mut since_refactor = 0;
        let mut degenerate = 0;
        let mut alpha = vec![0.0; m];
        loop {
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
            self.iterations += 1;
            if self.iterations > self.limit {
                return Err(Error::Solver(format!(
                    "simplex iteration limit ({}) reached",
                    self.limit
                )));
            }
            let y = self.duals(cost);
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.cols.len() {
                let st = self.state[j];
                if st == State::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = cost[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>();
                let dir = match st {
                    State::AtLower if d < -dual_tol => 1.0,
                    State::AtUpper if d > dual_tol => -1.0,
                    State::Zero if d < -dual_tol => 1.0,
                    State::Zero if d > dual_tol => -1.0,
                    _ => continue,
                };
                match entering {
                    None => entering = Some((j, dir, d.abs())),
                    Some((_, _, best)) if !bland && d.abs() > best => entering = Some((j, dir, d.abs())),
                    _ => {}
                }
                if bland && entering.is_some() {
                    break;
                }
            }
            let Some((q, dir, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            alpha.iter_mut().for_each(|a| *a = 0.0);
            for &(k, a) in &self.cols[q] {
                for (i, al) in alpha.iter_mut().enumerate() {
                    *al += self.binv[i * m + k] * a;
                }
            }

            // Harris pass 1: largest step with bounds relaxed by PRIMAL_TOL.
            let mut relaxed = f64::INFINITY;
            for i in 0..m {
                let delta = -dir * alpha[i];
                let j = self.basis[i];
                if delta < -PIVOT_TOL && self.lower[j].is_finite() {
                    relaxed = relaxed.min((self.x[j] - self.lower[j] + PRIMAL_TOL) / -delta);
                } else if delta > PIVOT_TOL && self.upper[j].is_finite() {
                    relaxed = relaxed.min((self.upper[j] - self.x[j] + PRIMAL_TOL) / delta);
                }
            }
            // Pass 2: among rows within the relaxed step, the largest pivot.
            let mut leave: Option<(usize, f64, f64)> = None;
            if relaxed.is_finite() {
                for i in 0..m {
                    let delta = -dir * alpha[i];
                    let j = self.basis[i];
                    let ratio = if delta < -PIVOT_TOL && self.lower[j].is_finite() {
                        (self.x[j] - self.lower[j]) / -delta
                    } else if delta > PIVOT_TOL && self.upper[j].is_finite() {
                        (self.upper[j] - self.x[j]) / delta
                    } else {
                        continue;
                    };
                    if ratio <= relaxed {
                        let better = match leave {
                            None => true,
                            Some((r, _, _)) => {
                                if bland {
                                    self.basis[i] < self.basis[r]
                                } else {
                                    delta.abs() > (dir * alpha[r]).abs()
                                }
                            }
                        };
                        if better {
                            leave = Some((i, ratio.max(0.0), delta));
                        }
                    }
                }
            }
            let range = self.upper[q] - self.lower[q];
            let flip = range.is_finite() && leave.map_or(true, |(_, theta, _)| range <= theta);
            if leave.is_none() && !flip {
                return Ok(PhaseEnd::Unbounded);
            }

            let theta = if flip { range } else { leave.unwrap().1 };
            for i in 0..m {
                let j = self.basis[i];
                self.x[j] += -dir * alpha[i] * theta;
            }
            self.x[q] += dir * theta;
            if theta <= PRIMAL_TOL {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            if flip {
                if dir > 0.0 {
                    self.x[q] = self.upper[q];
                    self.state[q] = State::AtUpper;
                } else {
                    self.x[q] = self.lower[q];
                    self.state[q] = State::AtLower;
                }
                continue;
            }

            let (r, _, delta) = leave.unwrap();
            let out = self.basis[r];
            if delta < 0.0 {
                self.x[out] = self.lower[out];
                self.state[out] = State::AtLower;
            } else {
                self.x[out] = self.upper[out];
                self.state[out] = State::AtUpper;
            }
            self.basis[r] = q;
            self.state[q] = State::Basic;

            let pivot = alpha[r];
            for k in 0..m {
                self.binv[r * m + k] /= pivot;
            }
            for i in 0..m {
                if i == r || alpha[i] == 0.0 {
                    continue;
                }
                let f = alpha[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
            }
            since_refactor += 1;
        }
    }

    /// `y = c_B' B^{-1}`.
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = cost[j];
            if c != 0.0 {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi += c * self.binv[k * m + i];
                }
            }
        }
        y
    }

    /// Recomputes `B^{-1}` by Gauss-Jordan elimination and the basic values
    /// from the nonbasic ones.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&i, &j| a[i * m + c].abs().total_cmp(&a[j * m + c].abs()))
                .unwrap();
            let piv = a[p * m + c];
            if piv.abs() < 1e-12 {
                return Err(Error::Solver("simplex basis became singular".into()));
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for i in 0..m {
                if i == c {
                    continue;
                }
                let f = a[i * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[i * m + k] -= f * a[c * m + k];
                    inv[i * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.binv = inv;

        let mut rhs = self.b.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.state[j] != State::Basic {
                for &(i, v) in col {
                    rhs[i] -= v * self.x[j];
                }
            }
        }
        for k in 0..m {
            let j = self.basis[k];
            self.x[j] = (0..m).map(|i| self.binv[k * m + i] * rhs[i]).sum();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LpModel, Sense, VarId};
    use proptest::prelude::*;

    /// Brute-force oracle: best feasible vertex of a bounded LP, found by
    /// solving every square subsystem of active constraints.
    fn vertex_enumeration(model: &LpModel) -> Option<f64> {
        let n = model.n_vars();
        // Each candidate active constraint is a (coefficients, value) pair.
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for r in model.rows() {
            let mut a = vec![0.0; n];
            for &(v, c) in &r.coeffs {
                a[v.0] += c;
            }
            planes.push((a, r.rhs));
        }
        for (j, v) in model.vars().iter().enumerate() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e.clone(), v.lower));
            planes.push((e, v.upper));
        }
        let mut best: Option<f64> = None;
        let k = planes.len();
        let mut pick = vec![0usize; n];
        fn rec(
            start: usize,
            depth: usize,
            k: usize,
            pick: &mut Vec<usize>,
            f: &mut dyn FnMut(&[usize]),
        ) {
            if depth == pick.len() {
                f(pick);
                return;
            }
            for i in start..k {
                pick[depth] = i;
                rec(i + 1, depth + 1, k, pick, f);
            }
        }
        rec(0, 0, k, &mut pick, &mut |sel: &[usize]| {
            let mut a: Vec<Vec<f64>> = sel.iter().map(|&i| planes[i].0.clone()).collect();
            let mut rhs: Vec<f64> = sel.iter().map(|&i| planes[i].1).collect();
            for c in 0..n {
                let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
                if a[p][c].abs() < 1e-9 {
                    return;
                }
                a.swap(p, c);
                rhs.swap(p, c);
                for i in 0..n {
                    if i != c {
                        let f = a[i][c] / a[c][c];
                        for kk in 0..n {
                            a[i][kk] -= f * a[c][kk];
                        }
                        rhs[i] -= f * rhs[c];
                    }
                }
            }
            let x: Vec<f64> = (0..n).map(|i| rhs[i] / a[i][i]).collect();
            if model.max_violation(&x) <= 1e-7 {
                let obj = model.objective_at(&x);
                if best.map_or(true, |b| obj < b) {
                    best = Some(obj);
                }
            }
        });
        best
    }

    fn arb_model() -> impl Strategy<Value = LpModel> {
        (2usize..=3, 1usize..=3).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec((-5i32..=5, 0i32..=3, 1i32..=4), n),
                proptest::collection::vec(
                    (proptest::collection::vec(-3i32..=3, n), 0u8..3, -6i32..=10),
                    m,
                ),
            )
                .prop_map(move |(vars, rows)| {
                    let mut model = LpModel::new();
                    for (j, (c, lo, width)) in vars.iter().enumerate() {
                        let lo = -(*lo as f64);
                        model.add_var(format!("x{j}"), lo, lo + *width as f64, *c as f64);
                    }
                    for (i, (coeffs, s, rhs)) in rows.iter().enumerate() {
                        let sense = [Sense::Le, Sense::Ge, Sense::Eq][*s as usize];
                        let coeffs = coeffs
                            .iter()
                            .enumerate()
                            .map(|(j, &a)| (VarId(j), a as f64))
                            .collect();
                        model.add_row(format!("r{i}"), coeffs, sense, *rhs as f64 / 2.0);
                    }
                    model
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]
        #[test]
        fn matches_vertex_enumeration(model in arb_model()) {
            let oracle = vertex_enumeration(&model);
            let sol = solve(&model).unwrap();
            match oracle {
                None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
                Some(best) => {
                    prop_assert_eq!(sol.status, LpStatus::Optimal);
                    prop_assert!((sol.objective - best).abs() <= 1e-6 * (1.0 + best.abs()),
                        "simplex {} vs oracle {}", sol.objective, best);
                    prop_assert!(model.max_violation(&sol.primal) <= 1e-6);
                    let dual = sol.dual_objective(&model);
                    prop_assert!((dual - sol.objective).abs() <= 1e-5 * (1.0 + sol.objective.abs()),
                        "dual objective {} vs primal {}", dual, sol.objective);
                    for (r, y) in model.rows().iter().zip(&sol.duals) {
                        match r.sense {
                            Sense::Ge => prop_assert!(*y >= -1e-9),
                            Sense::Le => prop_assert!(*y <= 1e-9),
                            Sense::Eq => {}
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_transportation_problem() {
        // Supplies equal demands, so many bases are degenerate.
        let mut m = LpModel::new();
        let supply = [20.0, 30.0, 25.0];
        let demand = [25.0, 25.0, 25.0];
        let cost = [[8.0, 6.0, 10.0], [9.0, 12.0, 13.0], [14.0, 9.0, 16.0]];
        let mut x = vec![];
        for i in 0..3 {
            for j in 0..3 {
                x.push(m.add_var(format!("x{i}{j}"), 0.0, f64::INFINITY, cost[i][j]));
            }
        }
        for i in 0..3 {
            m.add_row(format!("s{i}"), (0..3).map(|j| (x[3 * i + j], 1.0)).collect(), Sense::Eq, supply[i]);
        }
        for j in 0..3 {
            m.add_row(format!("d{j}"), (0..3).map(|i| (x[3 * i + j], 1.0)).collect(), Sense::Ge, demand[j]);
        }
        let sol = solve(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // Optimum frozen from an independent LP solve (scipy HiGHS).
        assert!((sol.objective - 715.0).abs() < 1e-9);
        assert!(m.max_violation(&sol.primal) < 1e-9);
        assert!((sol.objective - sol.dual_objective(&m)).abs() < 1e-7);
    }
}
