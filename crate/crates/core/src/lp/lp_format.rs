//! Export in the CPLEX LP text format (objective, constraints, bounds, end).

use std::fmt::Write;

use super::{LpModel, Sense};

fn term(out: &mut String, first: bool, coeff: f64, name: &str) {
    let sign = if coeff < 0.0 { "-" } else { "+" };
    if first && coeff >= 0.0 {
        let _ = write!(out, " {} {}", coeff, name);
    } else {
        let _ = write!(out, " {} {} {}", sign, coeff.abs(), name);
    }
}

/// Renders the model; variable and row names are used verbatim.
pub fn to_lp_format(model: &LpModel) -> String {
    let vars = model.vars();
    let mut out = String::from("Minimize\n obj:");
    let mut first = true;
    for v in vars.iter().filter(|v| v.cost != 0.0) {
        term(&mut out, first, v.cost, &v.name);
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for r in model.rows() {
        let _ = write!(out, " {}:", r.name);
        if r.coeffs.is_empty() {
            out.push_str(" 0");
        }
        for (i, &(v, a)) in r.coeffs.iter().enumerate() {
            term(&mut out, i == 0, a, &vars[v.0].name);
        }
        let op = match r.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", r.rhs);
    }
    out.push_str("Bounds\n");
    for v in vars {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {} free", v.name);
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " {} = {}", v.name, v.lower);
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", v.name, v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {} <= {}", v.name, v.upper);
            }
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpModel;

    #[test]
    fn small_model_text() {
        let mut m = LpModel::new();
        let x = m.add_var("x", 0.0, f64::INFINITY, 2.0);
        let y = m.add_var("y", -1.0, 4.0, -3.0);
        let z = m.add_var("z", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        m.add_row("c1", vec![(x, 1.0), (y, -2.5)], Sense::Le, 10.0);
        m.add_row("c2", vec![(z, -1.0), (x, 1.0)], Sense::Eq, 0.0);
        let text = to_lp_format(&m);
        let expected = "Minimize\n obj: 2 x - 3 y\nSubject To\n c1: 1 x - 2.5 y <= 10\n c2: - 1 z + 1 x = 0\nBounds\n x >= 0\n -1 <= y <= 4\n z free\nEnd\n";
        assert_eq!(text, expected);
    }
}
