//! Polynomial LDR basis.
//!
//! For stage `t` and reservoir `h` the feature vector is
//!
//! ```text
//! 1,
//! z(t-l, h)^k          for k = 1..=K, l = 0..=τ      (own inflows, r = 1)
//! zc(t-l, h)^k         for k = 1..=K, l = 0..=τ      (complement, r = 2)
//! x_j(t)               for j = 0..J                  (exogenous, r = 3)
//! ```
//!
//! where `z` is the inflow standardized with the policy's statistics and `zc`
//! the standardized sum of the other reservoirs' inflows. Lag `l = 0` is the
//! current stage. Coefficients are ordered `(t, h, r, k, l)` lexicographically;
//! exogenous columns use `k = 1` and store the column number in `l`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ScenarioSet, StandardizationStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub max_degree: usize,
    pub max_lag: usize,
    #[serde(default)]
    pub include_complement: bool,
    /// Number of precomputed exogenous columns appended to every rule.
    #[serde(default)]
    pub exogenous_columns: usize,
}

impl BasisConfig {
    pub fn new(max_degree: usize, max_lag: usize, include_complement: bool) -> BasisConfig {
        BasisConfig {
            max_degree,
            max_lag,
            include_complement,
            exogenous_columns: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_degree == 0 {
            return Err(Error::InvalidInput("basis max_degree must be at least 1".into()));
        }
        Ok(())
    }

    /// Whether the complement block is present for a system of `n_hydros`.
    pub fn complement_active(&self, n_hydros: usize) -> bool {
        self.include_complement && n_hydros >= 2
    }

    /// Coefficients per `(t, h)` block.
    pub fn block_len(&self, n_hydros: usize) -> usize {
        let own = self.max_degree * (self.max_lag + 1);
        let comp = if self.complement_active(n_hydros) { own } else { 0 };
        1 + own + comp + self.exogenous_columns
    }

    /// Total number of coefficients over all stages and reservoirs.
    pub fn n_coefficients(&self, horizon: usize, n_hydros: usize) -> usize {
        horizon * n_hydros * self.block_len(n_hydros)
    }

    /// Position of the first coefficient of block `(t, h)`, `t` 1-based.
    pub fn block_offset(&self, t: usize, h: usize, n_hydros: usize) -> usize {
        ((t - 1) * n_hydros + h) * self.block_len(n_hydros)
    }
}

/// Term family of a coefficient.
pub const OWN: u8 = 1;
pub const COMPLEMENT: u8 = 2;
pub const EXOGENOUS: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoefficientIndex {
    /// Stage, 1-based.
    pub t: usize,
    /// Reservoir, 0-based.
    pub h: usize,
    pub r: u8,
    pub k: usize,
    pub l: usize,
}

impl CoefficientIndex {
    pub fn is_intercept(&self) -> bool {
        self.k == 0
    }
}

impl std::fmt::Display for CoefficientIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(t={}, h={}, k={}, l={}, r={})", self.t, self.h + 1, self.k, self.l, self.r)
    }
}

/// Coefficient indices of one `(t, h)` block in canonical order.
pub fn block_indices(t: usize, h: usize, n_hydros: usize, config: &BasisConfig) -> Vec<CoefficientIndex> {
    let mut out = Vec::with_capacity(config.block_len(n_hydros));
    out.push(CoefficientIndex { t, h, r: OWN, k: 0, l: 0 });
    let family = |r: u8, out: &mut Vec<CoefficientIndex>| {
        for k in 1..=config.max_degree {
            for l in 0..=config.max_lag {
                out.push(CoefficientIndex { t, h, r, k, l });
            }
        }
    };
    family(OWN, &mut out);
    if config.complement_active(n_hydros) {
        family(COMPLEMENT, &mut out);
    }
    for j in 0..config.exogenous_columns {
        out.push(CoefficientIndex { t, h, r: EXOGENOUS, k: 1, l: j });
    }
    out
}

/// All coefficient indices for `horizon` stages and `n_hydros` reservoirs.
pub fn index_set(horizon: usize, n_hydros: usize, config: &BasisConfig) -> Vec<CoefficientIndex> {
    let mut out = Vec::with_capacity(config.n_coefficients(horizon, n_hydros));
    for t in 1..=horizon {
        for h in 0..n_hydros {
            out.extend(block_indices(t, h, n_hydros, config));
        }
    }
    out
}

/// Observed inflows for stages `t - τ ..= t` of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct InflowWindow {
    /// Stage of the last (most recent) row.
    pub stage: i64,
    pub n_reservoirs: usize,
    /// Flat `[stage][reservoir]`, oldest stage first.
    pub values: Vec<f64>,
    /// Exogenous column values at `stage`.
    pub exogenous: Vec<f64>,
}

impl InflowWindow {
    /// Window of `max_lag + 1` stages ending at `t` in scenario `s`.
    pub fn from_set(set: &ScenarioSet, s: usize, t: usize, max_lag: usize) -> Result<InflowWindow> {
        let first = t as i64 - max_lag as i64;
        if first < 1 - set.history_len() as i64 {
            return Err(Error::InvalidInput(format!(
                "stage {t} needs {max_lag} lags but only {} history stages are available",
                set.history_len()
            )));
        }
        let n_res = set.n_reservoirs();
        let mut values = Vec::with_capacity((max_lag + 1) * n_res);
        for st in first..=t as i64 {
            for h in 0..n_res {
                values.push(set.inflow(s, st, h));
            }
        }
        Ok(InflowWindow {
            stage: t as i64,
            n_reservoirs: n_res,
            values,
            exogenous: set.exogenous(s, t).to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n_reservoirs.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Inflow of reservoir `h`, `l` stages before the window's last stage.
    pub fn lagged(&self, l: usize, h: usize) -> f64 {
        let row = self.len() - 1 - l;
        self.values[row * self.n_reservoirs + h]
    }

    fn lagged_complement(&self, l: usize, h: usize) -> f64 {
        let row = self.len() - 1 - l;
        let slice = &self.values[row * self.n_reservoirs..(row + 1) * self.n_reservoirs];
        slice.iter().enumerate().filter(|&(o, _)| o != h).map(|(_, v)| v).sum()
    }
}

/// Appends `z, z^2, …, z^K` for each lag value, degree-major: all lags at
/// degree 1, then all lags at degree 2, and so on.
fn push_powers(out: &mut Vec<f64>, z: &[f64], max_degree: usize) {
    let mut p = z.to_vec();
    out.extend_from_slice(&p);
    for _ in 2..=max_degree {
        for (pi, zi) in p.iter_mut().zip(z) {
            *pi *= zi;
        }
        out.extend_from_slice(&p);
    }
}

/// Feature vector of block `(t, h)`, aligned with [`block_indices`].
pub fn features(
    window: &InflowWindow,
    stats: &StandardizationStats,
    h: usize,
    config: &BasisConfig,
) -> Result<Vec<f64>> {
    let tau = config.max_lag;
    if window.len() < tau + 1 {
        return Err(Error::InvalidInput(format!(
            "inflow window has {} stages, the basis needs {}",
            window.len(),
            tau + 1
        )));
    }
    if window.exogenous.len() != config.exogenous_columns {
        return Err(Error::InvalidInput(format!(
            "window carries {} exogenous values, the basis expects {}",
            window.exogenous.len(),
            config.exogenous_columns
        )));
    }
    let t = window.stage;
    let n_hydros = window.n_reservoirs;
    let mut out = Vec::with_capacity(config.block_len(n_hydros));
    out.push(1.0);
    let z: Vec<f64> = (0..=tau)
        .map(|l| {
            let st = t - l as i64;
            (window.lagged(l, h) - stats.mean(st, h)) / stats.std(st, h)
        })
        .collect();
    push_powers(&mut out, &z, config.max_degree);
    if config.complement_active(n_hydros) {
        let zc: Vec<f64> = (0..=tau)
            .map(|l| {
                let st = t - l as i64;
                (window.lagged_complement(l, h) - stats.complement_mean(st, h)) / stats.complement_std(st, h)
            })
            .collect();
        push_powers(&mut out, &zc, config.max_degree);
    }
    out.extend_from_slice(&window.exogenous);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Statistics with μ = 0 and σ = 1 everywhere, so features see raw values.
    fn unit_stats(n_res: usize, lag_depth: usize, horizon: usize, complement: bool) -> StandardizationStats {
        let len = (lag_depth + horizon) * n_res;
        StandardizationStats {
            lag_depth,
            horizon,
            n_reservoirs: n_res,
            mu: vec![0.0; len],
            sigma: vec![1.0; len],
            mu_c: if complement { vec![0.0; len] } else { vec![] },
            sigma_c: if complement { vec![1.0; len] } else { vec![] },
        }
    }

    #[test]
    fn minimal_basis_has_two_indices() {
        assert_eq!(index_set(1, 1, &BasisConfig::new(1, 0, false)).len(), 2);
    }

    #[test]
    fn five_reservoir_counts() {
        // Twelve lags: l = 0..=11.
        let with = BasisConfig::new(6, 11, true);
        let without = BasisConfig::new(6, 11, false);
        assert_eq!(index_set(24, 5, &with).len(), 17_400);
        assert_eq!(index_set(24, 5, &without).len(), 8_760);
        assert_eq!(with.n_coefficients(24, 5), 17_400);
    }

    #[test]
    fn single_reservoir_ignores_complement() {
        let cfg = BasisConfig::new(6, 11, true);
        assert_eq!(index_set(36, 1, &cfg).len(), 2628);
    }

    #[test]
    fn ordering_and_degeneracy_rules() {
        let cfg = BasisConfig { max_degree: 2, max_lag: 1, include_complement: true, exogenous_columns: 1 };
        let idx = index_set(2, 2, &cfg);
        let mut sorted = idx.clone();
        sorted.sort_by_key(|c| (c.t, c.h, c.r, c.k, c.l));
        assert_eq!(idx, sorted);
        for c in &idx {
            if c.k == 0 {
                assert_eq!((c.l, c.r), (0, OWN));
            }
            if c.r == COMPLEMENT {
                assert!(c.k >= 1);
            }
        }
        for (pos, c) in idx.iter().enumerate() {
            let block = cfg.block_offset(c.t, c.h, 2);
            assert!(pos >= block && pos < block + cfg.block_len(2));
        }
    }

    #[test]
    fn centered_window_gives_intercept_only() {
        let set = ScenarioSet::from_paths(vec![vec![vec![5.0, 7.0]; 3]; 2], vec![vec![5.0; 2], vec![7.0; 2]], 0).unwrap();
        let stats = crate::scenario::standardize_stats(&set);
        let cfg = BasisConfig::new(3, 2, true);
        let w = InflowWindow::from_set(&set, 1, 3, 2).unwrap();
        let f = features(&w, &stats, 0, &cfg).unwrap();
        assert_eq!(f[0], 1.0);
        assert!(f[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_degree_two_features() {
        let stats = unit_stats(1, 1, 1, false);
        let w = InflowWindow { stage: 1, n_reservoirs: 1, values: vec![-1.0, 2.0], exogenous: vec![] };
        let f = features(&w, &stats, 0, &BasisConfig::new(2, 1, false)).unwrap();
        assert_eq!(f, vec![1.0, 2.0, -1.0, 4.0, 1.0]);
    }

    #[test]
    fn complement_block_value() {
        let mut stats = unit_stats(2, 0, 1, true);
        stats.mu_c = vec![2.0, 0.0];
        stats.sigma_c = vec![2.0, 1.0];
        // Reservoir 0's complement is reservoir 1's inflow, 3: (3 - 2) / 2 = 0.5.
        let w = InflowWindow { stage: 1, n_reservoirs: 2, values: vec![9.0, 3.0], exogenous: vec![] };
        let f = features(&w, &stats, 0, &BasisConfig::new(1, 0, true)).unwrap();
        assert_eq!(f, vec![1.0, 9.0, 0.5]);
    }

    #[test]
    fn short_window_is_an_error() {
        let stats = unit_stats(1, 2, 1, false);
        let w = InflowWindow { stage: 1, n_reservoirs: 1, values: vec![1.0, 2.0], exogenous: vec![] };
        assert!(features(&w, &stats, 0, &BasisConfig::new(1, 2, false)).is_err());
    }

    #[test]
    fn exogenous_columns_are_appended() {
        let stats = unit_stats(1, 0, 1, false);
        let w = InflowWindow { stage: 1, n_reservoirs: 1, values: vec![3.0], exogenous: vec![0.25, -4.0] };
        let cfg = BasisConfig { max_degree: 1, max_lag: 0, include_complement: false, exogenous_columns: 2 };
        assert_eq!(features(&w, &stats, 0, &cfg).unwrap(), vec![1.0, 3.0, 0.25, -4.0]);
    }

    proptest! {
        #[test]
        fn count_matches_closed_form(t in 1usize..30, h in 1usize..6, k in 1usize..7, l in 0usize..13, c: bool, j in 0usize..3) {
            let cfg = BasisConfig { max_degree: k, max_lag: l, include_complement: c, exogenous_columns: j };
            let per = 1 + k * (l + 1) + if c && h >= 2 { k * (l + 1) } else { 0 } + j;
            prop_assert_eq!(index_set(t, h, &cfg).len(), t * h * per);
        }

        #[test]
        fn powers_equal_repeated_multiplication(zs in proptest::collection::vec(-3.0f64..3.0, 1..5), k in 1usize..7) {
            let n = zs.len();
            let stats = unit_stats(1, n - 1, 1, false);
            let mut values = zs.clone();
            values.reverse();
            let w = InflowWindow { stage: 1, n_reservoirs: 1, values, exogenous: vec![] };
            let cfg = BasisConfig::new(k, n - 1, false);
            let f = features(&w, &stats, 0, &cfg).unwrap();
            let again = features(&w, &stats, 0, &cfg).unwrap();
            prop_assert_eq!(&f, &again);
            for deg in 1..=k {
                for (l, &z) in zs.iter().enumerate() {
                    let mut expected = 1.0;
                    for _ in 0..deg {
                        expected *= z;
                    }
                    prop_assert_eq!(f[1 + (deg - 1) * n + l], expected);
                }
            }
        }
    }
}
