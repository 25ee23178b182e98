//! Inflow scenario sets.
//!
//! Synthetic scenarios come from a periodic lognormal process: each calendar
//! month has a target mean and standard deviation per reservoir, and an
//! optional AR(1) recursion on the standardized log-innovations adds serial
//! dependence without changing the monthly marginals. Externally generated
//! scenarios can be exchanged through the long-format CSV.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// Per-reservoir monthly lognormal targets (natural scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirInflowSpec {
    #[serde(default)]
    pub name: Option<String>,
    /// Twelve monthly means, January first.
    pub mean: Vec<f64>,
    /// Twelve monthly standard deviations.
    pub std: Vec<f64>,
    /// Pre-horizon inflows in chronological order; the last entry is stage 0.
    /// Defaults to the monthly means of the corresponding months.
    #[serde(default)]
    pub history: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// AR(1) coefficient on standardized log-innovations, in `[0, 1)`.
    #[serde(default)]
    pub ar_coefficient: f64,
    /// Calendar month (1-12) of stage 1.
    #[serde(default = "default_start_month")]
    pub start_month: usize,
    #[serde(rename = "reservoir")]
    pub reservoirs: Vec<ReservoirInflowSpec>,
}

fn default_start_month() -> usize {
    1
}

impl ScenarioSpec {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<ScenarioSpec> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        spec.check().map_err(|m| Error::parse(origin, m))?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<ScenarioSpec> {
        ScenarioSpec::from_toml_str(&util::read_to_string(path)?, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario spec serialization cannot fail")
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.reservoirs.is_empty() {
            return Err("scenario spec declares no [[reservoir]]".into());
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return Err(format!("ar_coefficient {} outside [0, 1)", self.ar_coefficient));
        }
        if !(1..=12).contains(&self.start_month) {
            return Err(format!("start_month {} outside 1..=12", self.start_month));
        }
        for (i, r) in self.reservoirs.iter().enumerate() {
            if r.mean.len() != 12 || r.std.len() != 12 {
                return Err(format!("[[reservoir]] #{}: mean and std need 12 monthly values", i + 1));
            }
            if r.mean.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                return Err(format!("[[reservoir]] #{}: monthly means must be finite and >= 0", i + 1));
            }
            if r.std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(format!("[[reservoir]] #{}: monthly stds must be finite and >= 0", i + 1));
            }
            if let Some(h) = &r.history {
                if h.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(format!("[[reservoir]] #{}: history values must be >= 0", i + 1));
                }
            }
        }
        Ok(())
    }

    /// Calendar month index (0 = January) of stage `t`, valid for `t <= 0` too.
    pub fn month_of(&self, t: i64) -> usize {
        (self.start_month as i64 - 1 + t - 1).rem_euclid(12) as usize
    }
}

/// Precomputed per-(scenario, stage) feature columns appended to every LDR.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousColumns {
    pub n_columns: usize,
    /// Flat `[scenario][stage][column]`.
    pub values: Vec<f64>,
}

/// A sample of inflow paths with equal probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    n_scenarios: usize,
    horizon: usize,
    n_reservoirs: usize,
    /// Flat `[scenario][stage][reservoir]`.
    inflows: Vec<f64>,
    /// Shared pre-horizon inflows per reservoir, chronological, last = stage 0.
    history: Vec<Vec<f64>>,
    pub seed: u64,
    exogenous: Option<ExogenousColumns>,
}

impl ScenarioSet {
    /// Builds a set from nested `[scenario][stage][reservoir]` values.
    pub fn from_paths(paths: Vec<Vec<Vec<f64>>>, history: Vec<Vec<f64>>, seed: u64) -> Result<ScenarioSet> {
        let n = paths.len();
        if n == 0 {
            return Err(Error::InvalidInput("scenario set needs at least one scenario".into()));
        }
        let horizon = paths[0].len();
        if horizon == 0 {
            return Err(Error::InvalidInput("scenarios need at least one stage".into()));
        }
        let n_res = paths[0][0].len();
        let mut inflows = Vec::with_capacity(n * horizon * n_res);
        for (s, path) in paths.iter().enumerate() {
            if path.len() != horizon {
                return Err(Error::InvalidInput(format!("scenario {} has {} stages, expected {horizon}", s + 1, path.len())));
            }
            for (t, stage) in path.iter().enumerate() {
                if stage.len() != n_res {
                    return Err(Error::InvalidInput(format!(
                        "scenario {}, stage {}: {} reservoirs, expected {n_res}",
                        s + 1,
                        t + 1,
                        stage.len()
                    )));
                }
                inflows.extend_from_slice(stage);
            }
        }
        let history = if history.is_empty() { vec![Vec::new(); n_res] } else { history };
        let set = ScenarioSet {
            n_scenarios: n,
            horizon,
            n_reservoirs: n_res,
            inflows,
            history,
            seed,
            exogenous: None,
        };
        set.check()?;
        Ok(set)
    }

    fn check(&self) -> Result<()> {
        if self.inflows.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("inflows must be finite and nonnegative".into()));
        }
        if self.history.len() != self.n_reservoirs {
            return Err(Error::InvalidInput(format!(
                "history covers {} reservoirs, expected {}",
                self.history.len(),
                self.n_reservoirs
            )));
        }
        let len = self.history[0].len();
        if self.history.iter().any(|h| h.len() != len) {
            return Err(Error::InvalidInput("history length differs between reservoirs".into()));
        }
        if self.history.iter().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("history inflows must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn with_exogenous(mut self, columns: ExogenousColumns) -> Result<ScenarioSet> {
        if columns.values.len() != self.n_scenarios * self.horizon * columns.n_columns {
            return Err(Error::InvalidInput("exogenous column values do not match set dimensions".into()));
        }
        self.exogenous = Some(columns);
        Ok(self)
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_reservoirs(&self) -> usize {
        self.n_reservoirs
    }

    /// Number of pre-horizon stages available for lags.
    pub fn history_len(&self) -> usize {
        self.history.first().map_or(0, Vec::len)
    }

    pub fn history(&self) -> &[Vec<f64>] {
        &self.history
    }

    pub fn exogenous_columns(&self) -> usize {
        self.exogenous.as_ref().map_or(0, |e| e.n_columns)
    }

    /// Exogenous feature values of scenario `s` at stage `t` (1-based).
    pub fn exogenous(&self, s: usize, t: usize) -> &[f64] {
        match &self.exogenous {
            Some(e) => {
                let start = (s * self.horizon + t - 1) * e.n_columns;
                &e.values[start..start + e.n_columns]
            }
            None => &[],
        }
    }

    /// Inflow of scenario `s` (0-based) into reservoir `h` at stage `t`;
    /// stages `t <= 0` read the shared history.
    ///
    /// Panics when `t` is before the recorded history or after the horizon.
    pub fn inflow(&self, s: usize, t: i64, h: usize) -> f64 {
        if t >= 1 {
            let t = t as usize;
            assert!(t <= self.horizon, "stage {t} beyond horizon {}", self.horizon);
            self.inflows[(s * self.horizon + t - 1) * self.n_reservoirs + h]
        } else {
            let hist = &self.history[h];
            let back = (-t) as usize;
            assert!(back < hist.len(), "stage {t} precedes the recorded history");
            hist[hist.len() - 1 - back]
        }
    }

    /// All reservoirs' inflows for scenario `s` at stage `t >= 1`.
    pub fn stage_inflows(&self, s: usize, t: usize) -> &[f64] {
        let start = (s * self.horizon + t - 1) * self.n_reservoirs;
        &self.inflows[start..start + self.n_reservoirs]
    }

    /// A set containing only the listed scenarios, in the listed order.
    pub fn select(&self, scenarios: &[usize]) -> ScenarioSet {
        let block = self.horizon * self.n_reservoirs;
        let mut inflows = Vec::with_capacity(scenarios.len() * block);
        for &s in scenarios {
            inflows.extend_from_slice(&self.inflows[s * block..(s + 1) * block]);
        }
        let exogenous = self.exogenous.as_ref().map(|e| {
            let eb = self.horizon * e.n_columns;
            let mut values = Vec::with_capacity(scenarios.len() * eb);
            for &s in scenarios {
                values.extend_from_slice(&e.values[s * eb..(s + 1) * eb]);
            }
            ExogenousColumns {
                n_columns: e.n_columns,
                values,
            }
        });
        ScenarioSet {
            n_scenarios: scenarios.len(),
            horizon: self.horizon,
            n_reservoirs: self.n_reservoirs,
            inflows,
            history: self.history.clone(),
            seed: self.seed,
            exogenous,
        }
    }

    /// Writes the long-format CSV `(scenario, stage, reservoir, inflow)`.
    ///
    /// Scenarios and reservoirs are 1-based. Shared history rows use scenario
    /// 0 and stages `<= 0`.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        util::csv_bytes(Path::new("<scenarios>"), |w| {
            w.write_record(["scenario", "stage", "reservoir", "inflow"])?;
            let hl = self.history_len() as i64;
            for back in (0..hl).rev() {
                for h in 0..self.n_reservoirs {
                    let stage = -back;
                    let v = self.inflow(0, stage, h);
                    w.write_record(["0".to_string(), stage.to_string(), (h + 1).to_string(), v.to_string()])?;
                }
            }
            for s in 0..self.n_scenarios {
                for t in 1..=self.horizon {
                    for (h, v) in self.stage_inflows(s, t).iter().enumerate() {
                        w.write_record([(s + 1).to_string(), t.to_string(), (h + 1).to_string(), v.to_string()])?;
                    }
                }
            }
            Ok(())
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        util::atomic_write(path, &self.to_csv_bytes()?)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R, origin: &Path) -> Result<ScenarioSet> {
        #[derive(Deserialize)]
        struct Row {
            scenario: usize,
            stage: i64,
            reservoir: usize,
            inflow: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut stages: BTreeMap<(usize, i64, usize), f64> = BTreeMap::new();
        for rec in rdr.deserialize::<Row>() {
            let row = rec.map_err(|e| Error::parse(origin, util::csv_error_message(&e)))?;
            if row.reservoir == 0 {
                return Err(Error::parse(origin, "reservoir numbers are 1-based"));
            }
            if (row.scenario == 0) != (row.stage <= 0) {
                return Err(Error::parse(
                    origin,
                    format!(
                        "row (scenario {}, stage {}): history rows use scenario 0 and stage <= 0, path rows scenario >= 1 and stage >= 1",
                        row.scenario, row.stage
                    ),
                ));
            }
            if stages.insert((row.scenario, row.stage, row.reservoir - 1), row.inflow).is_some() {
                return Err(Error::parse(
                    origin,
                    format!("duplicate row (scenario {}, stage {}, reservoir {})", row.scenario, row.stage, row.reservoir),
                ));
            }
        }
        let n_res = stages.keys().map(|k| k.2 + 1).max().unwrap_or(0);
        let n = stages.keys().map(|k| k.0).max().unwrap_or(0);
        let horizon = stages.keys().map(|k| k.1).max().unwrap_or(0).max(0) as usize;
        let hist_len = stages.keys().filter(|k| k.0 == 0).map(|k| 1 - k.1).max().unwrap_or(0) as usize;
        if n == 0 || horizon == 0 {
            return Err(Error::parse(origin, "no scenario rows"));
        }
        let expected = n * horizon * n_res + hist_len * n_res;
        if stages.len() != expected {
            return Err(Error::parse(
                origin,
                format!("incomplete scenario grid: {} rows, expected {expected}", stages.len()),
            ));
        }
        let mut paths = vec![vec![vec![0.0; n_res]; horizon]; n];
        let mut history = vec![vec![0.0; hist_len]; n_res];
        for ((s, t, h), v) in stages {
            if s == 0 {
                history[h][(hist_len as i64 - 1 + t) as usize] = v;
            } else {
                paths[s - 1][t as usize - 1][h] = v;
            }
        }
        ScenarioSet::from_paths(paths, history, 0).map_err(|e| Error::parse(origin, e.to_string()))
    }

    pub fn load_csv(path: &Path) -> Result<ScenarioSet> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ScenarioSet::from_csv_reader(std::io::BufReader::new(file), path)
    }
}

/// Lognormal log-scale parameters matching a natural-scale mean and std.
fn lognormal_params(mean: f64, std: f64) -> (f64, f64) {
    let var_log = (1.0 + (std * std) / (mean * mean)).ln();
    (mean.ln() - 0.5 * var_log, var_log.sqrt())
}

/// Draws `n` scenarios of `horizon` stages.
///
/// Each scenario uses its own ChaCha stream (`stream = scenario index`) of
/// the generator seeded with `seed`, so results are reproducible and do not
/// depend on how scenarios are scheduled across threads. The shared history
/// holds `max_lag` pre-horizon stages.
pub fn generate(spec: &ScenarioSpec, n: usize, horizon: usize, max_lag: usize, seed: u64) -> Result<ScenarioSet> {
    spec.check().map_err(Error::InvalidInput)?;
    if n == 0 {
        return Err(Error::InvalidInput("scenario count must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let n_res = spec.reservoirs.len();
    let phi = spec.ar_coefficient;
    let innovation_scale = (1.0 - phi * phi).sqrt();
    let params: Vec<[(f64, f64); 12]> = spec
        .reservoirs
        .iter()
        .map(|r| {
            let mut p = [(0.0, 0.0); 12];
            for m in 0..12 {
                p[m] = lognormal_params(r.mean[m], r.std[m]);
            }
            p
        })
        .collect();

    let paths: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let mut z: Vec<f64> = (0..n_res).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut out = Vec::with_capacity(horizon * n_res);
            for t in 1..=horizon as i64 {
                let month = spec.month_of(t);
                for h in 0..n_res {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    z[h] = phi * z[h] + innovation_scale * eps;
                    let r = &spec.reservoirs[h];
                    let (mean, std) = (r.mean[month], r.std[month]);
                    let value = if mean == 0.0 {
                        0.0
                    } else if std == 0.0 {
                        mean
                    } else {
                        let (mu, sigma) = params[h][month];
                        (mu + sigma * z[h]).exp()
                    };
                    out.push(value);
                }
            }
            out
        })
        .collect();

    let mut history = Vec::with_capacity(n_res);
    for (h, r) in spec.reservoirs.iter().enumerate() {
        let values = match &r.history {
            Some(given) => {
                if given.len() < max_lag {
                    return Err(Error::InvalidInput(format!(
                        "reservoir {}: history has {} values but max_lag is {max_lag}",
                        h + 1,
                        given.len()
                    )));
                }
                given[given.len() - max_lag..].to_vec()
            }
            None => (0..max_lag as i64)
                .rev()
                .map(|back| r.mean[spec.month_of(-back)])
                .collect(),
        };
        history.push(values);
    }

    Ok(ScenarioSet {
        n_scenarios: n,
        horizon,
        n_reservoirs: n_res,
        inflows: paths.into_iter().flatten().collect(),
        history,
        seed,
        exogenous: None,
    })
}

/// Sum of the other reservoirs' inflows, `[scenario][stage]` for stages `1..=T`.
pub fn complement_aggregate(set: &ScenarioSet, h: usize) -> Result<Vec<Vec<f64>>> {
    if set.n_reservoirs < 2 {
        return Err(Error::InvalidInput(
            "complement aggregate needs at least two reservoirs".into(),
        ));
    }
    if h >= set.n_reservoirs {
        return Err(Error::InvalidInput(format!("reservoir {h} out of range")));
    }
    Ok((0..set.n_scenarios)
        .map(|s| {
            (1..=set.horizon)
                .map(|t| complement_at(set, s, t as i64, h))
                .collect()
        })
        .collect())
}

fn complement_at(set: &ScenarioSet, s: usize, t: i64, h: usize) -> f64 {
    (0..set.n_reservoirs)
        .filter(|&o| o != h)
        .map(|o| set.inflow(s, t, o))
        .sum()
}

/// Per-stage, per-reservoir sample statistics used to standardize features.
///
/// Covers stages `1 - lag_depth ..= horizon`; `sigma` entries are strictly
/// positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub lag_depth: usize,
    pub horizon: usize,
    pub n_reservoirs: usize,
    /// Flat `[stage offset][reservoir]`, stage offset = `t + lag_depth - 1`.
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Complement-aggregate statistics; empty for single-reservoir systems.
    pub mu_c: Vec<f64>,
    pub sigma_c: Vec<f64>,
}

impl StandardizationStats {
    fn offset(&self, t: i64, h: usize) -> usize {
        let e = t + self.lag_depth as i64 - 1;
        assert!(
            e >= 0 && (e as usize) < self.lag_depth + self.horizon,
            "stage {t} outside standardization range"
        );
        e as usize * self.n_reservoirs + h
    }

    pub fn mean(&self, t: i64, h: usize) -> f64 {
        self.mu[self.offset(t, h)]
    }

    pub fn std(&self, t: i64, h: usize) -> f64 {
        self.sigma[self.offset(t, h)]
    }

    pub fn has_complement(&self) -> bool {
        !self.mu_c.is_empty()
    }

    pub fn complement_mean(&self, t: i64, h: usize) -> f64 {
        self.mu_c[self.offset(t, h)]
    }

    pub fn complement_std(&self, t: i64, h: usize) -> f64 {
        self.sigma_c[self.offset(t, h)]
    }
}

/// Mean and population standard deviation; a zero deviation becomes 1.
fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    // Rounding in the mean of a constant series leaves a residual of a few ulps.
    let std = if std <= 1e-12 * mean.abs().max(1.0) { 1.0 } else { std };
    (mean, std)
}

/// Sample statistics over all scenarios, for every stage from the start of
/// the shared history to the horizon.
pub fn standardize_stats(set: &ScenarioSet) -> StandardizationStats {
    let lag_depth = set.history_len();
    let n_res = set.n_reservoirs;
    let stages = lag_depth + set.horizon;
    let mut mu = Vec::with_capacity(stages * n_res);
    let mut sigma = Vec::with_capacity(stages * n_res);
    let mut mu_c = Vec::new();
    let mut sigma_c = Vec::new();
    let with_complement = n_res >= 2;
    for e in 0..stages {
        let t = e as i64 + 1 - lag_depth as i64;
        // History stages are shared, so a single draw represents every scenario.
        let n = if t <= 0 { 1 } else { set.n_scenarios };
        for h in 0..n_res {
            let (m, s) = moments((0..n).map(move |s| set.inflow(s, t, h)));
            mu.push(m);
            sigma.push(s);
            if with_complement {
                let (m, s) = moments((0..n).map(move |s| complement_at(set, s, t, h)));
                mu_c.push(m);
                sigma_c.push(s);
            }
        }
    }
    StandardizationStats {
        lag_depth,
        horizon: set.horizon,
        n_reservoirs: n_res,
        mu,
        sigma,
        mu_c,
        sigma_c,
    }
}
