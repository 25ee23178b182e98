//! Run configuration and the commands behind the CLI.
//!
//! A run directory collects everything a command writes:
//!
//! - `scenarios_in.csv`, `scenarios_out.csv`: generated inflow scenarios.
//! - `theta_l{λ}.csv` plus `theta_l{λ}.json`: policy coefficients and metadata.
//! - `estimation_log.jsonl`: one record per estimation.
//! - `summary_theta_l{λ}.csv`, `spot_theta_l{λ}.csv`: out-of-sample costs and
//!   bus-1 spot prices per scenario and stage.
//! - `decisions_theta_l{λ}.csv`: long-format decisions (`simulate` only).
//! - `sweep.csv`, `sweep.json`: the λ sweep table and selection.
//! - `report.json`, `report_costs.csv`, `report_sparsity.csv`,
//!   `report_spot.csv`: consolidated metrics.
//! - `run.json`: settings the report needs (central window).
//!
//! Every file is replaced atomically.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{
    self, cost_metrics, default_grid, normalize_grid, sparsity_metrics, spot_metrics, spot_metrics_from_paths,
    CostMetrics, EstimationSummary, SparsityMetrics, SpotMetrics, SweepConfig, SweepReport,
};
use crate::basis::BasisConfig;
use crate::error::{Error, Result};
use crate::estimator::{adalasso_weights, estimate_with, LdrPolicy};
use crate::fixtures;
use crate::lp::Backend;
use crate::scenario::{generate, ScenarioSet, ScenarioSpec};
use crate::stt::{simulate, SimulationResult, SttConfig};
use crate::system::HydroSystem;
use crate::util;

/// Out-of-sample scenarios use this offset on the seed so they never share
/// draws with the in-sample set.
const OUT_OF_SAMPLE_SEED_OFFSET: u64 = 1;

const LOG_FILE: &str = "estimation_log.jsonl";
const MANIFEST_FILE: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SttSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// First and last stage of the spot-price window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central_window: Option<[usize; 2]>,
    #[serde(default = "default_true")]
    pub apply_vf_at_t: bool,
}

impl Default for SttSettings {
    fn default() -> Self {
        SttSettings {
            gamma: None,
            central_window: None,
            apply_vf_at_t: true,
        }
    }
}

fn default_true() -> bool {
    true
}

/// Contents of a `run.toml`. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: PathBuf,
    /// Scenario generator spec; alternative to the two CSV paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_sample: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_of_sample: Option<PathBuf>,
    #[serde(default = "default_n_in")]
    pub n_in: usize,
    #[serde(default = "default_n_out")]
    pub n_out: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    pub basis: BasisConfig,
    #[serde(default)]
    pub stt: SttSettings,
}

fn default_n_in() -> usize {
    100
}

fn default_n_out() -> usize {
    1000
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<RunConfig> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        config.check().map_err(|m| Error::parse(origin, m))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::from_toml_str(&util::read_to_string(path)?, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serialization cannot fail")
    }

    fn check(&self) -> std::result::Result<(), String> {
        if let Some(g) = self.grid.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(format!("grid value {g} must be finite and >= 0"));
        }
        match (&self.scenarios, &self.in_sample, &self.out_of_sample) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => {}
            _ => {
                return Err("give either `scenarios` or both `in_sample` and `out_of_sample`".into());
            }
        }
        if self.n_in == 0 || self.n_out == 0 {
            return Err("n_in and n_out must be at least 1".into());
        }
        if let Some([a, b]) = self.stt.central_window {
            if a == 0 || a > b {
                return Err(format!("[stt] central_window [{a}, {b}] is not a stage range"));
            }
        }
        if let Some(g) = self.stt.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(format!("[stt] gamma {g} must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Loads every referenced file, resolving relative paths against `base`.
    pub fn resolve(&self, base: &Path) -> Result<Setup> {
        let at = |p: &Path| -> Result<PathBuf> {
            let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            if !full.exists() {
                return Err(Error::InvalidInput(format!("referenced file {} does not exist", full.display())));
            }
            Ok(full)
        };
        let system = HydroSystem::load(&at(&self.system)?)?;
        let scenarios = match (&self.scenarios, &self.in_sample, &self.out_of_sample) {
            (Some(spec), _, _) => ScenarioSource::Spec(ScenarioSpec::load(&at(spec)?)?),
            (None, Some(i), Some(o)) => ScenarioSource::Files {
                in_sample: ScenarioSet::load_csv(&at(i)?)?,
                out_of_sample: ScenarioSet::load_csv(&at(o)?)?,
            },
            _ => unreachable!("checked at parse time"),
        };
        let out = if self.out.is_absolute() { self.out.clone() } else { base.join(&self.out) };
        self.setup(system, scenarios, out)
    }

    fn setup(&self, system: HydroSystem, scenarios: ScenarioSource, out: PathBuf) -> Result<Setup> {
        system.validate()?;
        self.basis.validate()?;
        let stt = SttConfig {
            gamma: self.stt.gamma,
            apply_vf_at_t: self.stt.apply_vf_at_t,
            ..SttConfig::default()
        };
        stt.validate(&system)?;
        let central_window = match self.stt.central_window {
            Some([_, b]) if b > system.horizon => {
                return Err(Error::InvalidInput(format!(
                    "[stt] central_window ends at stage {b} beyond the horizon {}",
                    system.horizon
                )))
            }
            Some([a, b]) => Some(a..=b),
            None => None,
        };
        Ok(Setup {
            system,
            scenarios,
            basis: self.basis,
            grid: self.grid.clone(),
            stt,
            central_window,
            seed: self.seed,
            n_in: self.n_in,
            n_out: self.n_out,
            out,
            backend: Backend::from_env()?,
            jobs: 0,
        })
    }
}

#[derive(Debug, Clone)]
pub enum ScenarioSource {
    Spec(ScenarioSpec),
    Files {
        in_sample: ScenarioSet,
        out_of_sample: ScenarioSet,
    },
}

/// A fully loaded run: data, settings and output directory.
#[derive(Debug, Clone)]
pub struct Setup {
    pub system: HydroSystem,
    pub scenarios: ScenarioSource,
    pub basis: BasisConfig,
    pub grid: Vec<f64>,
    pub stt: SttConfig,
    pub central_window: Option<RangeInclusive<usize>>,
    pub seed: u64,
    pub n_in: usize,
    pub n_out: usize,
    pub out: PathBuf,
    pub backend: Backend,
    /// Sweep worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Setup {
    /// Loads `fixture:<name>` or a `run.toml` path.
    pub fn open(config: &str) -> Result<Setup> {
        match config.strip_prefix("fixture:") {
            Some(name) => Setup::from_fixture(name),
            None => {
                let path = Path::new(config);
                let base = path.parent().unwrap_or(Path::new(""));
                RunConfig::load(path)?.resolve(base)
            }
        }
    }

    /// Bundled fixture; its output directory is relative to the working
    /// directory.
    pub fn from_fixture(name: &str) -> Result<Setup> {
        let f = fixtures::load(name)?;
        let out = f.run.out.clone();
        f.run.setup(f.system, ScenarioSource::Spec(f.scenarios), out)
    }

    pub fn in_sample(&self) -> Result<ScenarioSet> {
        match &self.scenarios {
            ScenarioSource::Spec(spec) => generate(spec, self.n_in, self.system.horizon, self.basis.max_lag, self.seed),
            ScenarioSource::Files { in_sample, .. } => Ok(in_sample.clone()),
        }
    }

    pub fn out_of_sample(&self) -> Result<ScenarioSet> {
        match &self.scenarios {
            ScenarioSource::Spec(spec) => generate(
                spec,
                self.n_out,
                self.system.horizon,
                self.basis.max_lag,
                self.seed.wrapping_add(OUT_OF_SAMPLE_SEED_OFFSET),
            ),
            ScenarioSource::Files { out_of_sample, .. } => Ok(out_of_sample.clone()),
        }
    }

    pub fn policy_path(&self, lambda: f64) -> PathBuf {
        self.out.join(policy_file_name(lambda))
    }

    fn write_manifest(&self) -> Result<()> {
        let manifest = Manifest {
            horizon: self.system.horizon,
            central_window: self.central_window.as_ref().map(|w| [*w.start(), *w.end()]),
            seed: self.seed,
        };
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        util::atomic_write(&self.out.join(MANIFEST_FILE), &json)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    horizon: usize,
    central_window: Option<[usize; 2]>,
    seed: u64,
}

/// `theta_l{λ}.csv`, with λ in shortest round-trip decimal form.
pub fn policy_file_name(lambda: f64) -> String {
    format!("theta_l{lambda}.csv")
}

/// Writes the in-sample and out-of-sample scenario CSVs.
pub fn cmd_gen_scenarios(setup: &Setup) -> Result<[PathBuf; 2]> {
    let paths = [setup.out.join("scenarios_in.csv"), setup.out.join("scenarios_out.csv")];
    setup.in_sample()?.save_csv(&paths[0])?;
    setup.out_of_sample()?.save_csv(&paths[1])?;
    Ok(paths)
}

/// Outcome of [`cmd_estimate`].
#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub policy_path: PathBuf,
    pub policy: LdrPolicy,
    pub summary: EstimationSummary,
    /// Whether the λ = 0 policy had to be estimated first.
    pub estimated_baseline: bool,
}

/// Estimates the policy for `lambda`, first producing `theta_l0.csv` when a
/// positive λ needs adaptive weights that are not on disk yet.
pub fn cmd_estimate(setup: &Setup, lambda: f64) -> Result<EstimateOutput> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda {lambda} must be finite and >= 0")));
    }
    setup.write_manifest()?;
    let scenarios = setup.in_sample()?;
    let baseline_path = setup.policy_path(0.0);
    let mut estimated_baseline = false;
    let weights = if lambda > 0.0 {
        let theta0 = if baseline_path.exists() {
            LdrPolicy::load(&baseline_path)?
        } else {
            log::info!("no {} yet, estimating lambda = 0 first", baseline_path.display());
            estimated_baseline = true;
            estimate_and_record(setup, &scenarios, 0.0, None)?.1
        };
        Some(adalasso_weights(&theta0))
    } else {
        None
    };
    let (summary, policy) = estimate_and_record(setup, &scenarios, lambda, weights.as_ref())?;
    Ok(EstimateOutput {
        policy_path: setup.policy_path(lambda),
        policy,
        summary,
        estimated_baseline,
    })
}

fn estimate_and_record(
    setup: &Setup,
    scenarios: &ScenarioSet,
    lambda: f64,
    weights: Option<&crate::estimator::AdalassoWeights>,
) -> Result<(EstimationSummary, LdrPolicy)> {
    let est = estimate_with(&setup.system, scenarios, &setup.basis, lambda, weights, setup.backend)
        .map_err(|e| e.at(format!("estimating lambda = {lambda}")))?;
    let summary = EstimationSummary::of(&setup.system, scenarios, &est);
    est.policy.save(&setup.policy_path(lambda))?;
    append_log(&setup.out, std::slice::from_ref(&summary))?;
    Ok((summary, est.policy))
}

fn log_line(summary: &EstimationSummary) -> String {
    let mut record = summary.log_record.clone();
    if let Some(obj) = record.as_object_mut() {
        obj.insert("max_water_residual".into(), summary.max_water_residual.into());
        obj.insert("max_energy_residual".into(), summary.max_energy_residual.into());
    }
    record.to_string()
}

fn append_log(dir: &Path, summaries: &[EstimationSummary]) -> Result<()> {
    let path = dir.join(LOG_FILE);
    let mut text = if path.exists() { util::read_to_string(&path)? } else { String::new() };
    for s in summaries {
        text.push_str(&log_line(s));
        text.push('\n');
    }
    util::atomic_write(&path, text.as_bytes())
}

/// Simulates a policy file over the out-of-sample scenarios and writes the
/// cost summary, spot prices and long-format decisions next to it.
pub fn cmd_simulate(setup: &Setup, policy_path: &Path) -> Result<SimulationResult> {
    let policy = LdrPolicy::load(policy_path)?;
    setup.write_manifest()?;
    let scenarios = setup.out_of_sample()?;
    let sim = simulate(&setup.system, &policy, &scenarios, &sim_config(setup))?;
    let stem = stem_of(policy_path);
    write_simulation(&setup.out, &stem, &sim.scenario_costs, &sim.spot_paths(0))?;
    util::atomic_write(&setup.out.join(format!("decisions_{stem}.csv")), &sim.to_long_csv_bytes()?)?;
    Ok(sim)
}

fn sim_config(setup: &Setup) -> SttConfig {
    SttConfig {
        backend: setup.backend,
        ..setup.stt
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "policy".into())
}

fn write_costs(dir: &Path, stem: &str, costs: &[f64]) -> Result<()> {
    let summary = util::csv_bytes(Path::new("<summary>"), |w| {
        w.write_record(["scenario", "discounted_cost"])?;
        for (s, c) in costs.iter().enumerate() {
            w.write_record([(s + 1).to_string(), c.to_string()])?;
        }
        Ok(())
    })?;
    util::atomic_write(&dir.join(format!("summary_{stem}.csv")), &summary)
}

fn write_simulation(dir: &Path, stem: &str, costs: &[f64], spot: &[Vec<f64>]) -> Result<()> {
    write_costs(dir, stem, costs)?;
    let spot_csv = util::csv_bytes(Path::new("<spot>"), |w| {
        w.write_record(["scenario", "stage", "spot"])?;
        for (s, path) in spot.iter().enumerate() {
            for (t, p) in path.iter().enumerate() {
                w.write_record([(s + 1).to_string(), (t + 1).to_string(), p.to_string()])?;
            }
        }
        Ok(())
    })?;
    util::atomic_write(&dir.join(format!("spot_{stem}.csv")), &spot_csv)
}

/// Estimates and simulates every λ of the grid and writes the sweep table.
pub fn cmd_sweep(setup: &Setup) -> Result<SweepReport> {
    setup.write_manifest()?;
    let scenarios_in = setup.in_sample()?;
    let scenarios_out = setup.out_of_sample()?;
    let config = SweepConfig {
        grid: setup.grid.clone(),
        stt: sim_config(setup),
        spot_window: setup.central_window.clone(),
        backend: setup.backend,
        jobs: setup.jobs,
    };
    let run = analytics::sweep(&setup.system, &scenarios_in, &scenarios_out, &setup.basis, &config)?;
    for policy in &run.policies {
        let path = setup.policy_path(policy.lambda);
        policy.save(&path)?;
    }
    append_log(&setup.out, &run.estimations)?;
    // Sweep rows carry spot metrics; per-scenario spot files come from `simulate`.
    for (policy, costs) in run.policies.iter().zip(&run.out_of_sample_costs) {
        write_costs(&setup.out, &stem_of(&setup.policy_path(policy.lambda)), costs)?;
    }
    util::atomic_write(&setup.out.join("sweep.csv"), &run.report.to_csv_bytes()?)?;
    let json = serde_json::to_vec_pretty(&run.report).expect("sweep report serializes");
    util::atomic_write(&setup.out.join("sweep.json"), &json)?;
    Ok(run.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub lambda: f64,
    pub policy: String,
    pub nonzero_count: usize,
    pub n_penalized: usize,
    /// Relative to the λ = 0 policy when it is present.
    pub sparsity: Option<SparsityMetrics>,
    pub cost: Option<CostMetrics>,
    pub spot: Option<SpotMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Ascending in λ.
    pub entries: Vec<ReportEntry>,
    pub sweep: Option<SweepReport>,
    pub spot_window: Option<[usize; 2]>,
}

/// Consolidates the policies and simulation outputs found in `dir`.
pub fn cmd_report(dir: &Path) -> Result<Report> {
    let mut policies: BTreeMap<String, PathBuf> = BTreeMap::new();
    let listing = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in listing {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if name.starts_with("theta_l") && name.ends_with(".csv") {
            policies.insert(name, path);
        }
    }
    if policies.is_empty() {
        return Err(Error::InvalidInput(format!("{} holds no policy files (theta_l*.csv)", dir.display())));
    }
    let manifest: Option<Manifest> = {
        let p = dir.join(MANIFEST_FILE);
        if p.exists() {
            Some(serde_json::from_str(&util::read_to_string(&p)?).map_err(|e| Error::parse(&p, e.to_string()))?)
        } else {
            None
        }
    };

    let mut loaded: Vec<(String, LdrPolicy)> = policies
        .iter()
        .map(|(name, path)| Ok((name.clone(), LdrPolicy::load(path)?)))
        .collect::<Result<_>>()?;
    loaded.sort_by(|a, b| a.1.lambda.total_cmp(&b.1.lambda));
    let baseline = loaded.iter().find(|(_, p)| p.lambda == 0.0).map(|(_, p)| p.clone());
    let horizon = loaded[0].1.horizon;
    let window = manifest
        .as_ref()
        .and_then(|m| m.central_window)
        .unwrap_or([1, horizon]);

    let mut entries = Vec::with_capacity(loaded.len());
    for (name, policy) in &loaded {
        let stem = name.trim_end_matches(".csv");
        let costs_path = dir.join(format!("summary_{stem}.csv"));
        let cost = if costs_path.exists() {
            Some(cost_metrics(&read_costs(&costs_path)?)?)
        } else {
            None
        };
        let spot_path = dir.join(format!("spot_{stem}.csv"));
        let spot = if spot_path.exists() {
            Some(spot_metrics_from_paths(&read_spot(&spot_path)?, window[0]..=window[1])?)
        } else {
            None
        };
        let sparsity = match &baseline {
            Some(b) => Some(sparsity_metrics(policy, b)?),
            None => None,
        };
        entries.push(ReportEntry {
            lambda: policy.lambda,
            policy: name.clone(),
            nonzero_count: policy.nonzero_count(),
            n_penalized: policy.n_penalized(),
            sparsity,
            cost,
            spot,
        });
    }
    let sweep_path = dir.join("sweep.json");
    let sweep = if sweep_path.exists() {
        Some(
            serde_json::from_str(&util::read_to_string(&sweep_path)?)
                .map_err(|e| Error::parse(&sweep_path, e.to_string()))?,
        )
    } else {
        None
    };
    let report = Report {
        entries,
        sweep,
        spot_window: Some(window),
    };
    write_report(dir, &report)?;
    Ok(report)
}

fn write_report(dir: &Path, report: &Report) -> Result<()> {
    let json = serde_json::to_vec_pretty(report).expect("report serializes");
    util::atomic_write(&dir.join("report.json"), &json)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();

    let costs = util::csv_bytes(Path::new("<report>"), |w| {
        w.write_record(["lambda", "mean", "p5", "p95", "spread"])?;
        for e in &report.entries {
            let c = e.cost.as_ref();
            w.write_record([
                e.lambda.to_string(),
                opt(c.map(|c| c.mean)),
                opt(c.map(|c| c.p5)),
                opt(c.map(|c| c.p95)),
                opt(c.map(|c| c.spread)),
            ])?;
        }
        Ok(())
    })?;
    util::atomic_write(&dir.join("report_costs.csv"), &costs)?;

    let sparsity = util::csv_bytes(Path::new("<report>"), |w| {
        w.write_record(["lambda", "nonzero_count", "n_penalized", "nonzero_fraction", "l1_shrinkage"])?;
        for e in &report.entries {
            let s = e.sparsity.as_ref();
            w.write_record([
                e.lambda.to_string(),
                e.nonzero_count.to_string(),
                e.n_penalized.to_string(),
                opt(s.map(|s| s.nonzero_fraction)),
                opt(s.map(|s| s.l1_shrinkage)),
            ])?;
        }
        Ok(())
    })?;
    util::atomic_write(&dir.join("report_sparsity.csv"), &sparsity)?;

    let spot = util::csv_bytes(Path::new("<report>"), |w| {
        w.write_record(["lambda", "mean", "p5", "p95", "avg_uncertainty", "time_variability"])?;
        for e in &report.entries {
            if let Some(s) = &e.spot {
                w.write_record([
                    e.lambda.to_string(),
                    s.mean.to_string(),
                    s.p5.to_string(),
                    s.p95.to_string(),
                    s.avg_uncertainty.to_string(),
                    s.time_variability.to_string(),
                ])?;
            }
        }
        Ok(())
    })?;
    util::atomic_write(&dir.join("report_spot.csv"), &spot)
}

fn read_costs(path: &Path) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        #[allow(dead_code)]
        scenario: usize,
        discounted_cost: f64,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, util::csv_error_message(&e)))?;
    reader
        .deserialize::<Row>()
        .map(|r| r.map(|r| r.discounted_cost).map_err(|e| Error::parse(path, util::csv_error_message(&e))))
        .collect()
}

fn read_spot(path: &Path) -> Result<Vec<Vec<f64>>> {
    #[derive(Deserialize)]
    struct Row {
        scenario: usize,
        stage: usize,
        spot: f64,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, util::csv_error_message(&e)))?;
    let mut paths: Vec<Vec<f64>> = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::parse(path, util::csv_error_message(&e)))?;
        if row.scenario == 0 || row.scenario > paths.len() + 1 || row.stage == 0 {
            return Err(Error::parse(path, format!("unexpected row (scenario {}, stage {})", row.scenario, row.stage)));
        }
        if row.scenario == paths.len() + 1 {
            paths.push(Vec::new());
        }
        let p = &mut paths[row.scenario - 1];
        if row.stage != p.len() + 1 {
            return Err(Error::parse(path, format!("scenario {}: stage {} out of order", row.scenario, row.stage)));
        }
        p.push(row.spot);
    }
    Ok(paths)
}

/// Grid from a comma-separated list such as `0,1e3,1e4`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("grid value `{}` is not a number", s.trim())))
        })
        .collect::<Result<_>>()?;
    normalize_grid(&values)
}

/// Spot metrics of an in-memory simulation over the setup's window, or the
/// whole horizon.
pub fn spot_summary(setup: &Setup, sim: &SimulationResult) -> Result<SpotMetrics> {
    let window = setup.central_window.clone().unwrap_or(1..=setup.system.horizon);
    spot_metrics(sim, window, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro_setup(dir: &Path) -> Setup {
        let mut s = Setup::from_fixture("micro").unwrap();
        s.out = dir.to_path_buf();
        s.backend = Backend::Simplex;
        s
    }

    #[test]
    fn policy_names() {
        assert_eq!(policy_file_name(0.0), "theta_l0.csv");
        assert_eq!(policy_file_name(1000.0), "theta_l1000.csv");
        assert_eq!(policy_file_name(0.1), "theta_l0.1.csv");
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1e3, 10").unwrap(), [0.0, 10.0, 1000.0]);
        assert!(parse_grid("1,x").is_err());
        assert!(parse_grid("-1").is_err());
    }

    #[test]
    fn config_needs_one_scenario_source() {
        let text = "system = \"s.toml\"\n[basis]\nmax_degree = 1\nmax_lag = 0\n";
        let err = RunConfig::from_toml_str(text, Path::new("run.toml")).unwrap_err();
        assert!(err.to_string().contains("scenarios"));
    }

    #[test]
    fn negative_grid_rejected() {
        let text = "system = \"s.toml\"\nscenarios = \"x.toml\"\ngrid = [0.0, -1.0]\n[basis]\nmax_degree = 1\nmax_lag = 0\n";
        assert!(RunConfig::from_toml_str(text, Path::new("run.toml")).is_err());
    }

    #[test]
    fn missing_referenced_file() {
        let text = "system = \"nope.toml\"\nscenarios = \"x.toml\"\n[basis]\nmax_degree = 1\nmax_lag = 0\n";
        let c = RunConfig::from_toml_str(text, Path::new("run.toml")).unwrap();
        let err = c.resolve(Path::new("/nonexistent-dir")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn positive_lambda_estimates_baseline_first() {
        let dir = tempfile::tempdir().unwrap();
        let setup = micro_setup(dir.path());
        let out = cmd_estimate(&setup, 100.0).unwrap();
        assert!(out.estimated_baseline);
        assert!(dir.path().join("theta_l0.csv").exists());
        assert!(dir.path().join("theta_l100.csv").exists());
        let log = std::fs::read_to_string(dir.path().join(LOG_FILE)).unwrap();
        assert_eq!(log.lines().count(), 2);
        let again = cmd_estimate(&setup, 100.0).unwrap();
        assert!(!again.estimated_baseline);
    }

    #[test]
    fn report_requires_policies() {
        let dir = tempfile::tempdir().unwrap();
        assert!(cmd_report(dir.path()).is_err());
    }

    #[test]
    fn single_lambda_report() {
        let dir = tempfile::tempdir().unwrap();
        let setup = micro_setup(dir.path());
        let est = cmd_estimate(&setup, 0.0).unwrap();
        cmd_simulate(&setup, &est.policy_path).unwrap();
        let report = cmd_report(dir.path()).unwrap();
        assert_eq!(report.entries.len(), 1);
        let e = &report.entries[0];
        assert!(e.cost.is_some() && e.spot.is_some());
        assert_eq!(e.sparsity.as_ref().unwrap().l1_shrinkage, 0.0);
        assert!(dir.path().join("report_costs.csv").exists());
    }
}
