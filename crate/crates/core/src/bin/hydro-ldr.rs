use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hydro_ldr::analytics::cost_metrics;
use hydro_ldr::run::{self, Setup};
use hydro_ldr::Result;

/// Regularized linear decision rules for hydrothermal dispatch.
#[derive(Parser)]
#[command(name = "hydro-ldr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the policy for one λ.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
    },
    /// Simulate a policy over the out-of-sample scenarios.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Policy CSV; defaults to `theta_l{λ}.csv` in the output directory.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
    },
    /// Estimate and simulate every λ in the grid and select the best.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated λ values; 0 is always added.
        #[arg(long)]
        grid: Option<String>,
        /// Worker threads for the per-λ stage.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Consolidate the metrics of a run directory.
    Report {
        /// Run directory to read and write.
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Write the in-sample and out-of-sample scenario CSVs.
    GenScenarios {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// `run.toml` path or `fixture:<name>` (case1, case2, micro).
    #[arg(long)]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn setup(&self) -> Result<Setup> {
        let mut setup = Setup::open(&self.config)?;
        if let Some(seed) = self.seed {
            setup.seed = seed;
        }
        if let Some(out) = &self.out {
            setup.out.clone_from(out);
        }
        Ok(setup)
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Estimate { common, lambda } => {
            let setup = common.setup()?;
            let out = run::cmd_estimate(&setup, lambda)?;
            println!(
                "{}: {} of {} coefficients nonzero, in-sample cost {:.6}",
                out.policy_path.display(),
                out.policy.nonzero_count(),
                out.policy.n_penalized(),
                out.policy.in_sample_cost
            );
        }
        Command::Simulate { common, policy, lambda } => {
            let setup = common.setup()?;
            let path = policy.unwrap_or_else(|| setup.policy_path(lambda));
            let sim = run::cmd_simulate(&setup, &path)?;
            let m = cost_metrics(&sim.scenario_costs)?;
            println!(
                "{}: {} scenarios, mean cost {:.6}, p5 {:.6}, p95 {:.6}",
                path.display(),
                sim.n_scenarios(),
                m.mean,
                m.p5,
                m.p95
            );
        }
        Command::Sweep { common, grid, jobs } => {
            let mut setup = common.setup()?;
            if let Some(g) = grid {
                setup.grid = run::parse_grid(&g)?;
            }
            setup.jobs = jobs;
            let report = run::cmd_sweep(&setup)?;
            for r in &report.rows {
                let mark = if r.lambda == report.selected_lambda { "*" } else { " " };
                println!(
                    "{mark} lambda {:<10} z_m {:>14.4} nonzero {:.4}",
                    r.lambda, r.z_m, r.nonzero_fraction
                );
            }
            println!("selected lambda {} gain {:.4}", report.selected_lambda, report.gain);
        }
        Command::Report { run_dir } => {
            let report = run::cmd_report(&run_dir)?;
            println!("{}: {} policies", run_dir.join("report.json").display(), report.entries.len());
        }
        Command::GenScenarios { common } => {
            let setup = common.setup()?;
            for p in run::cmd_gen_scenarios(&setup)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,highs=error")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
