use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mpi_inner::app::{run, RunConfig, RunMode, TimeBound, EXIT_CONFIG, EXIT_FAILED};
use mpi_inner::Error;

/// Inner approximations of the maximal positively invariant set of a
/// polynomial ODE, certified by SOS hierarchies and checked by simulation.
///
/// Exit status: 0 when every solve is optimal and validation found no
/// invariance failure, 1 otherwise, 2 for unusable configs.
#[derive(Debug, Parser)]
#[command(name = "mpi-inner", version)]
struct Cli {
    /// TOML run description.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Solve the single order K instead of the configured range.
    #[arg(long, value_name = "K")]
    degree: Option<u32>,

    /// Time bound T of the slack tightening, a number or `auto`.
    #[arg(long, value_name = "T")]
    time_bound: Option<TimeBound>,

    #[arg(long, value_enum)]
    mode: Option<RunMode>,

    /// Simulate and sample every optimal certificate (the default).
    #[arg(long, overrides_with = "no_validate")]
    validate: bool,

    /// Skip validation.
    #[arg(long, overrides_with = "validate")]
    no_validate: bool,

    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Level-set grid points per axis.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
}

impl Cli {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(k) = self.degree {
            c.k_min = Some(k);
            c.k_max = k;
        }
        if let Some(t) = self.time_bound {
            c.time_bound = t;
        }
        if let Some(m) = self.mode {
            c.mode = m;
        }
        if self.validate {
            c.validate = true;
        }
        if self.no_validate {
            c.validate = false;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if let Some(g) = self.grid {
            c.grid = g;
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let mut config = match RunConfig::from_file(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    cli.apply(&mut config);

    match run(&config) {
        Ok(outcome) => {
            for m in &outcome.summary.runs {
                for o in &m.orders {
                    let volume = o.validation.as_ref().map_or(String::from("-"), |v| format!("{:.4}", v.volume));
                    println!(
                        "k = {:2} {:13} {:?}  d = {:.8}  u = {:.2e}  inner volume {volume}",
                        o.k,
                        o.mode.to_string(),
                        o.status,
                        o.objective,
                        o.u
                    );
                }
            }
            for c in &outcome.summary.cross_check {
                println!(
                    "k = {:2} slack/forced symmetric difference: {:.3}% of X",
                    c.k,
                    100.0 * c.fraction_of_set
                );
            }
            println!("outputs in {}", outcome.out_dir.display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED as u8)
        }
    }
}
