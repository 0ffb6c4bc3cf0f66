use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::{auto_time_bound, symmetric_difference, validate_certificate, AutoTimeBound, ValidationReport};
use crate::error::Result;
use crate::hierarchy::{near_zero_orders, run_hierarchy, Certificate, HierarchyRun, Mode, U_NEAR_ZERO};
use crate::sdp::SolveStatus;

use super::config::{Problem, RunConfig, RunMode, TimeBound};
use super::levelset::{export_levelset_grid, write_levelset_csv};

/// Every solve optimal, no invariance failure.
pub const EXIT_OK: i32 = 0;
/// A solve was not optimal or validation found an invariance failure.
pub const EXIT_FAILED: i32 = 1;
/// The config could not be read or is inconsistent; nothing was solved.
pub const EXIT_CONFIG: i32 = 2;

/// Random streams of a run beyond those used inside validation.
const STREAM_AUTO_TIME: u64 = 6;
const STREAM_CROSS_CHECK: u64 = 7;

fn stream(seed: u64, s: u64) -> u64 {
    seed.wrapping_add(s << 32)
}

/// Condensed validation results of one certificate.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationDigest {
    pub file: String,
    pub passed: bool,
    pub residuals_passed: bool,
    /// Sampled points of `{v < 0} ∩ int X` were found.
    pub inner_nonempty: bool,
    pub volume: f64,
    pub volume_stderr: f64,
    pub max_inner_norm: f64,
    pub members_tested: usize,
    pub invariance_failures: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderSummary {
    pub k: u32,
    pub mode: Mode,
    pub status: SolveStatus,
    pub objective: f64,
    pub moment_value: f64,
    pub gap: f64,
    pub u: f64,
    pub degenerate: bool,
    pub claims_invariance: bool,
    pub certification_passed: bool,
    pub warnings: Vec<String>,
    pub certificate_file: String,
    pub levelset_file: Option<String>,
    pub validation: Option<ValidationDigest>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub time_bound: Option<f64>,
    pub orders: Vec<OrderSummary>,
    pub monotonicity_violations: Vec<(u32, u32)>,
    pub u_not_decreasing: Vec<(u32, u32)>,
}

/// Slack against forced inner sets at one order.
#[derive(Clone, Debug, Serialize)]
pub struct CrossCheck {
    pub k: u32,
    pub symmetric_difference: f64,
    pub stderr: f64,
    /// `symmetric_difference / lambda(X)`.
    pub fraction_of_set: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub n: usize,
    /// Canonical renderings of the parsed polynomials.
    pub dynamics: Vec<String>,
    pub constraints: Vec<String>,
    pub orders: Vec<u32>,
    pub mode: RunMode,
    pub seed: u64,
    pub time_bound: Option<f64>,
    pub auto_time: Option<AutoTimeBound>,
    pub runs: Vec<ModeSummary>,
    pub cross_check: Vec<CrossCheck>,
    pub all_optimal: bool,
    pub invariance_failures: usize,
    pub exit_code: i32,
    pub notes: Vec<String>,
}

/// Everything a run produced, in memory as well as on disk.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: Summary,
    pub runs: Vec<HierarchyRun>,
    pub reports: Vec<ValidationReport>,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    /// Certificate of order `k` and `mode`, if solved.
    pub fn certificate(&self, k: u32, mode: Mode) -> Option<&Certificate> {
        self.runs.iter().filter(|r| r.mode == mode).find_map(|r| r.get(k))
    }

    pub fn report(&self, k: u32, mode: Mode) -> Option<&ValidationReport> {
        self.reports.iter().find(|r| r.k == k && r.mode == mode)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

fn file_name(stem: &str, k: u32, suffix: &str, ext: &str) -> String {
    format!("{stem}_k{k}{suffix}.{ext}")
}

/// Solves, validates and reports one configured run. Files land in
/// `config.out`: `certificate_k{K}.json`, `validation_k{K}.json`,
/// `levelset_k{K}.csv` per order (suffix `_forced` for the forced re-solves
/// of `both` mode) and `summary.json`.
///
/// Config problems are `Err` before anything is solved. Solver failures are
/// reported through the exit code, with all outputs written.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let problem = config.problem()?;
    let out_dir = config.out.clone();
    fs::create_dir_all(&out_dir)?;
    let mut notes = Vec::new();

    let primary = config.primary_mode();
    let (time_bound, auto_time) = match (primary, config.time_bound) {
        (Mode::ForcedUZero, _) => (None, None),
        (Mode::SlackU, TimeBound::Fixed(t)) => (Some(t), None),
        (Mode::SlackU, TimeBound::Auto) => {
            let auto = auto_time_bound(
                &problem.system,
                &problem.set,
                config.auto_time.samples,
                config.auto_time.horizon,
                stream(config.seed, STREAM_AUTO_TIME),
            )?;
            log::info!(
                "automatic time bound T = {:.6} (tau_bar = {:.6} +- {:.2e})",
                auto.time_bound,
                auto.estimate.tau_bar,
                auto.estimate.stderr
            );
            if auto.estimate.exited == 0 {
                notes.push(format!(
                    "no sampled trajectory left X before {}; T set to that horizon",
                    config.auto_time.horizon
                ));
            }
            (Some(auto.time_bound), Some(auto))
        }
    };

    let options = config.hierarchy_options();
    // forced mode ignores the time bound; any positive value will do
    let t_solve = time_bound.unwrap_or(1.0);
    let mut runs = vec![run_hierarchy(
        &problem.system,
        &problem.set,
        &problem.orders,
        t_solve,
        primary,
        &options,
    )?];
    if config.mode == RunMode::Both {
        let orders = near_zero_orders(&runs[0]);
        if orders.is_empty() {
            notes.push(format!("no slack solve reached u <= {U_NEAR_ZERO:e}; forced mode skipped"));
        } else {
            runs.push(run_hierarchy(
                &problem.system,
                &problem.set,
                &orders,
                t_solve,
                Mode::ForcedUZero,
                &options,
            )?);
        }
    }

    let mut reports = Vec::new();
    let mut mode_summaries = Vec::new();
    for (idx, hr) in runs.iter().enumerate() {
        let suffix = if config.mode == RunMode::Both && idx == 1 { "_forced" } else { "" };
        let mut orders = Vec::new();
        for cert in &hr.certificates {
            let (summary, report) = report_order(config, &problem, cert, suffix, auto_time.as_ref())?;
            orders.push(summary);
            reports.extend(report);
        }
        mode_summaries.push(ModeSummary {
            mode: hr.mode,
            time_bound: hr.time_bound,
            orders,
            monotonicity_violations: hr.monotonicity_violations.clone(),
            u_not_decreasing: hr.u_not_decreasing.clone(),
        });
    }

    let mut cross_check = Vec::new();
    if let [slack, forced] = runs.as_slice() {
        let lambda = crate::moments::moment_vector(&problem.set, 0, options.mc_samples, options.seed)?.volume();
        for f in forced.certificates.iter().filter(|c| c.is_optimal()) {
            let Some(s) = slack.get(f.k).filter(|c| c.is_optimal()) else {
                continue;
            };
            let d = symmetric_difference(
                s,
                f,
                &problem.set,
                config.validation.volume_samples,
                stream(config.seed, STREAM_CROSS_CHECK),
            )?;
            log::info!("k = {}: slack and forced inner sets differ on {:.3e} of X", f.k, d.value / lambda);
            cross_check.push(CrossCheck {
                k: f.k,
                symmetric_difference: d.value,
                stderr: d.stderr,
                fraction_of_set: d.value / lambda,
                samples: d.samples,
            });
        }
    }

    let all_optimal = runs.iter().all(HierarchyRun::all_optimal);
    let invariance_failures: usize = reports.iter().map(ValidationReport::invariance_failures).sum();
    let exit_code = if all_optimal && invariance_failures == 0 { EXIT_OK } else { EXIT_FAILED };
    let summary = Summary {
        n: config.n,
        dynamics: problem.system.field().iter().map(ToString::to_string).collect(),
        constraints: problem.set.constraints().iter().map(ToString::to_string).collect(),
        orders: problem.orders.clone(),
        mode: config.mode,
        seed: config.seed,
        time_bound,
        auto_time,
        runs: mode_summaries,
        cross_check,
        all_optimal,
        invariance_failures,
        exit_code,
        notes,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(RunOutcome {
        exit_code,
        summary,
        runs,
        reports,
        out_dir,
    })
}

/// Writes the certificate, level set and validation report of one order.
fn report_order(
    config: &RunConfig,
    problem: &Problem,
    cert: &Certificate,
    suffix: &str,
    auto_time: Option<&AutoTimeBound>,
) -> Result<(OrderSummary, Option<ValidationReport>)> {
    let out = &config.out;
    let certificate_file = file_name("certificate", cert.k, suffix, "json");
    write_json(&out.join(&certificate_file), cert)?;

    let mut levelset_file = None;
    let mut validation = None;
    let mut report = None;
    if cert.is_optimal() {
        let name = file_name("levelset", cert.k, suffix, "csv");
        let rows = export_levelset_grid(cert, &problem.set, config.grid, config.anchor.as_deref())?;
        write_levelset_csv(&rows, cert.n, BufWriter::new(fs::File::create(out.join(&name))?))?;
        levelset_file = Some(name);

        if config.validate {
            let mut r = validate_certificate(cert, &problem.system, &problem.set, &config.validation_config())?;
            if cert.mode == Mode::SlackU {
                r.exit_time = auto_time.map(|a| a.extended.clone().unwrap_or_else(|| a.estimate.clone()));
            }
            let name = file_name("validation", cert.k, suffix, "json");
            write_json(&out.join(&name), &r)?;
            log::info!(
                "k = {} ({}): residuals {}, {} members tested, {} invariance failures, volume {:.4}",
                cert.k,
                cert.mode,
                if r.residuals.passed { "pass" } else { "FAIL" },
                r.invariance.tested,
                r.invariance_failures(),
                r.volume.value
            );
            validation = Some(ValidationDigest {
                file: name,
                passed: r.passed(),
                residuals_passed: r.residuals.passed,
                inner_nonempty: r.invariance.inner_hits > 0 || r.volume.hits > 0,
                volume: r.volume.value,
                volume_stderr: r.volume.stderr,
                max_inner_norm: r.invariance.max_inner_norm,
                members_tested: r.invariance.tested,
                invariance_failures: r.invariance_failures(),
            });
            report = Some(r);
        }
    }

    let summary = OrderSummary {
        k: cert.k,
        mode: cert.mode,
        status: cert.status,
        objective: cert.objective,
        moment_value: cert.moment_value,
        gap: cert.stats.gap,
        u: cert.u,
        degenerate: cert.degenerate,
        claims_invariance: cert.claims_invariance(U_NEAR_ZERO),
        certification_passed: cert.stats.certification.passed(),
        warnings: cert.warnings.clone(),
        certificate_file,
        levelset_file,
        validation,
    };
    Ok((summary, report))
}
