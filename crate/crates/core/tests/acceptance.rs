//! End-to-end acceptance run. Prints one `PASS` or `FAIL` line per
//! criterion and fails if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mpi_inner::app::{run, RunConfig, RunOutcome};
use mpi_inner::dynamics::{estimate_avg_exit_time, inner_set_volume, integrate, sample_interior, DEFAULT_STEP};
use mpi_inner::hierarchy::{run_hierarchy, HierarchyOptions, Mode, OdeSystem, MONOTONICITY_TOL, U_NEAR_ZERO};
use mpi_inner::moments::{ball_moment, box_moment, monte_carlo_moments};
use mpi_inner::sdp::SolveStatus;
use mpi_inner::semialgebraic::SemialgebraicSet;

/// Pinned after the first oracle run, where `{v_3 < 0}` covered the sampled
/// disk entirely (volume `pi` to four digits at every order).
const CONTRACTION_VOLUME_GATE: f64 = 0.99 * PI;

type Verdict = Result<String, String>;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn disk() -> SemialgebraicSet {
    SemialgebraicSet::ball(2, 1.0).unwrap()
}

fn bundled(name: &str, out: &Path) -> RunOutcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    let mut config = RunConfig::from_file(&path).unwrap();
    config.out = out.join(name.trim_end_matches(".toml"));
    run(&config).unwrap()
}

fn van_der_pol(vdp: &RunOutcome) -> Verdict {
    let cert = vdp.certificate(6, Mode::SlackU).ok_or("no slack certificate at k = 6")?;
    check(cert.status == SolveStatus::Optimal, format!("status {:?}", cert.status))?;
    check(cert.u <= U_NEAR_ZERO, format!("u = {:e}", cert.u))?;
    let report = vdp.report(6, Mode::SlackU).ok_or("no validation report")?;
    let inv = &report.invariance;
    check(!cert.degenerate && report.volume.hits > 0, "inner set is empty".into())?;
    check(inv.asserts_invariance, "invariance not asserted".into())?;
    check(inv.tested >= 2000, format!("only {} members tested", inv.tested))?;
    check(inv.sim_horizon >= 20.0, format!("horizon {}", inv.sim_horizon))?;
    check(report.config.descent_tol <= 1e-4, format!("descent slack {}", report.config.descent_tol))?;
    check(inv.failures == 0, format!("{} members left or rose: {:?}", inv.failures, inv.failure_examples))?;
    check(inv.max_inner_norm >= 0.9, format!("max |x| over the inner set {}", inv.max_inner_norm))?;
    Ok(format!(
        "u = {:.1e}, volume {:.4}, {} members kept for {} time units, max |x| {:.4}",
        cert.u, report.volume.value, inv.tested, inv.sim_horizon, inv.max_inner_norm
    ))
}

fn forced_cross_check(vdp: &RunOutcome) -> Verdict {
    let forced = vdp.certificate(6, Mode::ForcedUZero).ok_or("no forced certificate at k = 6")?;
    check(forced.is_optimal(), format!("forced status {:?}", forced.status))?;
    let c = vdp.summary.cross_check.iter().find(|c| c.k == 6).ok_or("no cross-check at k = 6")?;
    check(c.samples >= 100_000, format!("{} samples", c.samples))?;
    check(c.fraction_of_set <= 0.02, format!("symmetric difference {:.4}% of X", 100.0 * c.fraction_of_set))?;
    Ok(format!("symmetric difference {:.4}% of X over {} samples", 100.0 * c.fraction_of_set, c.samples))
}

fn contraction(out: &Path) -> Verdict {
    let f = OdeSystem::radial(2, -1.0);
    let x = disk();
    // oracle: no interior point ever leaves, so the MPI set is the open disk
    for p in sample_interior(&x, 500, 41).unwrap() {
        let r = integrate(&f, &x, &p, 20.0, 1e-2).unwrap();
        check(r.exit_time().is_none(), format!("trajectory from {p:?} left the disk"))?;
    }
    let outcome = bundled("contraction.toml", out);
    let run = &outcome.runs[0];
    check(run.mode == Mode::ForcedUZero, format!("mode {}", run.mode))?;
    let ks: Vec<u32> = run.certificates.iter().map(|c| c.k).collect();
    check(ks == [1, 2, 3], format!("orders {ks:?}"))?;
    check(run.all_optimal(), "a solve was not optimal".into())?;
    let d: Vec<f64> = run.certificates.iter().map(|c| c.objective).collect();
    for w in d.windows(2) {
        check(w[1] <= w[0] + MONOTONICITY_TOL * (1.0 + w[0].abs()), format!("objectives {d:?}"))?;
    }
    let v3 = run.get(3).unwrap();
    let vol = inner_set_volume(v3, &x, 100_000, 43).unwrap();
    check(vol.value >= CONTRACTION_VOLUME_GATE, format!("volume {:.4} < {:.4}", vol.value, CONTRACTION_VOLUME_GATE))?;
    let failures: usize = outcome.reports.iter().map(|r| r.invariance_failures()).sum();
    check(failures == 0, format!("{failures} invariance failures"))?;
    Ok(format!("d_k = {d:.4?}, volume of {{v_3 < 0}} {:.4} (gate {:.4})", vol.value, CONTRACTION_VOLUME_GATE))
}

fn expansion() -> Verdict {
    let f = OdeSystem::radial(2, 1.0);
    let x = disk();
    let oracle = common::expansion_mean_exit_time();
    let est = estimate_avg_exit_time(&f, &x, 4000, 50.0, 61).unwrap();
    check(
        (est.tau_bar - oracle).abs() <= 3.0 * est.stderr,
        format!("tau_bar {:.4} +- {:.4} vs {oracle:.6}", est.tau_bar, est.stderr),
    )?;
    let orders: Vec<u32> = (1..=6).collect();
    let run = run_hierarchy(&f, &x, &orders, 2.0, Mode::SlackU, &HierarchyOptions::default()).unwrap();
    check(run.all_optimal(), format!("statuses {:?}", run.certificates.iter().map(|c| c.status).collect::<Vec<_>>()))?;
    let d: Vec<f64> = run.certificates.iter().map(|c| c.objective).collect();
    for w in d.windows(2) {
        check(w[1] <= w[0] + MONOTONICITY_TOL * (1.0 + w[0].abs()), format!("objectives {d:?}"))?;
    }
    check(d.iter().all(|v| *v >= PI * (1.0 - 1e-6)), format!("objective below pi: {d:?}"))?;
    check(d[5] <= 1.1 * PI, format!("d_6 = {}", d[5]))?;
    let vol = inner_set_volume(run.get(6).unwrap(), &x, 100_000, 67).unwrap();
    check(vol.value <= 0.05 * PI, format!("volume of {{v_6 < 0}} {:.4}", vol.value))?;
    Ok(format!(
        "tau_bar {:.4} +- {:.4}, d_6 = {:.6}, volume of {{v_6 < 0}} {:.4}",
        est.tau_bar, est.stderr, d[5], vol.value
    ))
}

fn moments() -> Verdict {
    let mut worst = 0.0f64;
    let mut compare = |exact: &[f64], oracle: &[f64], what: &str| -> Result<(), String> {
        let floor = exact.iter().filter(|v| **v != 0.0).fold(f64::INFINITY, |m, v| m.min(v.abs()));
        for (e, o) in exact.iter().zip(oracle) {
            let rel = (e - o).abs() / e.abs().max(floor);
            worst = worst.max(rel);
            check(rel <= 1e-10, format!("{what}: {e:e} vs {o:e}"))?;
        }
        Ok(())
    };
    for n in 1..=3 {
        let alphas = common::exponents_up_to(n, 10);
        let oracle = common::ball_moments_by_quadrature(n, 1.0, &alphas, 1e-15);
        let exact: Vec<f64> = alphas.iter().map(|a| ball_moment(n, 1.0, a)).collect();
        compare(&exact, &oracle, &format!("ball n = {n}"))?;
        let bounds: Vec<(f64, f64)> = [(-1.0, 1.0), (-0.5, 0.75), (0.2, 1.1)][..n].to_vec();
        let oracle = common::box_moments_by_quadrature(&bounds, &alphas, 1e-15);
        let exact: Vec<f64> = alphas.iter().map(|a| box_moment(&bounds, a).unwrap()).collect();
        compare(&exact, &oracle, &format!("box n = {n}"))?;

        // Monte Carlo on the same cases
        let cases = [
            (SemialgebraicSet::ball(n, 1.0).unwrap(), None),
            (SemialgebraicSet::boxed(&bounds).unwrap().ensure_ball_constraint(2.0).unwrap(), Some(&bounds)),
        ];
        for (set, b) in cases {
            let mc = monte_carlo_moments(&set, 10, 200_000, 71 + n as u64).unwrap();
            let se = mc.stderr.as_ref().unwrap();
            for (i, m) in mc.basis.iter().enumerate() {
                let exact = match b {
                    Some(b) => box_moment(b, m.exponents()).unwrap(),
                    None => ball_moment(n, 1.0, m.exponents()),
                };
                let dev = (mc.values[i] - exact).abs();
                let ok = if se[i] == 0.0 { dev <= 1e-12 * exact.abs().max(1.0) } else { dev <= 4.0 * se[i] };
                check(ok, format!("Monte Carlo n = {n} {m}: off by {dev:e}, stderr {:e}", se[i]))?;
            }
        }
    }
    Ok(format!("worst relative deviation {worst:.1e}; Monte Carlo within 4 stderr"))
}

fn soundness() -> Verdict {
    let x = disk();
    let vdp = OdeSystem::van_der_pol(1.02);
    let cases = [
        (OdeSystem::radial(2, -1.0), vec![1, 2, 3], 1.0, Mode::ForcedUZero, "contraction"),
        (OdeSystem::radial(2, 1.0), (1..=6).collect(), 2.0, Mode::SlackU, "expansion"),
        (vdp.clone(), vec![6], 100.0 / PI, Mode::SlackU, "van der pol"),
        (vdp, vec![6], 100.0 / PI, Mode::ForcedUZero, "van der pol"),
    ];
    let (mut checked, mut min_eig, mut max_gap) = (0, f64::INFINITY, 0.0f64);
    for (f, orders, t, mode, name) in cases {
        for k in orders {
            let Some(s) = common::check_soundness(&f, &x, k, t, mode, 10_000, 83) else {
                continue;
            };
            check(s.violations.is_empty(), format!("{name} k = {k} {mode}: {:?}", s.violations))?;
            checked += 1;
            min_eig = min_eig.min(s.min_eigenvalue);
            max_gap = max_gap.max(s.gap);
        }
    }
    check(checked > 0, "no optimal certificate to check".into())?;
    Ok(format!("{checked} optimal certificates; min Gram eigenvalue {min_eig:.1e}, max gap {max_gap:.1e}"))
}

fn numerics() -> Verdict {
    let (coarse, fine, ratio) = common::rk4_order_ratio(0.1);
    check((8.0..=32.0).contains(&ratio), format!("error ratio {ratio} ({coarse:e} / {fine:e})"))?;
    let r = integrate(&OdeSystem::radial(2, 1.0), &disk(), &[0.5, 0.0], 5.0, DEFAULT_STEP).unwrap();
    let t = r.exit_time().ok_or("no exit")?;
    let err = (t - std::f64::consts::LN_2).abs();
    check(err <= 1e-6, format!("exit time {t}"))?;
    Ok(format!("RK4 error ratio {ratio:.2}; exit time off ln 2 by {err:.1e}"))
}

/// Writes straight to stderr so the verdicts show without `--nocapture`.
fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

#[test]
fn acceptance() {
    let out = tempfile::tempdir().unwrap();
    let vdp_outcome = catch_unwind(AssertUnwindSafe(|| bundled("van_der_pol.toml", out.path())));

    let from_vdp = |f: fn(&RunOutcome) -> Verdict| -> Box<dyn FnOnce() -> Verdict> {
        match &vdp_outcome {
            Ok(o) => {
                let o = o.clone();
                Box::new(move || f(&o))
            }
            Err(_) => Box::new(|| Err("Van der Pol run panicked".into())),
        }
    };
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Verdict>)> = vec![
        ("Van der Pol reproduction", from_vdp(van_der_pol)),
        ("forced-mode cross-check", from_vdp(forced_cross_check)),
        ("contraction oracle", Box::new(|| contraction(out.path()))),
        ("expansion oracle", Box::new(expansion)),
        ("moment exactness", Box::new(moments)),
        ("certificate soundness", Box::new(soundness)),
        ("numerical-analysis sanity", Box::new(numerics)),
    ];

    let mut failed = Vec::new();
    for (i, (name, body)) in criteria.into_iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(detail) => report(&format!("PASS criterion {}: {name}: {detail}", i + 1)),
            Err(detail) => {
                report(&format!("FAIL criterion {}: {name}: {detail}", i + 1));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
