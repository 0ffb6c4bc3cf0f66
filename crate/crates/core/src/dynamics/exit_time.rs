use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hierarchy::OdeSystem;
use crate::semialgebraic::{uniform_in_ball, Membership, SemialgebraicSet};

use super::integrate::{integrate, DEFAULT_STEP};

/// Trajectories per seeded chunk; chunk `j` draws from seed `seed + j`.
pub const TRAJECTORY_CHUNK: usize = 256;

pub const DEFAULT_EXIT_HORIZON: f64 = 50.0;

/// Censoring share above which an estimate is flagged.
pub const CENSORING_FLAG: f64 = 0.01;

/// Draw budget per requested point before a chunk gives up.
const DRAWS_PER_POINT: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeEstimate {
    /// `(1/N) sum tau_j` over exiting draws; non-exiting draws add zero.
    pub tau_bar: f64,
    pub stderr: f64,
    /// Share of draws still inside at the horizon.
    pub censored_fraction: f64,
    pub censoring_flagged: bool,
    pub samples: usize,
    pub exited: usize,
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
}

/// Uniform interior points of `x`, by rejection from its ball, in seeded
/// chunks of [`TRAJECTORY_CHUNK`]. Deterministic in `(seed, count)`.
pub fn sample_interior(x: &SemialgebraicSet, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let radius = x.ball_radius().ok_or(Error::MissingBallConstraint)?;
    let n = x.n();
    let chunks = count.div_ceil(TRAJECTORY_CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let quota = TRAJECTORY_CHUNK.min(count - j * TRAJECTORY_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(j as u64));
            let mut out = Vec::with_capacity(quota);
            let budget = quota * DRAWS_PER_POINT;
            for _ in 0..budget {
                if out.len() == quota {
                    break;
                }
                let p = uniform_in_ball(&mut rng, n, radius);
                if x.classify(&p) == Membership::Interior {
                    out.push(p);
                }
            }
            if out.len() < quota {
                return Err(Error::EmptySample(budget));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Monte Carlo estimate of the average exit time
/// `(1/lambda(X)) int tau(x) dx` over points whose trajectory leaves `int X`
/// before `horizon`.
pub fn estimate_avg_exit_time(
    system: &OdeSystem,
    x: &SemialgebraicSet,
    samples: usize,
    horizon: f64,
    seed: u64,
) -> Result<ExitTimeEstimate> {
    estimate_avg_exit_time_with_step(system, x, samples, horizon, seed, DEFAULT_STEP)
}

pub fn estimate_avg_exit_time_with_step(
    system: &OdeSystem,
    x: &SemialgebraicSet,
    samples: usize,
    horizon: f64,
    seed: u64,
    step: f64,
) -> Result<ExitTimeEstimate> {
    check_dim(system.n(), x.n())?;
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let points = sample_interior(x, samples, seed)?;
    let taus = points
        .par_iter()
        .map(|p| Ok(integrate(system, x, p, horizon, step)?.exit_time()))
        .collect::<Result<Vec<Option<f64>>>>()?;
    let n = taus.len() as f64;
    let exited = taus.iter().filter(|t| t.is_some()).count();
    let values: Vec<f64> = taus.iter().map(|t| t.unwrap_or(0.0)).collect();
    let mean = values.iter().sum::<f64>() / n;
    let var = if taus.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let censored_fraction = (taus.len() - exited) as f64 / n;
    Ok(ExitTimeEstimate {
        tau_bar: mean,
        stderr: (var / n).sqrt(),
        censored_fraction,
        censoring_flagged: censored_fraction > CENSORING_FLAG,
        samples: taus.len(),
        exited,
        horizon,
        step,
        seed,
    })
}

/// Result of automatic time-bound selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoTimeBound {
    pub time_bound: f64,
    pub estimate: ExitTimeEstimate,
    /// Re-estimate at twice the horizon, run when censoring is flagged.
    pub extended: Option<ExitTimeEstimate>,
}

/// `T = 2 tau_bar`. When censoring is flagged the estimate is repeated at
/// twice the horizon with the same draws; a relative change above 10% (plus
/// three standard errors) means the truncated integral has not settled and
/// selection aborts. If no trajectory exits at all, `T = horizon`.
pub fn auto_time_bound(
    system: &OdeSystem,
    x: &SemialgebraicSet,
    samples: usize,
    horizon: f64,
    seed: u64,
) -> Result<AutoTimeBound> {
    let estimate = estimate_avg_exit_time(system, x, samples, horizon, seed)?;
    let mut extended = None;
    let mut tau = estimate.tau_bar;
    if estimate.censoring_flagged && estimate.exited > 0 {
        let longer = estimate_avg_exit_time(system, x, samples, 2.0 * horizon, seed)?;
        let change = (longer.tau_bar - estimate.tau_bar).abs();
        if change > 0.1 * estimate.tau_bar + 3.0 * longer.stderr {
            return Err(Error::DivergentExitTime(format!(
                "tau_bar = {:.4} at horizon {horizon} but {:.4} at {}; {:.1}% of trajectories are still inside",
                estimate.tau_bar,
                longer.tau_bar,
                2.0 * horizon,
                100.0 * estimate.censored_fraction
            )));
        }
        tau = longer.tau_bar;
        extended = Some(longer);
    }
    let time_bound = if estimate.exited == 0 { horizon } else { 2.0 * tau };
    Ok(AutoTimeBound {
        time_bound,
        estimate,
        extended,
    })
}
