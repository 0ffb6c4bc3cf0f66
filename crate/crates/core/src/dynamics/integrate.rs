use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hierarchy::OdeSystem;
use crate::semialgebraic::{Membership, SemialgebraicSet};

pub const DEFAULT_STEP: f64 = 1e-3;

/// Time resolution of the exit-time bisection.
pub const EXIT_TIME_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    /// First time `min_i g_i` reaches zero, and the state there.
    ExitedAt { time: f64, point: Vec<f64> },
    StayedUntilHorizon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub outcome: Outcome,
    /// `(t, x(t))` at each requested sample time reached before exit.
    pub samples: Vec<(f64, Vec<f64>)>,
    /// State at the horizon, or at the exit point.
    pub final_state: Vec<f64>,
    /// Smallest `min_i g_i` over the step grid (and exit point).
    pub min_constraint: f64,
    /// `max(0, -min_constraint)`.
    pub max_violation: f64,
    pub steps: usize,
}

impl TrajectoryResult {
    pub fn exit_time(&self) -> Option<f64> {
        match self.outcome {
            Outcome::ExitedAt { time, .. } => Some(time),
            Outcome::StayedUntilHorizon => None,
        }
    }
}

/// Fixed-step classical RK4 with scratch buffers.
pub(crate) struct Rk4<'a> {
    system: &'a OdeSystem,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Rk4<'a> {
    pub(crate) fn new(system: &'a OdeSystem) -> Self {
        let n = system.n();
        Rk4 {
            system,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
        }
    }

    /// `out = Phi_h(x)`.
    pub(crate) fn step(&mut self, x: &[f64], h: f64, out: &mut [f64]) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        self.system.eval_into(x, k1);
        for i in 0..x.len() {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        self.system.eval_into(tmp, k2);
        for i in 0..x.len() {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        self.system.eval_into(tmp, k3);
        for i in 0..x.len() {
            tmp[i] = x[i] + h * k3[i];
        }
        self.system.eval_into(tmp, k4);
        for i in 0..x.len() {
            out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Integrates `x0` to `horizon` and reports the first exit from `int X`.
pub fn integrate(
    system: &OdeSystem,
    x: &SemialgebraicSet,
    x0: &[f64],
    horizon: f64,
    step: f64,
) -> Result<TrajectoryResult> {
    integrate_observed(system, x, x0, horizon, step, &[], |_, _| {})
}

/// As [`integrate`], recording states at `sample_times` (ascending) and
/// calling `observer(t, x)` on `x0` and after every accepted step.
///
/// Exits are detected on the step grid: `min_i g_i <= 0` at a step end
/// triggers bisection in time on `min_i g_i` within that step, until the
/// bracket is below [`EXIT_TIME_TOL`] and the returned point is within
/// `tol_b` of the boundary.
pub fn integrate_observed<F>(
    system: &OdeSystem,
    x: &SemialgebraicSet,
    x0: &[f64],
    horizon: f64,
    step: f64,
    sample_times: &[f64],
    mut observer: F,
) -> Result<TrajectoryResult>
where
    F: FnMut(f64, &[f64]),
{
    check_dim(system.n(), x.n())?;
    check_dim(system.n(), x0.len())?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if x.classify(x0) != Membership::Interior {
        return Err(Error::NotInterior(x0.to_vec()));
    }

    let n = x0.len();
    let mut rk = Rk4::new(system);
    let mut cur = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut t = 0.0;
    let mut samples = Vec::new();
    let mut pending = sample_times.iter().copied().filter(|&s| (0.0..=horizon).contains(&s)).peekable();
    while let Some(&s) = pending.peek() {
        if s > 0.0 {
            break;
        }
        samples.push((0.0, cur.clone()));
        pending.next();
    }
    let mut min_constraint = x.min_constraint(&cur);
    observer(0.0, &cur);

    let total = (horizon / step).ceil() as usize;
    for i in 0..total {
        let h = if i + 1 == total { horizon - t } else { step };
        if h <= 0.0 {
            break;
        }
        rk.step(&cur, h, &mut next);
        let t_next = if i + 1 == total { horizon } else { t + h };
        if let Some(bad) = next.iter().find(|v| !v.is_finite()) {
            log::debug!("non-finite component {bad} after t = {t}");
            return Err(Error::NonFinite(t_next));
        }
        while let Some(&s) = pending.peek() {
            if s > t_next {
                break;
            }
            let g_next = x.min_constraint(&next);
            if g_next <= 0.0 {
                break;
            }
            let mut xs = vec![0.0; n];
            rk.step(&cur, s - t, &mut xs);
            samples.push((s, xs));
            pending.next();
        }
        let g = x.min_constraint(&next);
        if g <= 0.0 {
            let (dt, point) = refine_exit(&mut rk, x, &cur, h);
            let gp = x.min_constraint(&point);
            min_constraint = min_constraint.min(gp);
            let time = t + dt;
            while let Some(&s) = pending.peek() {
                if s > time {
                    break;
                }
                let mut xs = vec![0.0; n];
                rk.step(&cur, s - t, &mut xs);
                samples.push((s, xs));
                pending.next();
            }
            observer(time, &point);
            return Ok(TrajectoryResult {
                outcome: Outcome::ExitedAt {
                    time,
                    point: point.clone(),
                },
                samples,
                final_state: point,
                min_constraint,
                max_violation: (-min_constraint).max(0.0),
                steps: i + 1,
            });
        }
        min_constraint = min_constraint.min(g);
        std::mem::swap(&mut cur, &mut next);
        t = t_next;
        observer(t, &cur);
    }

    Ok(TrajectoryResult {
        outcome: Outcome::StayedUntilHorizon,
        samples,
        final_state: cur,
        min_constraint,
        max_violation: (-min_constraint).max(0.0),
        steps: total,
    })
}

/// Bisection in `s in [0, h]` on `min_i g_i(Phi_s(start))`, where the value
/// at `s = 0` is positive and at `s = h` is not. Returns the offset and
/// state on the nonpositive side of the bracket.
fn refine_exit(rk: &mut Rk4<'_>, x: &SemialgebraicSet, start: &[f64], h: f64) -> (f64, Vec<f64>) {
    let n = start.len();
    let mut lo = 0.0;
    let mut hi = h;
    let mut state = vec![0.0; n];
    rk.step(start, hi, &mut state);
    let mut g_hi = x.min_constraint(&state);
    let mut probe = vec![0.0; n];
    for _ in 0..200 {
        if hi - lo <= EXIT_TIME_TOL && g_hi.abs() <= 0.5 * x.boundary_tol() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        rk.step(start, mid, &mut probe);
        let g = x.min_constraint(&probe);
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            g_hi = g;
            state.copy_from_slice(&probe);
        }
    }
    (hi, state)
}
