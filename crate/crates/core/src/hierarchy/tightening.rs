use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::moments::MomentVector;
use crate::poly::Polynomial;
use crate::semialgebraic::SemialgebraicSet;
use crate::sos::{LinExpr, PolyExpr, PolyVar, SosProgram, SosVar};

use super::OdeSystem;

/// Which dual program is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Free nonnegative slack `u` on the Lie derivative, objective
    /// `w'l + u T l_0`.
    SlackU,
    /// `u` pinned to zero, objective `w'l`.
    ForcedUZero,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::SlackU => "slack-u",
            Mode::ForcedUZero => "forced-u-zero",
        })
    }
}

/// Degree caps of the multipliers in the four identities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeCaps {
    /// Cap of every `q_i, p_i, s_i, t_i^+-` for `i >= 1`: `2 (k - k_i)`.
    pub constraint: Vec<u32>,
    /// Cap of `q0`: the Lie side rounded up to even.
    pub q0: u32,
    /// Cap of `p0, s0, t0`: `2k`.
    pub free: u32,
}

impl DegreeCaps {
    pub fn new(system_degree: u32, half_degrees: &[u32], k: u32) -> Self {
        let constraint: Vec<u32> = half_degrees.iter().map(|&ki| 2 * (k - ki)).collect();
        let lie = (2 * k + system_degree).saturating_sub(1);
        let d = half_degrees
            .iter()
            .zip(&constraint)
            .map(|(&ki, &c)| c + 2 * ki)
            .fold(lie, u32::max);
        DegreeCaps {
            constraint,
            q0: d.div_ceil(2) * 2,
            free: 2 * k,
        }
    }
}

/// An assembled tightening together with handles to its unknowns.
#[derive(Clone, Debug)]
pub struct Tightening {
    pub program: SosProgram,
    pub k: u32,
    pub mode: Mode,
    /// Time bound entering the objective (slack mode only).
    pub time_bound: Option<f64>,
    pub v: PolyVar,
    pub w: PolyVar,
    /// Decision variable of `u` (slack mode only).
    pub u: Option<usize>,
    pub caps: DegreeCaps,
    pub moments: MomentVector,
}

/// Assembles the SOS tightening of order `k`:
///
/// ```text
/// (i)   u - grad v . f = q0 + sum q_i g_i
/// (ii)  w - v - 1      = p0 + sum p_i g_i
/// (iii) w              = s0 + sum s_i g_i
/// (iv)  v              = t0 + sum t_i+ g_i - sum t_i- g_i
/// minimize  w'l + u T l_0
/// ```
///
/// `moments` must cover degree `2k` (it is truncated otherwise). In forced
/// mode `u` is absent and `time_bound` is ignored. `u` is declared after
/// every other unknown, so toggling the mode leaves the other columns alone.
pub fn build_tightening(
    system: &OdeSystem,
    x: &SemialgebraicSet,
    k: u32,
    time_bound: f64,
    mode: Mode,
    moments: &MomentVector,
) -> Result<Tightening> {
    let n = system.n();
    check_dim(n, x.n())?;
    let k_min = x.k_min();
    if k < k_min || k == 0 {
        return Err(Error::OrderTooLow { k, k_min: k_min.max(1) });
    }
    if x.ball_index().is_none() {
        return Err(Error::MissingBallConstraint);
    }
    if mode == Mode::SlackU && !(time_bound.is_finite() && time_bound > 0.0) {
        return Err(Error::InvalidArgument(format!("time bound must be positive, got {time_bound}")));
    }
    let d = 2 * k;
    let l = moments.truncate(d);
    if l.basis.len() != crate::moments::basis_len(n, d) {
        return Err(Error::InvalidArgument(format!(
            "moment vector covers degree < {d}"
        )));
    }

    let g = x.constraints();
    let caps = DegreeCaps::new(system.degree(), &x.half_degrees(), k);
    let mut p = SosProgram::new(n);
    let v = p.declare_poly("v", d)?;
    let w = p.declare_poly("w", d)?;

    let family = |p: &mut SosProgram, name: &str, cap0: u32| -> Result<(SosVar, Vec<SosVar>)> {
        let s0 = p.declare_sos(&format!("{name}0"), cap0)?;
        let si = caps
            .constraint
            .iter()
            .enumerate()
            .map(|(i, &c)| p.declare_sos(&format!("{name}{}", i + 1), c))
            .collect::<Result<Vec<_>>>()?;
        Ok((s0, si))
    };
    let (q0, q) = family(&mut p, "q", caps.q0)?;
    let (p0, pm) = family(&mut p, "p", caps.free)?;
    let (s0, s) = family(&mut p, "s", caps.free)?;
    let (t0, tp) = family(&mut p, "t", caps.free)?;
    let tm = caps
        .constraint
        .iter()
        .enumerate()
        .map(|(i, &c)| p.declare_sos(&format!("t{}-", i + 1), c))
        .collect::<Result<Vec<_>>>()?;
    let u = match mode {
        Mode::SlackU => Some(p.declare_nonneg("u")?),
        Mode::ForcedUZero => None,
    };

    let putinar = |s0: &SosVar, si: &[SosVar], sign: f64| -> Result<PolyExpr> {
        let mut e = s0.expr();
        for (sv, gi) in si.iter().zip(g) {
            e = e.add(&sv.expr().mul_poly(gi)?.scale(sign))?;
        }
        Ok(e)
    };

    let ve = v.expr();
    let we = w.expr();
    let mut lie_lhs = ve.lie_derivative(system.field())?.scale(-1.0);
    if let Some(u) = u {
        lie_lhs = lie_lhs.add(&PolyExpr::scalar(n, u))?;
    }
    p.add_identity("lie", lie_lhs, putinar(&q0, &q, 1.0)?)?;
    let one = PolyExpr::from_polynomial(&Polynomial::constant(n, 1.0));
    p.add_identity("indicator", we.sub(&ve)?.sub(&one)?, putinar(&p0, &pm, 1.0)?)?;
    p.add_identity("w-nonneg", we.clone(), putinar(&s0, &s, 1.0)?)?;
    let mut v_rhs = putinar(&t0, &tp, 1.0)?;
    for (sv, gi) in tm.iter().zip(g) {
        v_rhs = v_rhs.sub(&sv.expr().mul_poly(gi)?)?;
    }
    p.add_identity("boundary", ve, v_rhs)?;

    let mut objective = LinExpr::default();
    for (&id, &lv) in w.coeff_vars.iter().zip(&l.values) {
        objective.add_var(id, lv);
    }
    if let Some(u) = u {
        objective.add_var(u, time_bound * l.values[0]);
    }
    p.minimize(objective)?;

    Ok(Tightening {
        program: p,
        k,
        mode,
        time_bound: (mode == Mode::SlackU).then_some(time_bound),
        v,
        w,
        u,
        caps,
        moments: l,
    })
}
