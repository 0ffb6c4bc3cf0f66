//! Monomial bases and Lebesgue moments `l_a = int_X x^a dx`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Monomial, Polynomial};
use crate::semialgebraic::{ball_radius_of, ball_volume, uniform_in_ball, Membership, SemialgebraicSet};

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Samples per Monte Carlo work unit; unit `j` draws from seed `seed + j`.
pub const MC_CHUNK: usize = 1 << 16;

/// All monomials in `n` variables of total degree `<= d`, graded-lex ordered.
///
/// The basis of degree `d` is a prefix of the basis of any higher degree.
pub fn basis(n: usize, d: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for deg in 0..=d {
        let mut cur = vec![0u32; n];
        push_compositions(&mut out, &mut cur, 0, deg);
    }
    out
}

fn push_compositions(out: &mut Vec<Monomial>, cur: &mut Vec<u32>, pos: usize, remaining: u32) {
    let n = cur.len();
    if n == 0 {
        if remaining == 0 {
            out.push(Monomial::new(Vec::new()));
        }
        return;
    }
    if pos == n - 1 {
        cur[pos] = remaining;
        out.push(Monomial::new(cur.clone()));
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e;
        push_compositions(out, cur, pos + 1, remaining - e);
    }
    cur[pos] = 0;
}

/// `binomial(n + d, d)`: the size of [`basis`].
pub fn basis_len(n: usize, d: u32) -> usize {
    let d = d as usize;
    (1..=d).fold(1usize, |acc, i| acc * (n + i) / i)
}

/// `Gamma(m / 2)` for a positive integer `m`, by the half-step recurrence.
fn gamma_half(m: u32) -> f64 {
    debug_assert!(m > 0);
    let (mut value, mut x) = if m % 2 == 0 {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    let target = f64::from(m) / 2.0;
    while x < target {
        value *= x;
        x += 1.0;
    }
    value
}

/// `int_{|x| <= R} x^alpha dx`.
///
/// Zero when some `alpha_j` is odd; otherwise
/// `R^(n+|a|) * 2 prod_j Gamma((a_j+1)/2) / ((n+|a|) Gamma(sum_j (a_j+1)/2))`.
pub fn ball_moment(n: usize, radius: f64, alpha: &[u32]) -> f64 {
    debug_assert_eq!(alpha.len(), n);
    if alpha.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    let total: u32 = alpha.iter().sum();
    let dim = n as u32 + total;
    let numer: f64 = alpha.iter().map(|&a| gamma_half(a + 1)).product();
    // sum_j (a_j + 1)/2 = dim / 2
    radius.powi(dim as i32) * 2.0 * numer / (f64::from(dim) * gamma_half(dim))
}

/// `int_box x^alpha dx = prod_j (hi_j^(a_j+1) - lo_j^(a_j+1)) / (a_j + 1)`.
pub fn box_moment(bounds: &[(f64, f64)], alpha: &[u32]) -> Result<f64> {
    if bounds.len() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: bounds.len(),
            found: alpha.len(),
        });
    }
    let mut value = 1.0;
    for (&(lo, hi), &a) in bounds.iter().zip(alpha) {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("degenerate interval [{lo}, {hi}]")));
        }
        let p = (a + 1) as i32;
        value *= (hi.powi(p) - lo.powi(p)) / f64::from(a + 1);
    }
    Ok(value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentMethod {
    Ball { radius: f64 },
    Box { bounds: Vec<(f64, f64)> },
    MonteCarlo { samples: usize, accepted: usize, seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentVector {
    pub basis: Vec<Monomial>,
    pub values: Vec<f64>,
    /// Standard errors, Monte Carlo path only.
    pub stderr: Option<Vec<f64>>,
    pub method: MomentMethod,
}

impl MomentVector {
    /// Lebesgue volume of `X` (the moment of the constant monomial).
    pub fn volume(&self) -> f64 {
        self.values[0]
    }

    /// Restriction to the degree-`d` prefix of the basis.
    pub fn truncate(&self, d: u32) -> MomentVector {
        let len = self.basis.iter().take_while(|m| m.degree() <= d).count();
        MomentVector {
            basis: self.basis[..len].to_vec(),
            values: self.values[..len].to_vec(),
            stderr: self.stderr.as_ref().map(|s| s[..len].to_vec()),
            method: self.method.clone(),
        }
    }
}

enum Shape {
    Ball(f64),
    Interval(usize, f64, f64),
}

/// Recognises `a*x_j + b >= 0` and `a*x_j^2 + b*x_j + c >= 0` (`a < 0`) as
/// intervals on the single coordinate `x_j`.
fn interval_of(g: &Polynomial) -> Option<(usize, f64, f64)> {
    let n = g.n();
    let mut var = None;
    let (mut a2, mut a1, mut a0) = (0.0, 0.0, 0.0);
    for (m, c) in g.terms() {
        let e = m.exponents();
        let nz: Vec<usize> = (0..n).filter(|&j| e[j] > 0).collect();
        match nz.as_slice() {
            [] => a0 = c,
            [j] => {
                if *var.get_or_insert(*j) != *j {
                    return None;
                }
                match e[*j] {
                    1 => a1 = c,
                    2 => a2 = c,
                    _ => return None,
                }
            }
            _ => return None,
        }
    }
    let j = var?;
    if a2 == 0.0 {
        if a1 > 0.0 {
            Some((j, -a0 / a1, f64::INFINITY))
        } else if a1 < 0.0 {
            Some((j, f64::NEG_INFINITY, -a0 / a1))
        } else {
            None
        }
    } else if a2 < 0.0 {
        let disc = a1 * a1 - 4.0 * a2 * a0;
        if disc <= 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let r1 = (-a1 + s) / (2.0 * a2);
        let r2 = (-a1 - s) / (2.0 * a2);
        Some((j, r1.min(r2), r1.max(r2)))
    } else {
        None
    }
}

fn closed_form_geometry(x: &SemialgebraicSet) -> Option<MomentMethod> {
    let n = x.n();
    let mut shapes = Vec::new();
    for g in x.constraints() {
        if let Some(r) = ball_radius_of(g) {
            shapes.push(Shape::Ball(r));
        } else if let Some((j, lo, hi)) = interval_of(g) {
            shapes.push(Shape::Interval(j, lo, hi));
        } else {
            return None;
        }
    }
    let radius = shapes
        .iter()
        .filter_map(|s| match s {
            Shape::Ball(r) => Some(*r),
            _ => None,
        })
        .reduce(f64::min);
    let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
    let mut any_interval = false;
    for s in &shapes {
        if let Shape::Interval(j, lo, hi) = s {
            any_interval = true;
            bounds[*j].0 = bounds[*j].0.max(*lo);
            bounds[*j].1 = bounds[*j].1.min(*hi);
        }
    }
    if !any_interval {
        return radius.map(|radius| MomentMethod::Ball { radius });
    }
    let complete = bounds.iter().all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo < hi);
    if !complete {
        return None;
    }
    let corner_sq: f64 = bounds.iter().map(|(lo, hi)| (lo * lo).max(hi * hi)).sum();
    match radius {
        Some(r) if r * r < corner_sq => None,
        _ => Some(MomentMethod::Box { bounds }),
    }
}

/// Moments of Lebesgue measure on `X` for every monomial of degree `<= d`.
///
/// Uses the closed form when `X` is a ball, or a box possibly intersected with
/// a ball that contains it; otherwise Monte Carlo over the set's ball
/// constraint with rejection, reporting standard errors.
pub fn moment_vector(x: &SemialgebraicSet, d: u32, mc_samples: usize, seed: u64) -> Result<MomentVector> {
    let n = x.n();
    let b = basis(n, d);
    match closed_form_geometry(x) {
        Some(MomentMethod::Ball { radius }) => {
            let values = b.iter().map(|m| ball_moment(n, radius, m.exponents())).collect();
            Ok(MomentVector {
                basis: b,
                values,
                stderr: None,
                method: MomentMethod::Ball { radius },
            })
        }
        Some(MomentMethod::Box { bounds }) => {
            let values = b
                .iter()
                .map(|m| box_moment(&bounds, m.exponents()))
                .collect::<Result<_>>()?;
            Ok(MomentVector {
                basis: b,
                values,
                stderr: None,
                method: MomentMethod::Box { bounds },
            })
        }
        _ => monte_carlo_moments(x, d, mc_samples, seed),
    }
}

struct Accum {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    accepted: usize,
}

/// Monte Carlo moments regardless of geometry.
pub fn monte_carlo_moments(x: &SemialgebraicSet, d: u32, samples: usize, seed: u64) -> Result<MomentVector> {
    let n = x.n();
    let radius = x.ball_radius().ok_or(Error::MissingBallConstraint)?;
    if samples == 0 {
        return Err(Error::EmptySample(0));
    }
    let b = basis(n, d);
    let exps: Vec<Vec<usize>> = b
        .iter()
        .map(|m| m.exponents().iter().map(|&e| e as usize).collect())
        .collect();
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<Accum> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let count = MC_CHUNK.min(samples - j * MC_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(j as u64));
            let mut acc = Accum {
                sum: vec![0.0; b.len()],
                sum_sq: vec![0.0; b.len()],
                accepted: 0,
            };
            let mut pow = vec![vec![1.0; d as usize + 1]; n];
            for _ in 0..count {
                let p = uniform_in_ball(&mut rng, n, radius);
                if x.classify(&p) == Membership::Outside {
                    continue;
                }
                acc.accepted += 1;
                for (k, &pk) in p.iter().enumerate() {
                    for e in 1..=d as usize {
                        pow[k][e] = pow[k][e - 1] * pk;
                    }
                }
                for (i, e) in exps.iter().enumerate() {
                    let v: f64 = e.iter().enumerate().map(|(k, &ek)| pow[k][ek]).product();
                    acc.sum[i] += v;
                    acc.sum_sq[i] += v * v;
                }
            }
            acc
        })
        .collect();
    let mut sum = vec![0.0; b.len()];
    let mut sum_sq = vec![0.0; b.len()];
    let mut accepted = 0;
    for part in &partials {
        accepted += part.accepted;
        for i in 0..b.len() {
            sum[i] += part.sum[i];
            sum_sq[i] += part.sum_sq[i];
        }
    }
    if accepted == 0 {
        return Err(Error::EmptySample(samples));
    }
    let vol = ball_volume(n, radius);
    let nf = samples as f64;
    let mut values = Vec::with_capacity(b.len());
    let mut stderr = Vec::with_capacity(b.len());
    for i in 0..b.len() {
        let mean = sum[i] / nf;
        let var = (sum_sq[i] / nf - mean * mean).max(0.0) * nf / (nf - 1.0).max(1.0);
        values.push(vol * mean);
        stderr.push(vol * (var / nf).sqrt());
    }
    Ok(MomentVector {
        basis: b,
        values,
        stderr: Some(stderr),
        method: MomentMethod::MonteCarlo { samples, accepted, seed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn basis_examples() {
        let b: Vec<String> = basis(2, 2).iter().map(|m| m.to_string()).collect();
        assert_eq!(b, ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]);
        let b: Vec<String> = basis(1, 3).iter().map(|m| m.to_string()).collect();
        assert_eq!(b, ["1", "x1", "x1^2", "x1^3"]);
        assert_eq!(basis(3, 1).len(), 4);
        for n in 1..4 {
            for d in 0..7 {
                assert_eq!(basis(n, d).len(), basis_len(n, d));
            }
        }
    }

    #[test]
    fn basis_is_sorted_and_prefix_closed() {
        let b = basis(3, 5);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(&b[..basis_len(3, 3)], basis(3, 3).as_slice());
    }

    #[test]
    fn gamma_half_values() {
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(2), 1.0);
        assert!((gamma_half(3) - PI.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(gamma_half(10), 24.0);
    }

    #[test]
    fn ball_moment_examples() {
        assert!((ball_moment(2, 1.0, &[0, 0]) - PI).abs() < 1e-14);
        assert_eq!(ball_moment(2, 1.0, &[1, 0]), 0.0);
        assert!((ball_moment(2, 1.0, &[2, 0]) - PI / 4.0).abs() < 1e-14);
        assert!((ball_moment(2, 1.0, &[2, 2]) - PI / 24.0).abs() < 1e-14);
        assert!((ball_moment(3, 1.0, &[0, 0, 0]) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn box_moment_examples() {
        let sq = [(-1.0, 1.0), (-1.0, 1.0)];
        assert_eq!(box_moment(&sq, &[0, 0]).unwrap(), 4.0);
        assert!((box_moment(&sq, &[2, 0]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(box_moment(&[(0.0, 1.0)], &[3]).unwrap(), 0.25);
        assert!(box_moment(&[(1.0, 1.0)], &[0]).is_err());
    }

    #[test]
    fn moment_vector_closed_forms() {
        let disk = SemialgebraicSet::ball(2, 1.0).unwrap();
        let m = moment_vector(&disk, 2, 10, 0).unwrap();
        let expected = [PI, 0.0, 0.0, PI / 4.0, 0.0, PI / 4.0];
        for (a, b) in m.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(matches!(m.method, MomentMethod::Ball { .. }));

        let sq = SemialgebraicSet::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let m = moment_vector(&sq, 1, 10, 0).unwrap();
        assert_eq!(m.values, vec![4.0, 0.0, 0.0]);

        // box plus a containing ball keeps the box closed form
        let sq_ball = sq.ensure_ball_constraint(2.0).unwrap();
        let m = moment_vector(&sq_ball, 2, 10, 0).unwrap();
        assert!(matches!(m.method, MomentMethod::Box { .. }));
        assert_eq!(m.volume(), 4.0);
    }

    #[test]
    fn disk_with_redundant_box_goes_monte_carlo() {
        let mut cons = SemialgebraicSet::boxed(&[(-1.0, 1.0), (-1.0, 1.0)])
            .unwrap()
            .constraints()
            .to_vec();
        cons.push(Polynomial::ball(2, 1.0));
        let x = SemialgebraicSet::new(2, cons).unwrap();
        let m = moment_vector(&x, 2, 200_000, 0).unwrap();
        assert!(matches!(m.method, MomentMethod::MonteCarlo { .. }));
        let se = m.stderr.as_ref().unwrap()[0];
        // every draw from the unit ball lands in X, so the volume is exact
        assert!((m.volume() - PI).abs() <= 3.0 * se + 1e-12, "{} vs pi, se {se}", m.volume());
        let se2 = m.stderr.as_ref().unwrap()[3];
        assert!(se2 > 0.0);
        assert!((m.values[3] - PI / 4.0).abs() <= 3.0 * se2);
    }

    #[test]
    fn monte_carlo_requires_ball_and_interior() {
        let sq = SemialgebraicSet::boxed(&[(0.0, 1.0)]).unwrap();
        assert!(matches!(
            monte_carlo_moments(&sq, 1, 100, 0),
            Err(Error::MissingBallConstraint)
        ));
        // ball intersected with x1 >= 2: empty
        let g = crate::poly::parse_polynomial("x1 - 2", 2).unwrap();
        let x = SemialgebraicSet::new(2, vec![g, Polynomial::ball(2, 1.0)]).unwrap();
        assert!(matches!(moment_vector(&x, 1, 1000, 0), Err(Error::EmptySample(1000))));
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let x = SemialgebraicSet::ball(2, 1.0).unwrap();
        let a = monte_carlo_moments(&x, 2, 100_000, 9).unwrap();
        let b = monte_carlo_moments(&x, 2, 100_000, 9).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn truncate_keeps_prefix() {
        let x = SemialgebraicSet::ball(2, 1.0).unwrap();
        let m = moment_vector(&x, 4, 0, 0).unwrap();
        let t = m.truncate(2);
        assert_eq!(t.basis, basis(2, 2));
        assert_eq!(t.values, m.values[..6].to_vec());
    }
}
