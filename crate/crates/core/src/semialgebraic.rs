//! Basic semialgebraic constraint sets `X = {x : g_i(x) >= 0}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::poly::{Monomial, PolyEvaluator, Polynomial};

pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-9;

const ANCHOR_ATTEMPTS: usize = 10_000;
const RAY_ATTEMPTS_PER_POINT: usize = 64;

/// Sign-test classification of a point against `X`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Membership {
    Interior,
    Boundary,
    Outside,
}

#[derive(Clone, Debug)]
pub struct SemialgebraicSet {
    n: usize,
    constraints: Vec<Polynomial>,
    evaluators: Vec<PolyEvaluator>,
    ball_index: Option<usize>,
    ball_radius: Option<f64>,
    boundary_tol: f64,
}

/// Radius `R` if `g` is exactly `R^2 - |x|^2`.
pub fn ball_radius_of(g: &Polynomial) -> Option<f64> {
    let n = g.n();
    if n == 0 || g.num_terms() != n + 1 {
        return None;
    }
    let c0 = g.coeff(&Monomial::one(n));
    if c0 <= 0.0 {
        return None;
    }
    for j in 0..n {
        let mut e = vec![0; n];
        e[j] = 2;
        if (g.coeff(&Monomial::new(e)) + 1.0).abs() > 1e-12 {
            return None;
        }
    }
    Some(c0.sqrt())
}

impl SemialgebraicSet {
    pub fn new(n: usize, constraints: Vec<Polynomial>) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::InvalidArgument(
                "a constraint set needs at least one polynomial".into(),
            ));
        }
        for g in &constraints {
            check_dim(n, g.n())?;
            if g.is_zero() {
                return Err(Error::InvalidArgument("zero constraint polynomial".into()));
            }
        }
        let (ball_index, ball_radius) = constraints
            .iter()
            .enumerate()
            .find_map(|(i, g)| ball_radius_of(g).map(|r| (Some(i), Some(r))))
            .unwrap_or((None, None));
        let evaluators = constraints.iter().map(Polynomial::evaluator).collect();
        Ok(SemialgebraicSet {
            n,
            constraints,
            evaluators,
            ball_index,
            ball_radius,
            boundary_tol: DEFAULT_BOUNDARY_TOL,
        })
    }

    /// The ball `|x| <= R` described by the single constraint `R^2 - |x|^2`.
    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("ball radius {radius} must be positive")));
        }
        Self::new(n, vec![Polynomial::ball(n, radius)])
    }

    /// The box `prod [lo_j, hi_j]` as constraints `(hi_j - x_j)(x_j - lo_j) >= 0`.
    pub fn boxed(bounds: &[(f64, f64)]) -> Result<Self> {
        let n = bounds.len();
        let mut constraints = Vec::with_capacity(n);
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!("degenerate interval [{lo}, {hi}]")));
            }
            let xj = Polynomial::var(n, j)?;
            let upper = Polynomial::constant(n, hi).sub(&xj)?;
            let lower = xj.sub(&Polynomial::constant(n, lo))?;
            constraints.push(upper.mul(&lower)?);
        }
        Self::new(n, constraints)
    }

    pub fn with_boundary_tol(mut self, tol: f64) -> Self {
        self.boundary_tol = tol;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn boundary_tol(&self) -> f64 {
        self.boundary_tol
    }

    pub fn ball_index(&self) -> Option<usize> {
        self.ball_index
    }

    pub fn ball_radius(&self) -> Option<f64> {
        self.ball_radius
    }

    /// `delta_i`: total degree of each constraint.
    pub fn degrees(&self) -> Vec<u32> {
        self.constraints.iter().map(Polynomial::total_degree).collect()
    }

    /// `k_i = ceil(delta_i / 2)`.
    pub fn half_degrees(&self) -> Vec<u32> {
        self.degrees().into_iter().map(|d| d.div_ceil(2)).collect()
    }

    pub fn k_min(&self) -> u32 {
        self.half_degrees().into_iter().max().unwrap_or(0)
    }

    /// `min_i g_i(x)`; positive exactly on the open set `{g_i > 0 for all i}`.
    #[inline]
    pub fn min_constraint(&self, x: &[f64]) -> f64 {
        self.evaluators
            .iter()
            .map(|g| g.eval(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64]) -> Result<Membership> {
        check_dim(self.n, x.len())?;
        Ok(self.classify(x))
    }

    #[inline]
    pub(crate) fn classify(&self, x: &[f64]) -> Membership {
        let m = self.min_constraint(x);
        if m > self.boundary_tol {
            Membership::Interior
        } else if m >= -self.boundary_tol {
            Membership::Boundary
        } else {
            Membership::Outside
        }
    }

    /// Appends `R^2 - |x|^2` unless a ball constraint is already present.
    pub fn ensure_ball_constraint(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("ball radius {radius} must be positive")));
        }
        if self.ball_index.is_some() {
            return Ok(self.clone());
        }
        let mut constraints = self.constraints.clone();
        constraints.push(Polynomial::ball(self.n, radius));
        Ok(Self::new(self.n, constraints)?.with_boundary_tol(self.boundary_tol))
    }

    /// Scale used to search for interior anchors and escape rays.
    fn search_radius(&self) -> f64 {
        self.ball_radius.unwrap_or(1.0)
    }

    fn find_anchor(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let origin = vec![0.0; self.n];
        if self.classify(&origin) == Membership::Interior {
            return Ok(origin);
        }
        let r = self.search_radius();
        for attempt in 0..ANCHOR_ATTEMPTS {
            // widen the search window slowly for sets without a ball
            let scale = r * (1.0 + (attempt / 1000) as f64);
            let x: Vec<f64> = (0..self.n).map(|_| rng.random_range(-scale..scale)).collect();
            if self.classify(&x) == Membership::Interior {
                return Ok(x);
            }
        }
        Err(Error::NoInteriorPoint(ANCHOR_ATTEMPTS))
    }

    /// Deterministic boundary points found by bisection on `min_i g_i` along
    /// random rays leaving an interior anchor.
    pub fn sample_boundary(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if count == 0 {
            return Err(Error::InvalidArgument("count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchor = self.find_anchor(&mut rng)?;
        let mut out = Vec::with_capacity(count);
        let mut failures = 0usize;
        while out.len() < count {
            let dir = random_direction(&mut rng, self.n);
            match self.bisect_ray(&anchor, &dir) {
                Some(p) => out.push(p),
                None => {
                    failures += 1;
                    if failures > RAY_ATTEMPTS_PER_POINT * count {
                        return Err(Error::InvalidArgument(
                            "could not locate boundary points along random rays".into(),
                        ));
                    }
                }
            }
        }
        Ok(out)
    }

    fn bisect_ray(&self, anchor: &[f64], dir: &[f64]) -> Option<Vec<f64>> {
        let point = |s: f64| -> Vec<f64> { anchor.iter().zip(dir).map(|(a, d)| a + s * d).collect() };
        let mut hi = self.search_radius();
        let mut found = false;
        for _ in 0..64 {
            if self.min_constraint(&point(hi)) < 0.0 {
                found = true;
                break;
            }
            hi *= 2.0;
        }
        if !found {
            return None;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let x = point(mid);
            let g = self.min_constraint(&x);
            if g.abs() <= 0.5 * self.boundary_tol {
                return Some(x);
            }
            if g > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        let x = point(0.5 * (lo + hi));
        (self.classify(&x) == Membership::Boundary).then_some(x)
    }
}

/// Uniformly distributed unit vector.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// Uniform draw from the ball of radius `radius` centred at the origin.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    let dir = random_direction(rng, n);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / n as f64);
    dir.into_iter().map(|c| c * r).collect()
}

/// Lebesgue volume of the `n`-ball of radius `radius`.
pub fn ball_volume(n: usize, radius: f64) -> f64 {
    crate::moments::ball_moment(n, radius, &vec![0; n])
}
