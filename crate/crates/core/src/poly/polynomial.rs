use std::collections::BTreeMap;
use std::fmt;

use crate::error::{check_dim, Error, Result};

use super::Monomial;

/// Coefficients with magnitude below this are dropped after arithmetic.
pub const CANONICAL_EPS: f64 = 1e-14;

/// Sparse multivariate polynomial with real coefficients in `n` variables.
///
/// Terms are kept in canonical form: no stored zero (or sub-[`CANONICAL_EPS`])
/// coefficients, keyed by graded-lex ordered monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::monomial(n, Monomial::one(n), c)
    }

    /// The coordinate polynomial `x_i` (0-based).
    pub fn var(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        Ok(Self::monomial(n, Monomial::var(n, i), 1.0))
    }

    fn monomial(n: usize, m: Monomial, c: f64) -> Self {
        let mut p = Polynomial::zero(n);
        p.add_term(m, c);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; repeated
    /// monomials are summed.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Polynomial::zero(n);
        for (e, c) in terms {
            check_dim(n, e.len())?;
            *p.terms.entry(Monomial::new(e)).or_insert(0.0) += c;
        }
        p.canonicalize();
        Ok(p)
    }

    /// `R^2 - (x1^2 + ... + xn^2)`.
    pub fn ball(n: usize, radius: f64) -> Self {
        let mut p = Polynomial::constant(n, radius * radius);
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 2;
            p.add_term(Monomial::new(e), -1.0);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum total degree over the terms; the zero polynomial has degree 0.
    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        let updated = self.coeff(&m) + c;
        if updated.abs() < CANONICAL_EPS {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, updated);
        }
    }

    fn canonicalize(&mut self) {
        self.terms.retain(|_, c| c.abs() >= CANONICAL_EPS);
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        check_dim(self.n, other.n)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            *out.terms.entry(m.clone()).or_insert(0.0) += c;
        }
        out.canonicalize();
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial {
            n: self.n,
            terms: self.terms.iter().map(|(m, &c)| (m.clone(), c * s)).collect(),
        };
        out.canonicalize();
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        check_dim(self.n, other.n)?;
        let mut terms: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                *terms.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        let mut out = Polynomial { n: self.n, terms };
        out.canonicalize();
        Ok(out)
    }

    /// Formal partial derivative with respect to `x_i` (0-based).
    pub fn partial(&self, i: usize) -> Result<Polynomial> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        let mut terms = BTreeMap::new();
        for (m, &c) in &self.terms {
            let e = m.exponents()[i];
            if e == 0 {
                continue;
            }
            let mut exps = m.exponents().to_vec();
            exps[i] -= 1;
            *terms.entry(Monomial::new(exps)).or_insert(0.0) += c * f64::from(e);
        }
        let mut out = Polynomial { n: self.n, terms };
        out.canonicalize();
        Ok(out)
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.n)
            .map(|i| self.partial(i).expect("index in range"))
            .collect()
    }

    /// The Lie derivative `grad(v) . f` of `self` along the vector field `f`.
    pub fn lie_derivative(&self, field: &[Polynomial]) -> Result<Polynomial> {
        check_dim(self.n, field.len())?;
        let mut out = Polynomial::zero(self.n);
        for (i, fi) in field.iter().enumerate() {
            check_dim(self.n, fi.n)?;
            let d = self.partial(i)?;
            if d.is_zero() {
                continue;
            }
            out = out.add(&d.mul(fi)?)?;
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n, x.len())?;
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(x)).sum())
    }

    /// Flattened copy of the polynomial for repeated evaluation in hot loops.
    pub fn evaluator(&self) -> PolyEvaluator {
        PolyEvaluator::new(self)
    }
}

/// Flat, allocation-free evaluator for a fixed polynomial.
#[derive(Clone, Debug)]
pub struct PolyEvaluator {
    n: usize,
    exponents: Vec<i32>,
    coeffs: Vec<f64>,
    /// Largest single exponent; powers up to it are tabulated per call when
    /// the table fits in `POW_TABLE`.
    max_exp: usize,
}

const POW_TABLE: usize = 96;

impl PolyEvaluator {
    fn new(p: &Polynomial) -> Self {
        let mut exponents = Vec::with_capacity(p.n * p.terms.len());
        let mut coeffs = Vec::with_capacity(p.terms.len());
        for (m, &c) in &p.terms {
            exponents.extend(m.exponents().iter().map(|&e| e as i32));
            coeffs.push(c);
        }
        let max_exp = exponents.iter().copied().max().unwrap_or(0) as usize;
        PolyEvaluator {
            n: p.n,
            exponents,
            coeffs,
            max_exp,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Evaluates at `x`; the caller guarantees `x.len() == n`.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        if self.n == 0 {
            return self.coeffs.iter().sum();
        }
        let stride = self.max_exp + 1;
        if self.n * stride <= POW_TABLE {
            let mut pow = [1.0; POW_TABLE];
            for (i, &xi) in x.iter().enumerate() {
                for e in 1..stride {
                    pow[i * stride + e] = pow[i * stride + e - 1] * xi;
                }
            }
            let mut acc = 0.0;
            for (c, exps) in self.coeffs.iter().zip(self.exponents.chunks_exact(self.n)) {
                let mut t = *c;
                for (i, &e) in exps.iter().enumerate() {
                    t *= pow[i * stride + e as usize];
                }
                acc += t;
            }
            return acc;
        }
        let mut acc = 0.0;
        for (c, exps) in self.coeffs.iter().zip(self.exponents.chunks_exact(self.n)) {
            let mut t = *c;
            for (&e, &xi) in exps.iter().zip(x) {
                if e != 0 {
                    t *= xi.powi(e);
                }
            }
            acc += t;
        }
        acc
    }
}

fn fmt_coeff(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if f.alternate() {
        write!(f, "{c:e}")
    } else {
        write!(f, "{c}")
    }
}

/// Renders the polynomial in the same grammar the parser accepts, lowest
/// degree first, e.g. `1 - x1^2 - x2^2`. Coefficients print with the shortest
/// representation that round-trips.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (m, &c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            if idx == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_constant() {
                fmt_coeff(f, mag)?;
            } else if mag == 1.0 {
                write!(f, "{m}")?;
            } else {
                fmt_coeff(f, mag)?;
                write!(f, "*{m}")?;
            }
        }
        Ok(())
    }
}
