use std::collections::BTreeMap;

use crate::error::{check_dim, Result};
use crate::poly::{Monomial, Polynomial};

/// Affine scalar expression `sum_j c_j * var_j + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub(crate) terms: BTreeMap<usize, f64>,
    pub(crate) constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(id: usize, coeff: f64) -> Self {
        let mut e = LinExpr::default();
        e.add_var(id, coeff);
        e
    }

    pub fn add_var(&mut self, id: usize, coeff: f64) {
        *self.terms.entry(id).or_insert(0.0) += coeff;
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        for (&id, &c) in &other.terms {
            self.add_var(id, s * c);
        }
        self.constant += s * other.constant;
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.terms.iter().map(|(&i, &c)| (i, c))
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&i, c)| c * values[i]).sum::<f64>()
    }

    pub(crate) fn max_var(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }
}

/// A polynomial whose coefficients are affine in the decision variables.
///
/// Monomials stay in the support once introduced, even if their coefficient
/// cancels, so identities match over the full union support.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyExpr {
    pub(crate) n: usize,
    pub(crate) terms: BTreeMap<Monomial, LinExpr>,
}

impl PolyExpr {
    pub fn zero(n: usize) -> Self {
        PolyExpr {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_polynomial(p: &Polynomial) -> Self {
        PolyExpr {
            n: p.n(),
            terms: p
                .terms()
                .map(|(m, c)| (m.clone(), LinExpr::constant(c)))
                .collect(),
        }
    }

    /// The scalar decision variable `id` as a constant polynomial.
    pub fn scalar(n: usize, id: usize) -> Self {
        let mut e = PolyExpr::zero(n);
        e.terms.insert(Monomial::one(n), LinExpr::var(id, 1.0));
        e
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.keys()
    }

    pub fn coeff(&self, m: &Monomial) -> Option<&LinExpr> {
        self.terms.get(m)
    }

    pub(crate) fn add_term(&mut self, m: Monomial, e: &LinExpr, s: f64) {
        self.terms.entry(m).or_default().add_scaled(e, s);
    }

    pub fn add(&self, other: &PolyExpr) -> Result<PolyExpr> {
        check_dim(self.n, other.n)?;
        let mut out = self.clone();
        for (m, e) in &other.terms {
            out.add_term(m.clone(), e, 1.0);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &PolyExpr) -> Result<PolyExpr> {
        check_dim(self.n, other.n)?;
        let mut out = self.clone();
        for (m, e) in &other.terms {
            out.add_term(m.clone(), e, -1.0);
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> PolyExpr {
        let mut out = PolyExpr::zero(self.n);
        for (m, e) in &self.terms {
            out.add_term(m.clone(), e, s);
        }
        out
    }

    /// Product with a fixed polynomial (e.g. a multiplier times `g_i`).
    pub fn mul_poly(&self, p: &Polynomial) -> Result<PolyExpr> {
        check_dim(self.n, p.n())?;
        let mut out = PolyExpr::zero(self.n);
        for (m, e) in &self.terms {
            for (mp, c) in p.terms() {
                out.add_term(m.mul(mp), e, c);
            }
        }
        Ok(out)
    }

    /// `grad(self) . f`, linear in the decision variables.
    pub fn lie_derivative(&self, field: &[Polynomial]) -> Result<PolyExpr> {
        check_dim(self.n, field.len())?;
        let mut out = PolyExpr::zero(self.n);
        for (m, e) in &self.terms {
            let mono = Polynomial::from_terms(self.n, [(m.exponents().to_vec(), 1.0)])?;
            let d = mono.lie_derivative(field)?;
            for (md, c) in d.terms() {
                out.add_term(md.clone(), e, c);
            }
        }
        Ok(out)
    }

    /// Substitutes decision-variable values, producing a plain polynomial.
    pub fn evaluate(&self, values: &[f64]) -> Polynomial {
        Polynomial::from_terms(
            self.n,
            self.terms
                .iter()
                .map(|(m, e)| (m.exponents().to_vec(), e.eval(values))),
        )
        .expect("consistent dimension")
    }

    pub(crate) fn max_var(&self) -> Option<usize> {
        self.terms.values().filter_map(LinExpr::max_var).max()
    }
}
