use std::collections::HashSet;

use crate::error::{check_dim, Error, Result};
use crate::moments::basis;
use crate::poly::{Monomial, Polynomial};

use super::expr::{LinExpr, PolyExpr};
use super::problem::{PsdBlock, RowOrigin, SdpProblem, SparseRow};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VarKind {
    Free,
    Nonneg,
    /// Entry `(row, col)`, `row <= col`, of a symmetric Gram block.
    Gram { block: usize, row: usize, col: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionVar {
    pub id: usize,
    pub kind: VarKind,
}

/// Handle to a polynomial with free coefficients over `basis(n, degree)`.
#[derive(Clone, Debug)]
pub struct PolyVar {
    pub name: String,
    pub degree: u32,
    pub basis: Vec<Monomial>,
    pub coeff_vars: Vec<usize>,
}

impl PolyVar {
    pub fn expr(&self) -> PolyExpr {
        let n = self.basis.first().map(Monomial::n).unwrap_or(0);
        let mut e = PolyExpr::zero(n);
        for (m, &id) in self.basis.iter().zip(&self.coeff_vars) {
            e.add_term(m.clone(), &LinExpr::var(id, 1.0), 1.0);
        }
        e
    }

    pub fn coefficients(&self, values: &[f64]) -> Vec<f64> {
        self.coeff_vars.iter().map(|&i| values[i]).collect()
    }

    pub fn value(&self, values: &[f64]) -> Polynomial {
        let n = self.basis.first().map(Monomial::n).unwrap_or(0);
        Polynomial::from_terms(
            n,
            self.basis
                .iter()
                .zip(&self.coeff_vars)
                .map(|(m, &i)| (m.exponents().to_vec(), values[i])),
        )
        .expect("basis dimension")
    }
}

/// Handle to an SOS polynomial `b(x)' Q b(x)`, `Q` a PSD Gram block over
/// `basis(n, degree / 2)`.
#[derive(Clone, Debug)]
pub struct SosVar {
    pub name: String,
    pub degree: u32,
    pub block: usize,
    pub basis: Vec<Monomial>,
    pub first_var: usize,
}

/// Position of Gram entry `(row, col)`, `row <= col`, in column-major upper
/// triangular storage.
pub fn gram_offset(row: usize, col: usize) -> usize {
    debug_assert!(row <= col);
    col * (col + 1) / 2 + row
}

impl SosVar {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn var_id(&self, row: usize, col: usize) -> usize {
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        self.first_var + gram_offset(r, c)
    }

    /// The polynomial `b' Q b` as an affine expression in the Gram entries:
    /// the coefficient of `x^a` sums `Q_{bc}` over pairs with `b + c = a`.
    pub fn expr(&self) -> PolyExpr {
        let n = self.basis[0].n();
        let mut e = PolyExpr::zero(n);
        let m = self.dim();
        for col in 0..m {
            for row in 0..=col {
                let weight = if row == col { 1.0 } else { 2.0 };
                let mono = self.basis[row].mul(&self.basis[col]);
                e.add_term(mono, &LinExpr::var(self.var_id(row, col), weight), 1.0);
            }
        }
        e
    }

    /// Dense symmetric Gram matrix from a primal point.
    pub fn gram(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let m = self.dim();
        let mut q = vec![vec![0.0; m]; m];
        for col in 0..m {
            for row in 0..=col {
                let v = values[self.var_id(row, col)];
                q[row][col] = v;
                q[col][row] = v;
            }
        }
        q
    }
}

#[derive(Clone, Debug)]
pub struct Identity {
    pub name: String,
    pub lhs: PolyExpr,
    pub rhs: PolyExpr,
}

/// Builder for a polynomial program with SOS-constrained unknowns.
#[derive(Clone, Debug)]
pub struct SosProgram {
    n: usize,
    vars: Vec<DecisionVar>,
    names: HashSet<String>,
    poly_vars: Vec<PolyVar>,
    sos_vars: Vec<SosVar>,
    identities: Vec<Identity>,
    objective: LinExpr,
}

impl SosProgram {
    pub fn new(n: usize) -> Self {
        SosProgram {
            n,
            vars: Vec::new(),
            names: HashSet::new(),
            poly_vars: Vec::new(),
            sos_vars: Vec::new(),
            identities: Vec::new(),
            objective: LinExpr::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vars(&self) -> &[DecisionVar] {
        &self.vars
    }

    pub fn poly_vars(&self) -> &[PolyVar] {
        &self.poly_vars
    }

    pub fn sos_vars(&self) -> &[SosVar] {
        &self.sos_vars
    }

    pub fn identities(&self) -> &[Identity] {
        &self.identities
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    fn claim_name(&mut self, name: &str) -> Result<()> {
        if !self.names.insert(name.to_string()) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    fn push_var(&mut self, kind: VarKind) -> usize {
        let id = self.vars.len();
        self.vars.push(DecisionVar { id, kind });
        id
    }

    /// A polynomial unknown of total degree at most `degree`, one free scalar
    /// per graded-lex basis monomial.
    pub fn declare_poly(&mut self, name: &str, degree: u32) -> Result<PolyVar> {
        self.claim_name(name)?;
        let b = basis(self.n, degree);
        let coeff_vars = b.iter().map(|_| self.push_var(VarKind::Free)).collect();
        let v = PolyVar {
            name: name.to_string(),
            degree,
            basis: b,
            coeff_vars,
        };
        self.poly_vars.push(v.clone());
        Ok(v)
    }

    /// A nonnegative scalar unknown.
    pub fn declare_nonneg(&mut self, name: &str) -> Result<usize> {
        self.claim_name(name)?;
        Ok(self.push_var(VarKind::Nonneg))
    }

    /// A free scalar unknown.
    pub fn declare_free(&mut self, name: &str) -> Result<usize> {
        self.claim_name(name)?;
        Ok(self.push_var(VarKind::Free))
    }

    /// An SOS polynomial of degree at most `degree` (must be even).
    pub fn declare_sos(&mut self, name: &str, degree: u32) -> Result<SosVar> {
        if degree % 2 == 1 {
            return Err(Error::InvalidArgument(format!(
                "SOS variable `{name}` needs an even degree cap, got {degree}"
            )));
        }
        self.claim_name(name)?;
        let b = basis(self.n, degree / 2);
        let block = self.sos_vars.len();
        let first_var = self.vars.len();
        let m = b.len();
        for col in 0..m {
            for row in 0..=col {
                self.push_var(VarKind::Gram { block, row, col });
            }
        }
        let s = SosVar {
            name: name.to_string(),
            degree,
            block,
            basis: b,
            first_var,
        };
        self.sos_vars.push(s.clone());
        Ok(s)
    }

    fn check_refs(&self, e: &PolyExpr) -> Result<()> {
        check_dim(self.n, e.n())?;
        match e.max_var() {
            Some(id) if id >= self.vars.len() => Err(Error::UnknownVariable(id)),
            _ => Ok(()),
        }
    }

    /// Adds the polynomial identity `lhs = rhs`.
    pub fn add_identity(&mut self, name: &str, lhs: PolyExpr, rhs: PolyExpr) -> Result<()> {
        self.check_refs(&lhs)?;
        self.check_refs(&rhs)?;
        self.identities.push(Identity {
            name: name.to_string(),
            lhs,
            rhs,
        });
        Ok(())
    }

    /// Sets the affine objective to minimize.
    pub fn minimize(&mut self, objective: LinExpr) -> Result<()> {
        if let Some(id) = objective.max_var() {
            if id >= self.vars.len() {
                return Err(Error::UnknownVariable(id));
            }
        }
        self.objective = objective;
        Ok(())
    }

    /// `lhs - rhs` of every identity evaluated at a primal point.
    pub fn identity_residuals(&self, values: &[f64]) -> Vec<Polynomial> {
        self.identities
            .iter()
            .map(|id| id.lhs.sub(&id.rhs).expect("checked dimension").evaluate(values))
            .collect()
    }

    /// Lowers the program to a standard-form SDP: one equality row per
    /// monomial in the union support of each identity, identities in
    /// declaration order, monomials graded-lex within an identity.
    ///
    /// Rows that reduce to `0 = 0` are dropped.
    pub fn compile(&self) -> SdpProblem {
        let mut rows = Vec::new();
        let mut origins = Vec::new();
        for (idx, identity) in self.identities.iter().enumerate() {
            let diff = identity.lhs.sub(&identity.rhs).expect("checked dimension");
            for (m, e) in &diff.terms {
                let coeffs: Vec<(usize, f64)> = e.terms().filter(|&(_, c)| c != 0.0).collect();
                let rhs = -e.constant_term();
                if coeffs.is_empty() && rhs == 0.0 {
                    continue;
                }
                rows.push(SparseRow { coeffs, rhs });
                origins.push(RowOrigin {
                    identity: idx,
                    monomial: m.clone(),
                });
            }
        }
        let blocks = self
            .sos_vars
            .iter()
            .map(|s| PsdBlock {
                dim: s.dim(),
                first_var: s.first_var,
            })
            .collect();
        SdpProblem {
            n: self.n,
            var_kinds: self.vars.iter().map(|v| v.kind.clone()).collect(),
            blocks,
            rows,
            origins,
            objective: self.objective.terms().filter(|&(_, c)| c != 0.0).collect(),
            objective_constant: self.objective.constant_term(),
        }
    }
}
