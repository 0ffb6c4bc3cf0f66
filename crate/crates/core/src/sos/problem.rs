use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::poly::Monomial;

use super::program::{gram_offset, VarKind};

#[derive(Clone, Debug, PartialEq)]
pub struct PsdBlock {
    pub dim: usize,
    pub first_var: usize,
}

impl PsdBlock {
    pub fn num_entries(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Which identity and monomial produced an equality row.
#[derive(Clone, Debug, PartialEq)]
pub struct RowOrigin {
    pub identity: usize,
    pub monomial: Monomial,
}

/// Standard-form SDP:
///
/// ```text
/// minimize    c' x + c0
/// subject to  A x = b
///             x_j >= 0            for nonnegative scalars
///             Q_k(x) PSD          for every Gram block
/// ```
///
/// Variables are indexed by declaration order; Gram entries of a block are
/// contiguous, column-major over the upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub n: usize,
    pub var_kinds: Vec<VarKind>,
    pub blocks: Vec<PsdBlock>,
    pub rows: Vec<SparseRow>,
    pub origins: Vec<RowOrigin>,
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
}

const HEADER: &str = "sdp-sparse 1";

impl SdpProblem {
    pub fn num_vars(&self) -> usize {
        self.var_kinds.len()
    }

    pub fn free_count(&self) -> usize {
        self.var_kinds.iter().filter(|k| **k == VarKind::Free).count()
    }

    pub fn nonneg_count(&self) -> usize {
        self.var_kinds.iter().filter(|k| **k == VarKind::Nonneg).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    pub fn row_residuals(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(j, c)| c * x[j]).sum::<f64>() - r.rhs)
            .collect()
    }

    pub fn max_row_residual(&self, x: &[f64]) -> f64 {
        self.row_residuals(x).into_iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn max_abs_rhs(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.rhs.abs()))
    }

    /// Dense symmetric matrix of Gram block `k` at the point `x`.
    pub fn block_matrix(&self, k: usize, x: &[f64]) -> Vec<Vec<f64>> {
        let b = &self.blocks[k];
        let mut q = vec![vec![0.0; b.dim]; b.dim];
        for col in 0..b.dim {
            for row in 0..=col {
                let v = x[b.first_var + gram_offset(row, col)];
                q[row][col] = v;
                q[col][row] = v;
            }
        }
        q
    }

    /// Structural consistency: rows reference declared variables, blocks
    /// cover exactly their Gram entries.
    pub fn validate(&self) -> Result<()> {
        let nv = self.num_vars();
        for (j, _) in self.rows.iter().flat_map(|r| r.coeffs.iter()).chain(self.objective.iter()) {
            if *j >= nv {
                return Err(Error::UnknownVariable(*j));
            }
        }
        for (k, b) in self.blocks.iter().enumerate() {
            for col in 0..b.dim {
                for row in 0..=col {
                    let id = b.first_var + gram_offset(row, col);
                    match self.var_kinds.get(id) {
                        Some(VarKind::Gram { block, row: r, col: c })
                            if *block == k && *r == row && *c == col => {}
                        _ => {
                            return Err(Error::InvalidArgument(format!(
                                "block {k} entry ({row},{col}) is not variable {id}"
                            )))
                        }
                    }
                }
            }
        }
        if self.origins.len() != self.rows.len() {
            return Err(Error::InvalidArgument("row origin count mismatch".into()));
        }
        Ok(())
    }

    /// Sparse text interchange format.
    ///
    /// ```text
    /// sdp-sparse 1
    /// dim <n>
    /// vars <count>
    /// v <id> free | v <id> nonneg | v <id> gram <block> <row> <col>
    /// blocks <count>
    /// b <id> <dim> <first_var>
    /// objective <constant>
    /// o <var> <coeff>
    /// rows <count>
    /// r <row> <rhs> <identity> <exponents...>
    /// <row> <var> <coeff>            one line per nonzero of A
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "dim {}", self.n);
        let _ = writeln!(s, "vars {}", self.num_vars());
        for (id, k) in self.var_kinds.iter().enumerate() {
            match k {
                VarKind::Free => {
                    let _ = writeln!(s, "v {id} free");
                }
                VarKind::Nonneg => {
                    let _ = writeln!(s, "v {id} nonneg");
                }
                VarKind::Gram { block, row, col } => {
                    let _ = writeln!(s, "v {id} gram {block} {row} {col}");
                }
            }
        }
        let _ = writeln!(s, "blocks {}", self.blocks.len());
        for (k, b) in self.blocks.iter().enumerate() {
            let _ = writeln!(s, "b {k} {} {}", b.dim, b.first_var);
        }
        let _ = writeln!(s, "objective {}", self.objective_constant);
        for (j, c) in &self.objective {
            let _ = writeln!(s, "o {j} {c}");
        }
        let _ = writeln!(s, "rows {}", self.rows.len());
        for (i, (row, origin)) in self.rows.iter().zip(&self.origins).enumerate() {
            let _ = write!(s, "r {i} {} {}", row.rhs, origin.identity);
            for e in origin.monomial.exponents() {
                let _ = write!(s, " {e}");
            }
            let _ = writeln!(s);
            for (j, c) in &row.coeffs {
                let _ = writeln!(s, "{i} {j} {c}");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<SdpProblem> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let err = |line: usize, message: &str| Error::Format {
            line,
            message: message.to_string(),
        };
        let mut next = |what: &str| lines.next().ok_or_else(|| err(0, &format!("missing {what}")));

        let (ln, l) = next("header")?;
        if l != HEADER {
            return Err(err(ln, "unknown header"));
        }
        let (ln, l) = next("dim")?;
        let n = keyed(l, "dim").ok_or_else(|| err(ln, "expected `dim <n>`"))?;
        let (ln, l) = next("vars")?;
        let nv = keyed(l, "vars").ok_or_else(|| err(ln, "expected `vars <count>`"))?;
        let mut var_kinds = Vec::with_capacity(nv);
        for id in 0..nv {
            let (ln, l) = next("variable")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            let kind = match f.as_slice() {
                ["v", i, "free"] if num::<usize>(i) == Some(id) => VarKind::Free,
                ["v", i, "nonneg"] if num::<usize>(i) == Some(id) => VarKind::Nonneg,
                ["v", i, "gram", b, r, c] if num::<usize>(i) == Some(id) => VarKind::Gram {
                    block: num(b).ok_or_else(|| err(ln, "bad block"))?,
                    row: num(r).ok_or_else(|| err(ln, "bad row"))?,
                    col: num(c).ok_or_else(|| err(ln, "bad col"))?,
                },
                _ => return Err(err(ln, "malformed variable line")),
            };
            var_kinds.push(kind);
        }
        let (ln, l) = next("blocks")?;
        let nb = keyed(l, "blocks").ok_or_else(|| err(ln, "expected `blocks <count>`"))?;
        let mut blocks = Vec::with_capacity(nb);
        for k in 0..nb {
            let (ln, l) = next("block")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            match f.as_slice() {
                ["b", i, d, first] if num::<usize>(i) == Some(k) => blocks.push(PsdBlock {
                    dim: num(d).ok_or_else(|| err(ln, "bad dim"))?,
                    first_var: num(first).ok_or_else(|| err(ln, "bad first var"))?,
                }),
                _ => return Err(err(ln, "malformed block line")),
            }
        }
        let (ln, l) = next("objective")?;
        let objective_constant = l
            .strip_prefix("objective ")
            .and_then(|v| num::<f64>(v.trim()))
            .ok_or_else(|| err(ln, "expected `objective <constant>`"))?;
        let mut objective = Vec::new();
        let (mut ln, mut l) = next("rows")?;
        while let Some(rest) = l.strip_prefix("o ") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            match f.as_slice() {
                [j, c] => objective.push((
                    num(j).ok_or_else(|| err(ln, "bad objective var"))?,
                    num(c).ok_or_else(|| err(ln, "bad objective coeff"))?,
                )),
                _ => return Err(err(ln, "malformed objective line")),
            }
            (ln, l) = next("rows")?;
        }
        let nr = keyed(l, "rows").ok_or_else(|| err(ln, "expected `rows <count>`"))?;
        let mut rows: Vec<SparseRow> = Vec::with_capacity(nr);
        let mut origins = Vec::with_capacity(nr);
        for (ln, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.first() == Some(&"r") {
                if f.len() != 4 + n || num::<usize>(f[1]) != Some(rows.len()) {
                    return Err(err(ln, "malformed row header"));
                }
                let rhs = num(f[2]).ok_or_else(|| err(ln, "bad rhs"))?;
                let identity = num(f[3]).ok_or_else(|| err(ln, "bad identity"))?;
                let exps = f[4..]
                    .iter()
                    .map(|e| num::<u32>(e))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| err(ln, "bad exponent"))?;
                rows.push(SparseRow {
                    coeffs: Vec::new(),
                    rhs,
                });
                origins.push(RowOrigin {
                    identity,
                    monomial: Monomial::new(exps),
                });
            } else {
                match f.as_slice() {
                    [i, j, c] if num::<usize>(i) == Some(rows.len().wrapping_sub(1)) => {
                        let entry = (
                            num(j).ok_or_else(|| err(ln, "bad var"))?,
                            num(c).ok_or_else(|| err(ln, "bad coeff"))?,
                        );
                        rows.last_mut().expect("row exists").coeffs.push(entry);
                    }
                    _ => return Err(err(ln, "malformed entry line")),
                }
            }
        }
        if rows.len() != nr {
            return Err(err(0, &format!("expected {nr} rows, found {}", rows.len())));
        }
        let p = SdpProblem {
            n,
            var_kinds,
            blocks,
            rows,
            origins,
            objective,
            objective_constant,
        };
        p.validate()?;
        Ok(p)
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Option<T> {
    s.parse().ok()
}

fn keyed(line: &str, key: &str) -> Option<usize> {
    let mut f = line.split_whitespace();
    if f.next()? != key {
        return None;
    }
    let v = num(f.next()?)?;
    f.next().is_none().then_some(v)
}
