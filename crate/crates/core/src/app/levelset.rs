use std::io::Write;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::hierarchy::Certificate;
use crate::semialgebraic::{Membership, SemialgebraicSet};

/// One grid point: full state, `v(x)`, and whether `x` lies in `int X`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelsetRow {
    pub x: Vec<f64>,
    pub v: f64,
    pub interior: bool,
}

/// Samples `v` on a `resolution x resolution` grid over `[-R, R]^2`, where
/// `R` is the ball radius of `x_set`.
///
/// For `n = 2` this is the plain grid. For `n > 2` one slice per coordinate
/// pair `(i, j)`, `i < j`, is emitted in lexicographic pair order, with the
/// other coordinates fixed at `anchor` (the origin by default). Within a
/// slice rows are row-major: the first coordinate of the pair is the slow
/// index.
pub fn export_levelset_grid(
    cert: &Certificate,
    x_set: &SemialgebraicSet,
    resolution: usize,
    anchor: Option<&[f64]>,
) -> Result<Vec<LevelsetRow>> {
    let n = cert.n;
    check_dim(n, x_set.n())?;
    if n < 2 {
        return Err(Error::InvalidArgument("level-set export needs n >= 2".into()));
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!("resolution must be at least 2, got {resolution}")));
    }
    let radius = x_set.ball_radius().ok_or(Error::MissingBallConstraint)?;
    let base = match anchor {
        Some(a) => {
            check_dim(n, a.len())?;
            a.to_vec()
        }
        None => vec![0.0; n],
    };
    let v = cert.v_poly().evaluator();
    let axis: Vec<f64> = (0..resolution)
        .map(|i| -radius + 2.0 * radius * i as f64 / (resolution - 1) as f64)
        .collect();

    let mut rows = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for &a in &axis {
                for &b in &axis {
                    let mut p = base.clone();
                    p[i] = a;
                    p[j] = b;
                    rows.push(LevelsetRow {
                        v: v.eval(&p),
                        interior: x_set.classify(&p) == Membership::Interior,
                        x: p,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Writes rows as CSV with header `x1, .., xn, v, interior`.
pub fn write_levelset_csv<W: Write>(rows: &[LevelsetRow], n: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.push("v".into());
    header.push("interior".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.x.iter().map(f64::to_string).collect();
        rec.push(r.v.to_string());
        rec.push(r.interior.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
