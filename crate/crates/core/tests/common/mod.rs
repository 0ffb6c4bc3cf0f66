//! Oracles shared by the integration tests: adaptive Gauss-Kronrod
//! quadrature and a backend-independent soundness check of solved
//! tightenings.
#![allow(dead_code)]

use mpi_inner::hierarchy::{build_tightening, Mode, OdeSystem, Tightening};
use mpi_inner::moments::moment_vector;
use mpi_inner::poly::Polynomial;
use mpi_inner::sdp::{ClarabelBackend, SdpBackend, SdpSolution, SolveStatus, SolverOptions};
use mpi_inner::semialgebraic::{uniform_in_ball, SemialgebraicSet};
use mpi_inner::sos::gram_offset;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Kronrod 15-point nodes on [0, 1] (symmetric), Kronrod weights, and the
// weights of the embedded 7-point Gauss rule on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_DEPTH: u32 = 60;

/// One G7-K15 panel of a vector-valued integrand: (Kronrod, error), with
/// the error of each component scaled as in QUADPACK's `qk15`.
fn panel(f: &dyn Fn(f64) -> Vec<f64>, a: f64, b: f64) -> (Vec<f64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut values = vec![(0.0, f(c))];
    for j in 0..7 {
        values.push((-XGK[j], f(c - h * XGK[j])));
        values.push((XGK[j], f(c + h * XGK[j])));
    }
    let weights = |x: f64| {
        let j = XGK.iter().position(|&n| n == x.abs()).expect("node");
        let g = if j % 2 == 1 { WG[j / 2] } else if j == 7 { WG[3] } else { 0.0 };
        (WGK[j], g)
    };
    let m = values[0].1.len();
    let mut k = vec![0.0; m];
    let mut g = vec![0.0; m];
    for (x, fx) in &values {
        let (wk, wg) = weights(*x);
        for i in 0..m {
            k[i] += wk * fx[i];
            g[i] += wg * fx[i];
        }
    }
    let mut err = 0.0f64;
    for i in 0..m {
        let mean = 0.5 * k[i];
        let resasc: f64 = values.iter().map(|(x, fx)| weights(*x).0 * (fx[i] - mean).abs()).sum::<f64>() * h;
        let raw = ((k[i] - g[i]) * h).abs();
        let e = if resasc > 0.0 && raw > 0.0 { resasc * (200.0 * raw / resasc).powf(1.5).min(1.0) } else { raw };
        err = err.max(e);
    }
    (k.into_iter().map(|v| v * h).collect(), err)
}

/// Adaptive G7-K15 of `f` over `[a, b]` to absolute tolerance `tol` in every
/// component.
pub fn integrate_vec(f: &dyn Fn(f64) -> Vec<f64>, a: f64, b: f64, tol: f64) -> Vec<f64> {
    fn rec(f: &dyn Fn(f64) -> Vec<f64>, a: f64, b: f64, tol: f64, whole: (Vec<f64>, f64), depth: u32) -> Vec<f64> {
        // below the panel's own rounding level further splitting is noise
        let floor = 1e-15 * whole.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if whole.1 <= tol.max(floor) || depth >= MAX_DEPTH || b - a < 1e-15 {
            return whole.0;
        }
        let m = 0.5 * (a + b);
        let (l, r) = (panel(f, a, m), panel(f, m, b));
        let mut out = rec(f, a, m, 0.5 * tol, l, depth + 1);
        for (o, v) in out.iter_mut().zip(rec(f, m, b, 0.5 * tol, r, depth + 1)) {
            *o += v;
        }
        out
    }
    if b <= a {
        return vec![0.0; f(a).len()];
    }
    rec(f, a, b, tol, panel(f, a, b), 0)
}

pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    integrate_vec(&|x| vec![f(x)], a, b, tol)[0]
}

/// Nested quadrature over coordinates `j, j+1, ..` of the tensor of
/// monomial integrals `int prod_i x_i^{a_i}`, `a_i <= deg`, flattened with
/// the first remaining coordinate slowest. `chord(prefix)` gives the interval
/// of the next coordinate and `substitute` maps `[-pi/2, pi/2]` onto it when
/// set (`t = c + r sin(theta)`).
fn tensor_level(
    prefix: &mut Vec<f64>,
    n: usize,
    deg: usize,
    chord: &dyn Fn(&[f64]) -> (f64, f64),
    substitute: bool,
    tol: f64,
) -> Vec<f64> {
    let (lo, hi) = chord(prefix);
    let last = prefix.len() + 1 == n;
    let f = |s: f64| {
        let (t, jac) = if substitute {
            let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            (c + r * s.sin(), r * s.cos())
        } else {
            (s, 1.0)
        };
        let mut p = prefix.clone();
        p.push(t);
        let inner = if last { vec![1.0] } else { tensor_level(&mut p, n, deg, chord, substitute, tol) };
        let mut out = Vec::with_capacity((deg + 1) * inner.len());
        let mut power = jac;
        for _ in 0..=deg {
            out.extend(inner.iter().map(|v| v * power));
            power *= t;
        }
        out
    };
    if substitute {
        let half = std::f64::consts::FRAC_PI_2;
        integrate_vec(&f, -half, half, tol)
    } else {
        integrate_vec(&f, lo, hi, tol)
    }
}

fn select(tensor: &[f64], n: usize, deg: usize, alphas: &[Vec<u32>]) -> Vec<f64> {
    alphas
        .iter()
        .map(|a| {
            assert_eq!(a.len(), n);
            tensor[a.iter().fold(0, |idx, &e| idx * (deg + 1) + e as usize)]
        })
        .collect()
}

fn max_exponent(alphas: &[Vec<u32>]) -> usize {
    alphas.iter().flatten().copied().max().unwrap_or(0) as usize
}

/// Moments of every exponent in `alphas` over the ball `|x| <= radius` by
/// nested adaptive quadrature over `x_1, x_2, ..`. Each chord `[-s, s]` is
/// mapped by `t = s sin(theta)`, which removes the square-root endpoint
/// behaviour of the outer integrands.
pub fn ball_moments_by_quadrature(n: usize, radius: f64, alphas: &[Vec<u32>], tol: f64) -> Vec<f64> {
    let deg = max_exponent(alphas);
    let r2 = radius * radius;
    let chord = |prefix: &[f64]| {
        let s = (r2 - prefix.iter().map(|v| v * v).sum::<f64>()).max(0.0).sqrt();
        (-s, s)
    };
    let tensor = tensor_level(&mut Vec::new(), n, deg, &chord, true, tol);
    select(&tensor, n, deg, alphas)
}

/// Moments over the box `prod [lo_j, hi_j]` by nested adaptive quadrature.
pub fn box_moments_by_quadrature(bounds: &[(f64, f64)], alphas: &[Vec<u32>], tol: f64) -> Vec<f64> {
    let deg = max_exponent(alphas);
    let chord = |prefix: &[f64]| bounds[prefix.len()];
    let tensor = tensor_level(&mut Vec::new(), bounds.len(), deg, &chord, false, tol);
    select(&tensor, bounds.len(), deg, alphas)
}

/// Every exponent vector in `n` variables of total degree `<= d`.
pub fn exponents_up_to(n: usize, d: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u32>| {
                let used: u32 = p.iter().sum();
                (0..=d - used).map(move |e| {
                    let mut q = p.clone();
                    q.push(e);
                    q
                })
            })
            .collect();
    }
    out
}

/// A solved tightening together with the independent checks run on it.
pub struct Soundness {
    pub tightening: Tightening,
    pub solution: SdpSolution,
    pub v: Polynomial,
    pub w: Polynomial,
    pub u: f64,
    pub min_eigenvalue: f64,
    pub gap: f64,
    /// Minimum over samples of the four certified inequalities.
    pub residual_minima: [f64; 4],
    pub residual_tolerance: f64,
    pub violations: Vec<String>,
}

/// Solves the tightening of order `k` and re-checks an `Optimal` answer
/// without trusting the backend: Gram spectra from the raw primal, the
/// reported gap, and the four inequalities at sampled interior and boundary
/// points. Returns `None` unless the backend reports `Optimal`.
pub fn check_soundness(
    system: &OdeSystem,
    x: &SemialgebraicSet,
    k: u32,
    time_bound: f64,
    mode: Mode,
    samples: usize,
    seed: u64,
) -> Option<Soundness> {
    let options = SolverOptions::default();
    let moments = moment_vector(x, 2 * k, 100_000, seed).unwrap();
    let t = build_tightening(system, x, k, time_bound, mode, &moments).unwrap();
    let sdp = t.program.compile();
    let sol = ClarabelBackend.solve(&sdp, &options).unwrap();
    if sol.status != SolveStatus::Optimal {
        return None;
    }
    let mut violations = Vec::new();

    let mut min_eigenvalue = f64::INFINITY;
    for blk in &sdp.blocks {
        let m = DMatrix::from_fn(blk.dim, blk.dim, |r, c| {
            let (r, c) = (r.min(c), r.max(c));
            sol.primal[blk.first_var + gram_offset(r, c)]
        });
        let eig = m.symmetric_eigenvalues().min();
        min_eigenvalue = min_eigenvalue.min(eig);
    }
    if min_eigenvalue < -10.0 * options.feas_tol {
        violations.push(format!("Gram min eigenvalue {min_eigenvalue:e}"));
    }
    let gap = (sol.primal_objective - sol.dual_objective).abs();
    if gap > 10.0 * options.gap_tol * (1.0 + sol.primal_objective.abs()) {
        violations.push(format!("duality gap {gap:e}"));
    }

    let v = t.v.value(&sol.primal);
    let w = t.w.value(&sol.primal);
    let u = t.u.map_or(0.0, |id| sol.primal[id]);
    let n = x.n();
    let lie = Polynomial::constant(n, u).sub(&v.lie_derivative(system.field()).unwrap()).unwrap();
    let ind = w.sub(&v).unwrap().sub(&Polynomial::constant(n, 1.0)).unwrap();
    let scale = 1.0 + v.max_abs_coeff().max(w.max_abs_coeff());
    let residual_tolerance = 1e-6 * scale;

    let radius = x.ball_radius().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut interior = Vec::new();
    while interior.len() < samples {
        let p = uniform_in_ball(&mut rng, n, radius);
        if x.min_constraint(&p) > 0.0 {
            interior.push(p);
        }
    }
    let boundary = x.sample_boundary(samples / 4 + 1, seed).unwrap();
    let all: Vec<&Vec<f64>> = interior.iter().chain(&boundary).collect();
    let min_of = |p: &Polynomial, pts: &[&Vec<f64>]| pts.iter().map(|q| p.eval(q).unwrap()).fold(f64::INFINITY, f64::min);
    let bpts: Vec<&Vec<f64>> = boundary.iter().collect();
    let residual_minima = [min_of(&lie, &all), min_of(&ind, &all), min_of(&w, &all), min_of(&v, &bpts)];
    for (name, m) in ["u - grad v . f", "w - v - 1", "w", "v on the boundary"].iter().zip(residual_minima) {
        if m < -residual_tolerance {
            violations.push(format!("{name} reaches {m:e} (tolerance {residual_tolerance:e})"));
        }
    }
    Some(Soundness {
        tightening: t,
        solution: sol,
        v,
        w,
        u,
        min_eigenvalue,
        gap,
        residual_minima,
        residual_tolerance,
        violations,
    })
}

/// `(1/pi) int_{|x|<1} ln(1/|x|) dx`, the mean exit time of `x' = x` from
/// the unit disk, by quadrature in polar coordinates.
pub fn expansion_mean_exit_time() -> f64 {
    integrate(&|r: f64| if r > 0.0 { -2.0 * r * r.ln() } else { 0.0 }, 0.0, 1.0, 1e-14)
}

/// Terminal-state errors of RK4 on `x' = x` from `x0` over `[0, 1]` at steps
/// `h` and `h / 2`, against `e x0`, and their ratio.
pub fn rk4_order_ratio(h: f64) -> (f64, f64, f64) {
    use mpi_inner::dynamics::integrate;
    let f = OdeSystem::radial(2, 1.0);
    // large enough that the flow never leaves it
    let x = SemialgebraicSet::ball(2, 100.0).unwrap();
    let x0 = [0.5, -0.3];
    let err = |step: f64| {
        let r = integrate(&f, &x, &x0, 1.0, step).unwrap();
        assert!(r.exit_time().is_none());
        r.final_state.iter().zip(&x0).map(|(a, b)| (a - b * std::f64::consts::E).abs()).fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(h), err(0.5 * h));
    (coarse, fine, coarse / fine)
}
