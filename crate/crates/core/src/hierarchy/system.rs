use crate::error::{check_dim, Error, Result};
use crate::poly::{parse_polynomial, PolyEvaluator, Polynomial};

/// Polynomial vector field `x' = f(x)`.
#[derive(Clone, Debug)]
pub struct OdeSystem {
    field: Vec<Polynomial>,
    evaluators: Vec<PolyEvaluator>,
}

impl OdeSystem {
    pub fn new(field: Vec<Polynomial>) -> Result<Self> {
        let n = field.len();
        if n == 0 {
            return Err(Error::InvalidArgument("vector field has no components".into()));
        }
        for fi in &field {
            check_dim(n, fi.n())?;
        }
        let evaluators = field.iter().map(Polynomial::evaluator).collect();
        Ok(OdeSystem { field, evaluators })
    }

    /// Parses one component string per state variable.
    pub fn parse(components: &[&str]) -> Result<Self> {
        let n = components.len();
        let field = components
            .iter()
            .map(|s| parse_polynomial(s, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(field)
    }

    /// Van der Pol oscillator in reversed time:
    /// `x1' = -2 x2`, `x2' = 0.8 x1 + 10 (alpha^2 x1^2 - 0.2) x2`.
    pub fn van_der_pol(alpha: f64) -> Self {
        let a2 = alpha * alpha;
        Self::parse(&["-2*x2", &format!("0.8*x1 + 10*({a2}*x1^2 - 0.2)*x2")]).expect("well-formed")
    }

    /// Linear field `x' = rate * x`.
    pub fn radial(n: usize, rate: f64) -> Self {
        let field = (0..n)
            .map(|i| Polynomial::var(n, i).expect("index in range").scale(rate))
            .collect();
        Self::new(field).expect("consistent dimension")
    }

    pub fn n(&self) -> usize {
        self.field.len()
    }

    pub fn field(&self) -> &[Polynomial] {
        &self.field
    }

    /// `delta_0`: maximum total degree of the components.
    pub fn degree(&self) -> u32 {
        self.field.iter().map(Polynomial::total_degree).max().unwrap_or(0)
    }

    /// Writes `f(x)` into `out`.
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.evaluators) {
            *o = f.eval(x);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), x.len())?;
        let mut out = vec![0.0; self.n()];
        self.eval_into(x, &mut out);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_pol_values() {
        let f = OdeSystem::van_der_pol(1.02);
        assert_eq!(f.degree(), 3);
        let y = f.eval(&[1.0, 1.0]).unwrap();
        assert_eq!(y[0], -2.0);
        assert!((y[1] - 9.204).abs() < 1e-12);
    }

    #[test]
    fn van_der_pol_lie_derivative_of_norm() {
        let f = OdeSystem::van_der_pol(1.02);
        let v = Polynomial::ball(2, 0.0).scale(-1.0);
        let d = v.lie_derivative(f.field()).unwrap();
        let expected = parse_polynomial("-2.4x1x2 - 4x2^2 + 20.808x1^2x2^2", 2).unwrap();
        assert!(d.sub(&expected).unwrap().max_abs_coeff() < 1e-12, "{d}");
    }

    #[test]
    fn rejects_mismatched_components() {
        assert!(OdeSystem::new(vec![Polynomial::zero(2)]).is_err());
        assert!(OdeSystem::new(vec![]).is_err());
    }
}
