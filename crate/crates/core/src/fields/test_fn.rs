use rand::Rng;

use crate::error::{ensure_positive, Error, Result};

/// `(a₀ + a·(x − c)/R) · b(|x − c|/R)` with the bump `b(t) = exp(1/(t² − 1))`
/// for `t < 1` and `0` otherwise. Smooth, supported in `B(c, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    center: Vec<f64>,
    radius: f64,
    constant: f64,
    linear: Vec<f64>,
}

/// Values of the bump profile `B(q) = exp(1/(q − 1))` and its first two
/// derivatives in `q = t²`.
fn bump(q: f64) -> (f64, f64, f64) {
    if q >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let m = q - 1.0;
    let b = (1.0 / m).exp();
    let m2 = m * m;
    let d1 = -b / m2;
    let d2 = b * (1.0 / (m2 * m2) + 2.0 / (m2 * m));
    (b, d1, d2)
}

impl TestFunction {
    pub fn new(center: &[f64], radius: f64, constant: f64, linear: &[f64]) -> Result<Self> {
        ensure_positive("support radius", radius)?;
        if linear.len() != center.len() {
            return Err(Error::InvalidInput(
                "linear coefficients must match the dimension".into(),
            ));
        }
        Ok(TestFunction {
            center: center.to_vec(),
            radius,
            constant,
            linear: linear.to_vec(),
        })
    }

    /// Plain bump `b(|x − c|/R)`.
    pub fn bump(center: &[f64], radius: f64) -> Result<Self> {
        TestFunction::new(center, radius, 1.0, &vec![0.0; center.len()])
    }

    /// Random affine factor with coefficients uniform in `[−1, 1]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Result<Self> {
        let constant = rng.gen_range(-1.0..=1.0);
        let linear: Vec<f64> = center.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
        TestFunction::new(center, radius, constant, &linear)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `a·Φ + b·Ψ` for test functions on the same support ball.
    pub fn combine(&self, a: f64, other: &TestFunction, b: f64) -> Result<Self> {
        if self.center != other.center || self.radius != other.radius {
            return Err(Error::InvalidInput("test functions must share a support ball".into()));
        }
        let linear: Vec<f64> = self
            .linear
            .iter()
            .zip(&other.linear)
            .map(|(x, y)| a * x + b * y)
            .collect();
        TestFunction::new(
            &self.center,
            self.radius,
            a * self.constant + b * other.constant,
            &linear,
        )
    }

    fn local(&self, x: &[f64]) -> (f64, f64, f64) {
        // returns (q, polynomial value, a·z/R) with z = x − c
        let r2 = self.radius * self.radius;
        let mut s2 = 0.0;
        let mut lin = 0.0;
        for ((xi, ci), ai) in x.iter().zip(&self.center).zip(&self.linear) {
            let z = xi - ci;
            s2 += z * z;
            lin += ai * z;
        }
        let lin = lin / self.radius;
        (s2 / r2, self.constant + lin, lin)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (q, p, _) = self.local(x);
        p * bump(q).0
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let (q, p, _) = self.local(x);
        let (b, d1, _) = bump(q);
        let r2 = self.radius * self.radius;
        for i in 0..self.center.len() {
            let z = x[i] - self.center[i];
            out[i] = self.linear[i] / self.radius * b + p * d1 * 2.0 * z / r2;
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let (q, p, lin) = self.local(x);
        let (_, d1, d2) = bump(q);
        let n = self.center.len() as f64;
        let r2 = self.radius * self.radius;
        let lap_bump = d2 * 4.0 * q / r2 + d1 * 2.0 * n / r2;
        // 2 ∇P·∇b with ∇P = a/R and ∇b = 2 B'(q) z/R²
        let cross = 2.0 * d1 * 2.0 * lin / r2;
        p * lap_bump + cross
    }
}

/// `Φ = (Φ¹, …, Φⁿ)` with every component supported in one ball.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTestFunction {
    components: Vec<TestFunction>,
}

impl VectorTestFunction {
    pub fn new(components: Vec<TestFunction>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidInput("vector test function has no components".into()))?;
        let n = first.center.len();
        if components.len() != n
            || components
                .iter()
                .any(|c| c.center != first.center || c.radius != first.radius)
        {
            return Err(Error::InvalidInput(
                "vector test function needs n components on one support ball".into(),
            ));
        }
        Ok(VectorTestFunction { components })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Result<Self> {
        let comps = center
            .iter()
            .map(|_| TestFunction::random(rng, center, radius))
            .collect::<Result<Vec<_>>>()?;
        VectorTestFunction::new(comps)
    }

    pub fn center(&self) -> &[f64] {
        &self.components[0].center
    }

    pub fn radius(&self) -> f64 {
        self.components[0].radius
    }

    pub fn components(&self) -> &[TestFunction] {
        &self.components
    }

    pub fn combine(&self, a: f64, other: &VectorTestFunction, b: f64) -> Result<Self> {
        let comps = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(p, q)| p.combine(a, q, b))
            .collect::<Result<Vec<_>>>()?;
        VectorTestFunction::new(comps)
    }

    /// Writes `∂ᵢΦʲ` into `jac[j * n + i]` and returns `div Φ`.
    pub fn jacobian_into(&self, x: &[f64], jac: &mut [f64]) -> f64 {
        let n = self.components.len();
        let mut div = 0.0;
        for (j, c) in self.components.iter().enumerate() {
            c.gradient_into(x, &mut jac[j * n..(j + 1) * n]);
            div += jac[j * n + j];
        }
        div
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{fd_gradient, fd_laplacian, FnField};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn derivatives_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = TestFunction::random(&mut rng, &[0.1, 0.2, -0.3], 1.5).unwrap();
        let p2 = phi.clone();
        let f = FnField::new(3, move |x| p2.value(x)).unwrap();
        for x in [[0.3, 0.1, 0.0], [-0.5, 0.4, 0.2], [0.9, -0.2, -0.6]] {
            let fd = fd_gradient(&f, &x, 1e-5);
            let mut g = [0.0; 3];
            phi.gradient_into(&x, &mut g);
            for i in 0..3 {
                assert!((fd[i] - g[i]).abs() < 1e-7, "{fd:?} vs {g:?}");
            }
            let lap = fd_laplacian(&f, &x, 1e-4);
            assert!((lap - phi.laplacian(&x)).abs() < 1e-5 * (1.0 + lap.abs()));
        }
    }

    #[test]
    fn vanishes_outside_support() {
        let phi = TestFunction::bump(&[0.0; 3], 1.0).unwrap();
        assert_eq!(phi.value(&[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(phi.value(&[0.0, 2.0, 0.0]), 0.0);
        assert_eq!(phi.laplacian(&[0.0, 2.0, 0.0]), 0.0);
        assert!((phi.value(&[0.0; 3]) - (-1f64).exp()).abs() < 1e-15);
    }
}
