use super::{FieldKind, ScalarField};
use crate::error::{ensure_positive, Error, Result};
use crate::grid::{validate_dimension, Concentration};

/// `(n(n−2))^{(n−2)/4}`, the value at the origin of the standard profile.
pub fn bubble_prefactor(n: usize) -> f64 {
    let nf = n as f64;
    (nf * (nf - 2.0)).powf((nf - 2.0) / 4.0)
}

/// `w · δ^{−(n−2)/2} U((x − y)/δ)` with the standard profile
/// `U(x) = (n(n−2))^{(n−2)/4} (1 + |x|²)^{−(n−2)/2}`.
///
/// With `w = ±1` this solves the critical equation exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Bubble {
    dim: usize,
    center: Vec<f64>,
    scale: f64,
    weight: f64,
    prefactor: f64,
}

/// Positive bubble of scale `delta` centered at `center`.
pub fn aubin_talenti(n: usize, delta: f64, center: &[f64]) -> Result<Bubble> {
    Bubble::new(n, center, delta, 1.0)
}

impl Bubble {
    pub fn new(n: usize, center: &[f64], scale: f64, weight: f64) -> Result<Bubble> {
        validate_dimension(n)?;
        ensure_positive("bubble scale", scale)?;
        if center.len() != n || center.iter().any(|c| !c.is_finite()) || !weight.is_finite() {
            return Err(Error::InvalidInput(format!(
                "bubble center must have {n} finite coordinates and a finite weight"
            )));
        }
        Ok(Bubble {
            dim: n,
            center: center.to_vec(),
            scale,
            weight,
            prefactor: bubble_prefactor(n),
        })
    }

    /// The standard bubble: `δ = 1`, centered at the origin.
    pub fn standard(n: usize) -> Result<Bubble> {
        aubin_talenti(n, 1.0, &vec![0.0; n])
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    fn split(&self, x: &[f64]) -> (f64, f64) {
        let d2 = self.scale * self.scale;
        let s2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        (d2 + s2, d2)
    }

    fn half(&self) -> f64 {
        (self.dim as f64 - 2.0) / 2.0
    }
}

impl ScalarField for Bubble {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> FieldKind {
        FieldKind::Bubble
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (q, _) = self.split(x);
        self.weight * self.prefactor * (self.scale / q).powf(self.half())
    }

    fn analytic_gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        let (q, _) = self.split(x);
        let a = self.half();
        // ∂ᵢ = −(n−2) w c δ^a q^{−a−1} (xᵢ − yᵢ)
        let coef = -2.0 * a * self.weight * self.prefactor * (self.scale / q).powf(a) / q;
        for i in 0..self.dim {
            out[i] = coef * (x[i] - self.center[i]);
        }
        true
    }

    fn analytic_laplacian(&self, x: &[f64]) -> Option<f64> {
        let (q, d2) = self.split(x);
        let a = self.half();
        let n = self.dim as f64;
        Some(-n * 2.0 * a * self.weight * self.prefactor * (self.scale / q).powf(a) * d2 / (q * q))
    }

    fn concentrations(&self) -> Vec<Concentration> {
        vec![Concentration {
            center: self.center.clone(),
            scale: self.scale,
        }]
    }
}

/// Pointwise sum of bubbles sharing one dimension.
///
/// Sums of two or more bubbles are only approximate solutions; operations
/// that assume exactness report the interaction residual.
#[derive(Debug, Clone, PartialEq)]
pub struct BubbleConfiguration {
    bubbles: Vec<Bubble>,
}

impl BubbleConfiguration {
    pub fn new(bubbles: Vec<Bubble>) -> Result<Self> {
        let first = bubbles
            .first()
            .ok_or_else(|| Error::InvalidInput("bubble configuration is empty".into()))?;
        if bubbles.iter().any(|b| b.dim != first.dim) {
            return Err(Error::InvalidInput("bubbles have different dimensions".into()));
        }
        Ok(BubbleConfiguration { bubbles })
    }

    pub fn bubbles(&self) -> &[Bubble] {
        &self.bubbles
    }
}

impl ScalarField for BubbleConfiguration {
    fn dimension(&self) -> usize {
        self.bubbles[0].dim
    }

    fn kind(&self) -> FieldKind {
        FieldKind::Superposition
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.bubbles.iter().map(|b| b.value(x)).sum()
    }

    fn analytic_gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        let n = self.dimension();
        let mut tmp = [0.0; crate::grid::MAX_DIM];
        out[..n].fill(0.0);
        for b in &self.bubbles {
            b.analytic_gradient(x, &mut tmp[..n]);
            for i in 0..n {
                out[i] += tmp[i];
            }
        }
        true
    }

    fn analytic_laplacian(&self, x: &[f64]) -> Option<f64> {
        self.bubbles.iter().map(|b| b.analytic_laplacian(x)).sum()
    }

    fn concentrations(&self) -> Vec<Concentration> {
        self.bubbles.iter().flat_map(|b| b.concentrations()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{fd_gradient, fd_laplacian, pde_residual, Step};
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_values() {
        let u3 = Bubble::standard(3).unwrap();
        assert_relative_eq!(u3.value(&[0.0; 3]), 3f64.powf(0.25), max_relative = 1e-15);
        let u4 = Bubble::standard(4).unwrap();
        assert_relative_eq!(u4.value(&[1.0, 0.0, 0.0, 0.0]), 8f64.sqrt() / 2.0, max_relative = 1e-15);
        let u = aubin_talenti(3, 2.0, &[0.0; 3]).unwrap();
        assert_relative_eq!(u.value(&[0.0; 3]), 3f64.powf(0.25) / 2f64.sqrt(), max_relative = 1e-15);
        assert!(aubin_talenti(3, 0.0, &[0.0; 3]).is_err());
        assert!(aubin_talenti(3, -1.0, &[0.0; 3]).is_err());
    }

    #[test]
    fn laplacian_at_origin_is_minus_power() {
        let u = Bubble::standard(3).unwrap();
        assert_relative_eq!(
            u.analytic_laplacian(&[0.0; 3]).unwrap(),
            -(3f64.powf(1.25)),
            max_relative = 1e-14
        );
        let fd = fd_laplacian(&u, &[0.0; 3], 1e-3);
        assert_relative_eq!(fd, -(3f64.powf(1.25)), max_relative = 1e-5);
    }

    #[test]
    fn gradient_matches_differences() {
        let u = Bubble::standard(3).unwrap();
        let x = [1.0, 0.0, 0.0];
        let mut g = [0.0; 3];
        u.analytic_gradient(&x, &mut g);
        // −(n−2) x U(x) / (1 + |x|²)
        assert_relative_eq!(g[0], -u.value(&x) / 2.0, max_relative = 1e-14);
        let fd = fd_gradient(&u, &x, 1e-4);
        for i in 0..3 {
            assert!((fd[i] - g[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn exact_solution_in_several_dimensions() {
        for n in 3..=8 {
            let y: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
            for w in [1.0, -1.0] {
                let u = Bubble::new(n, &y, 0.7, w).unwrap();
                let x: Vec<f64> = (0..n).map(|i| 0.3 - 0.05 * i as f64).collect();
                assert!(pde_residual(&u, &x, Step::default()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn superposition_adds() {
        let a = aubin_talenti(3, 1.0, &[0.0; 3]).unwrap();
        let b = aubin_talenti(3, 0.5, &[1.0, 0.0, 0.0]).unwrap();
        let s = BubbleConfiguration::new(vec![a.clone(), b.clone()]).unwrap();
        let x = [0.2, 0.4, -0.1];
        assert_relative_eq!(s.value(&x), a.value(&x) + b.value(&x));
        assert_eq!(s.concentrations().len(), 2);
        assert!(BubbleConfiguration::new(vec![]).is_err());
    }
}
