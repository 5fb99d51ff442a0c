use std::fmt;
use std::sync::Arc;

use super::{FieldKind, FieldRef, ScalarField};
use crate::error::{ensure_positive, Error, Result};
use crate::grid::{validate_dimension, Concentration, MAX_DIM};

/// `u ≡ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    dim: usize,
    value: f64,
}

impl Constant {
    pub fn new(n: usize, value: f64) -> Result<Self> {
        validate_dimension(n)?;
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("constant {value} is not finite")));
        }
        Ok(Constant { dim: n, value })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Constant::new(n, 0.0)
    }
}

impl ScalarField for Constant {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> FieldKind {
        FieldKind::Custom
    }

    fn value(&self, _x: &[f64]) -> f64 {
        self.value
    }

    fn analytic_gradient(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[..self.dim].fill(0.0);
        true
    }

    fn analytic_laplacian(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A field given by closures; derivatives are optional.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    value: ValueFn,
    gradient: Option<GradientFn>,
    laplacian: Option<ValueFn>,
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField")
            .field("dim", &self.dim)
            .field("gradient", &self.gradient.is_some())
            .field("laplacian", &self.laplacian.is_some())
            .finish()
    }
}

impl FnField {
    pub fn new(n: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        validate_dimension(n)?;
        Ok(FnField {
            dim: n,
            value: Arc::new(value),
            gradient: None,
            laplacian: None,
        })
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_laplacian(mut self, laplacian: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.laplacian = Some(Arc::new(laplacian));
        self
    }
}

impl ScalarField for FnField {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> FieldKind {
        FieldKind::Custom
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn analytic_gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        match &self.gradient {
            Some(g) => {
                g(x, out);
                true
            }
            None => false,
        }
    }

    fn analytic_laplacian(&self, x: &[f64]) -> Option<f64> {
        self.laplacian.as_ref().map(|l| l(x))
    }
}

/// Linear combination `Σ cᵢ uᵢ` of arbitrary fields.
#[derive(Clone)]
pub struct Combination {
    dim: usize,
    terms: Vec<(f64, FieldRef)>,
}

impl fmt::Debug for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coefs: Vec<f64> = self.terms.iter().map(|t| t.0).collect();
        f.debug_struct("Combination")
            .field("dim", &self.dim)
            .field("coefficients", &coefs)
            .finish()
    }
}

impl Combination {
    pub fn new(terms: Vec<(f64, FieldRef)>) -> Result<Self> {
        let dim = terms
            .first()
            .map(|t| t.1.dimension())
            .ok_or_else(|| Error::InvalidInput("empty combination".into()))?;
        if terms.iter().any(|t| t.1.dimension() != dim || !t.0.is_finite()) {
            return Err(Error::InvalidInput(
                "combined fields must share a dimension and have finite coefficients".into(),
            ));
        }
        Ok(Combination { dim, terms })
    }

    /// `a − b`.
    pub fn difference(a: FieldRef, b: FieldRef) -> Result<Self> {
        Combination::new(vec![(1.0, a), (-1.0, b)])
    }
}

impl ScalarField for Combination {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> FieldKind {
        FieldKind::Superposition
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, u)| c * u.value(x)).sum()
    }

    fn analytic_gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        let n = self.dim;
        let mut tmp = [0.0; MAX_DIM];
        out[..n].fill(0.0);
        for (c, u) in &self.terms {
            if !u.analytic_gradient(x, &mut tmp[..n]) {
                return false;
            }
            for i in 0..n {
                out[i] += c * tmp[i];
            }
        }
        true
    }

    fn analytic_laplacian(&self, x: &[f64]) -> Option<f64> {
        self.terms
            .iter()
            .map(|(c, u)| u.analytic_laplacian(x).map(|l| c * l))
            .sum()
    }

    fn concentrations(&self) -> Vec<Concentration> {
        self.terms.iter().flat_map(|t| t.1.concentrations()).collect()
    }
}

/// The blow-up `x ↦ λ^{(n−2)/2} u(λx + y)`.
#[derive(Clone)]
pub struct Rescaled {
    inner: FieldRef,
    shift: Vec<f64>,
    factor: f64,
    amplitude: f64,
}

impl fmt::Debug for Rescaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rescaled")
            .field("shift", &self.shift)
            .field("factor", &self.factor)
            .finish()
    }
}

impl Rescaled {
    pub fn new(inner: FieldRef, shift: &[f64], factor: f64) -> Result<Self> {
        ensure_positive("rescaling factor", factor)?;
        let n = inner.dimension();
        if shift.len() != n {
            return Err(Error::InvalidInput(format!("shift must have {n} coordinates")));
        }
        Ok(Rescaled {
            amplitude: factor.powf((n as f64 - 2.0) / 2.0),
            inner,
            shift: shift.to_vec(),
            factor,
        })
    }

    fn map(&self, x: &[f64], out: &mut [f64; MAX_DIM]) {
        for (i, (xi, yi)) in x.iter().zip(&self.shift).enumerate() {
            out[i] = self.factor * xi + yi;
        }
    }
}

impl ScalarField for Rescaled {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn kind(&self) -> FieldKind {
        self.inner.kind()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut z = [0.0; MAX_DIM];
        self.map(x, &mut z);
        self.amplitude * self.inner.value(&z[..x.len()])
    }

    fn analytic_gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        let n = x.len();
        let mut z = [0.0; MAX_DIM];
        self.map(x, &mut z);
        if !self.inner.analytic_gradient(&z[..n], out) {
            return false;
        }
        let c = self.amplitude * self.factor;
        out[..n].iter_mut().for_each(|g| *g *= c);
        true
    }

    fn analytic_laplacian(&self, x: &[f64]) -> Option<f64> {
        let mut z = [0.0; MAX_DIM];
        self.map(x, &mut z);
        let c = self.amplitude * self.factor * self.factor;
        self.inner.analytic_laplacian(&z[..x.len()]).map(|l| c * l)
    }

    fn concentrations(&self) -> Vec<Concentration> {
        self.inner
            .concentrations()
            .into_iter()
            .map(|c| Concentration {
                center: c
                    .center
                    .iter()
                    .zip(&self.shift)
                    .map(|(a, y)| (a - y) / self.factor)
                    .collect(),
                scale: c.scale / self.factor,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{aubin_talenti, gradient, laplacian, Bubble, Step};
    use approx::assert_relative_eq;

    #[test]
    fn rescaling_a_bubble_recovers_the_standard_profile() {
        let delta = 1e-3;
        let y = [0.2, -0.1, 0.4];
        let b: FieldRef = Arc::new(aubin_talenti(3, delta, &y).unwrap());
        let r = Rescaled::new(b, &y, delta).unwrap();
        let u = Bubble::standard(3).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, 2.0, -3.0], [0.5, 0.0, 7.0]] {
            assert_relative_eq!(r.value(&x), u.value(&x), max_relative = 1e-12);
            assert_relative_eq!(
                r.analytic_laplacian(&x).unwrap(),
                u.analytic_laplacian(&x).unwrap(),
                max_relative = 1e-11
            );
        }
        let hint = &r.concentrations()[0];
        assert!(hint.center.iter().all(|c| c.abs() < 1e-12));
        assert_relative_eq!(hint.scale, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn closures_and_numeric_derivatives() {
        let sq = FnField::new(3, |x| x.iter().map(|v| v * v).sum()).unwrap();
        assert_relative_eq!(
            laplacian(&sq, &[0.3, 0.1, -0.7], Step::Absolute(1e-3)),
            6.0,
            max_relative = 1e-6
        );
        let xy = FnField::new(3, |x| x[0] * x[1]).unwrap();
        assert!(laplacian(&xy, &[0.3, 0.1, -0.7], Step::default()).abs() < 1e-6);
        let lin = FnField::new(3, |x| x[0]).unwrap();
        let g = gradient(&lin, &[1.0, 2.0, 3.0], Step::default());
        assert_relative_eq!(g[0], 1.0, max_relative = 1e-9);
        assert!(g[1].abs() < 1e-9 && g[2].abs() < 1e-9);
        let c = Constant::new(4, 3.0).unwrap();
        assert_eq!(gradient(&c, &[0.0; 4], Step::default()), vec![0.0; 4]);
    }

    #[test]
    fn difference_of_identical_fields_vanishes() {
        let b: FieldRef = Arc::new(aubin_talenti(4, 0.3, &[0.0; 4]).unwrap());
        let d = Combination::difference(b.clone(), b).unwrap();
        assert_eq!(d.value(&[0.1, 0.2, 0.3, 0.4]), 0.0);
        assert_eq!(d.analytic_laplacian(&[0.1, 0.2, 0.3, 0.4]), Some(0.0));
    }
}
