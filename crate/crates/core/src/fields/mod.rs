//! Scalar fields on ℝⁿ, their derivatives and the residual functionals of
//! the critical equation `−Δu = u|u|^{4/(n−2)}`.

mod basic;
mod bubble;
mod ops;
mod residual;
mod sampled;
mod test_fn;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::Concentration;

pub use basic::{Combination, Constant, FnField, Rescaled};
pub use bubble::{aubin_talenti, bubble_prefactor, Bubble, BubbleConfiguration};
pub use ops::{energy_terms, fd_gradient, fd_laplacian, gradient, gradient_into, laplacian, pde_residual, Step};
pub use residual::{pohozaev_residual, stationarity_residual, weak_residual, PohozaevReport, PohozaevTerm};
pub use sampled::SampledField;
pub use test_fn::{TestFunction, VectorTestFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Bubble,
    Superposition,
    Sampled,
    Custom,
}

/// An evaluable function `u: ℝⁿ → ℝ`.
///
/// Derivatives are optional: callers go through [`gradient`] and
/// [`laplacian`], which fall back to central differences.
pub trait ScalarField: Send + Sync {
    fn dimension(&self) -> usize;

    fn kind(&self) -> FieldKind;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇u(x)` into `out` and returns `true` when a closed form exists.
    fn analytic_gradient(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    fn analytic_laplacian(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Points where the field concentrates, used to grade quadrature.
    fn concentrations(&self) -> Vec<Concentration> {
        Vec::new()
    }
}

macro_rules! forward_field {
    ($($ty:ty),*) => {$(
        impl<T: ScalarField + ?Sized> ScalarField for $ty {
            fn dimension(&self) -> usize {
                (**self).dimension()
            }
            fn kind(&self) -> FieldKind {
                (**self).kind()
            }
            fn value(&self, x: &[f64]) -> f64 {
                (**self).value(x)
            }
            fn analytic_gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
                (**self).analytic_gradient(x, out)
            }
            fn analytic_laplacian(&self, x: &[f64]) -> Option<f64> {
                (**self).analytic_laplacian(x)
            }
            fn concentrations(&self) -> Vec<Concentration> {
                (**self).concentrations()
            }
        }
    )*};
}

forward_field!(&T, Box<T>, Arc<T>);

/// Shared, type-erased field handle.
pub type FieldRef = Arc<dyn ScalarField>;

/// The critical Sobolev exponent `2n/(n−2)`.
pub fn critical_exponent(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0)
}

/// The nonlinearity `u|u|^{4/(n−2)}`.
pub fn nonlinearity(u: f64, n: usize) -> f64 {
    u * u.abs().powf(4.0 / (n as f64 - 2.0))
}
