use serde::{Deserialize, Serialize};

use super::{critical_exponent, nonlinearity, ScalarField};
use crate::grid::MAX_DIM;

/// Finite-difference step policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "h")]
pub enum Step {
    /// `h = c · (1 + |x|)`.
    Relative(f64),
    Absolute(f64),
}

impl Default for Step {
    fn default() -> Self {
        Step::Relative(1e-4)
    }
}

impl Step {
    pub fn at(&self, x: &[f64]) -> f64 {
        match *self {
            Step::Relative(c) => c * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt()),
            Step::Absolute(h) => h,
        }
    }
}

/// `∇u(x)` into `out`: closed form when available, else central differences.
pub fn gradient_into<F: ScalarField + ?Sized>(u: &F, x: &[f64], step: Step, out: &mut [f64]) {
    if !u.analytic_gradient(x, out) {
        fd_gradient_into(u, x, step.at(x), out);
    }
}

pub fn gradient<F: ScalarField + ?Sized>(u: &F, x: &[f64], step: Step) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    gradient_into(u, x, step, &mut out);
    out
}

fn fd_gradient_into<F: ScalarField + ?Sized>(u: &F, x: &[f64], h: f64, out: &mut [f64]) {
    let n = x.len();
    let mut p = [0.0; MAX_DIM];
    p[..n].copy_from_slice(x);
    for i in 0..n {
        p[i] = x[i] + h;
        let fp = u.value(&p[..n]);
        p[i] = x[i] - h;
        let fm = u.value(&p[..n]);
        p[i] = x[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
}

/// Central-difference gradient with step `h`, ignoring any closed form.
pub fn fd_gradient<F: ScalarField + ?Sized>(u: &F, x: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    fd_gradient_into(u, x, h, &mut out);
    out
}

/// `Δu(x)`: closed form when available, else the second-order stencil.
pub fn laplacian<F: ScalarField + ?Sized>(u: &F, x: &[f64], step: Step) -> f64 {
    u.analytic_laplacian(x)
        .unwrap_or_else(|| fd_laplacian(u, x, step.at(x)))
}

/// `Σᵢ (u(x + heᵢ) − 2u(x) + u(x − heᵢ)) / h²`.
pub fn fd_laplacian<F: ScalarField + ?Sized>(u: &F, x: &[f64], h: f64) -> f64 {
    let n = x.len();
    let mut p = [0.0; MAX_DIM];
    p[..n].copy_from_slice(x);
    let centre = u.value(x);
    let mut acc = 0.0;
    for i in 0..n {
        p[i] = x[i] + h;
        let fp = u.value(&p[..n]);
        p[i] = x[i] - h;
        let fm = u.value(&p[..n]);
        p[i] = x[i];
        acc += fp - 2.0 * centre + fm;
    }
    acc / (h * h)
}

/// `[|∇u(x)|², |u(x)|^{2n/(n−2)}]`, the two pieces of every energy density.
pub fn energy_terms<F: ScalarField + ?Sized>(u: &F, x: &[f64], step: Step) -> [f64; 2] {
    let n = x.len();
    let mut g = [0.0; MAX_DIM];
    gradient_into(u, x, step, &mut g[..n]);
    let g2 = g[..n].iter().map(|v| v * v).sum();
    [g2, u.value(x).abs().powf(critical_exponent(n))]
}

/// `−Δu(x) − u(x)|u(x)|^{4/(n−2)}`.
pub fn pde_residual<F: ScalarField + ?Sized>(u: &F, x: &[f64], step: Step) -> f64 {
    -laplacian(u, x, step) - nonlinearity(u.value(x), u.dimension())
}
