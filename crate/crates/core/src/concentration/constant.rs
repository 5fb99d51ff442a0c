use serde::{Deserialize, Serialize};

use super::Density;
use crate::error::{ensure_positive, Error, Result};
use crate::fields::{bubble_prefactor, critical_exponent};
use crate::grid::gauss::gauss_legendre;
use crate::grid::{sphere_area, validate_dimension};

const DEFAULT_NODES: usize = 64;

/// `[∫ |∇U|², ∫ |U|^{2*}]` of the standard bubble over `lo ≤ |x| ≤ hi`.
///
/// One-dimensional Gauss–Legendre in `r` on `[0, 1]` and in `t = 1/r` beyond,
/// where both integrands are analytic; `hi` may be infinite.
pub fn standard_radial_parts(n: usize, lo: f64, hi: f64, nodes: usize) -> Result<[f64; 2]> {
    validate_dimension(n)?;
    if !(lo >= 0.0) || !(hi > lo) {
        return Err(Error::InvalidInput(format!("radial range [{lo}, {hi}] is empty")));
    }
    let nf = n as f64;
    let c = bubble_prefactor(n);
    let a = (nf - 2.0) / 2.0;
    let p = critical_exponent(n);
    let parts = |r: f64| {
        let q = 1.0 + r * r;
        let u = c * q.powf(-a);
        let du = (nf - 2.0) * c * r * q.powf(-a - 1.0);
        let j = r.powi(n as i32 - 1);
        [du * du * j, u.powf(p) * j]
    };
    let mut acc = [0.0; 2];
    let mut add = |lo: f64, hi: f64, mapped: bool| {
        for (t, wt) in gauss_legendre(nodes, lo, hi) {
            let (r, jac) = if mapped { (1.0 / t, 1.0 / (t * t)) } else { (t, 1.0) };
            let v = parts(r);
            acc[0] += wt * jac * v[0];
            acc[1] += wt * jac * v[1];
        }
    };
    if lo < 1.0 {
        add(lo, hi.min(1.0), false);
    }
    if hi > 1.0 {
        let t_lo = if hi.is_finite() { 1.0 / hi } else { 0.0 };
        add(t_lo, 1.0 / lo.max(1.0), true);
    }
    let area = sphere_area(n, 1.0);
    Ok([area * acc[0], area * acc[1]])
}

/// Standard-bubble energy over `lo ≤ |x| ≤ hi` for the given density.
pub fn standard_radial_energy(n: usize, lo: f64, hi: f64, density: Density) -> Result<f64> {
    let parts = standard_radial_parts(n, lo, hi, DEFAULT_NODES)?;
    Ok(density.combine(n, parts))
}

/// Full energy of the standard bubble outside `B(0, radius)`.
pub fn bubble_tail_energy(n: usize, radius: f64) -> Result<f64> {
    ensure_positive("radius", radius)?;
    standard_radial_energy(n, radius, f64::INFINITY, Density::Full)
}

/// Radius at which the standard bubble's ball energy reaches `target`.
pub fn standard_threshold_radius(n: usize, target: f64, density: Density) -> Result<f64> {
    let total = standard_radial_energy(n, 0.0, f64::INFINITY, density)?;
    if !(target > 0.0 && target < total) {
        return Err(Error::InvalidInput(format!(
            "threshold {target} is outside (0, {total})"
        )));
    }
    let (mut lo, mut hi) = (1e-8f64, 1e8f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if standard_radial_energy(n, 0.0, mid, density)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// `Λ₀ = ‖∇U‖² + ‖U‖^{2*}_{2*}` for the standard bubble, with the change
/// under doubling of the radial grid as its error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleConstant {
    pub dimension: usize,
    pub value: f64,
    pub error_bound: f64,
    pub nodes: usize,
}

impl BubbleConstant {
    pub fn compute(n: usize) -> Result<Self> {
        Self::with_nodes(n, DEFAULT_NODES)
    }

    /// Evaluates at `nodes` and `2·nodes` per radial piece and keeps the finer value.
    pub fn with_nodes(n: usize, nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidInput("need at least one radial node".into()));
        }
        let coarse: f64 = standard_radial_parts(n, 0.0, f64::INFINITY, nodes)?.iter().sum();
        let fine: f64 = standard_radial_parts(n, 0.0, f64::INFINITY, 2 * nodes)?.iter().sum();
        Ok(BubbleConstant {
            dimension: n,
            value: fine,
            error_bound: (fine - coarse).abs() + 4.0 * f64::EPSILON * fine,
            nodes: 2 * nodes,
        })
    }
}
