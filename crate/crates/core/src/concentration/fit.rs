use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::fields::{bubble_prefactor, ScalarField};
use crate::grid::{build_ball_rule, QuadOrder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Samples fill `B(y₀, sample_radius · δ₀)`.
    pub sample_radius: f64,
    pub samples: QuadOrder,
    /// Stop once a step moves the parameters by less than this (relative).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            sample_radius: 5.0,
            samples: QuadOrder::new(10, 4),
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

/// Least-squares bubble `σ U_{δ, y}` with `σ = ±1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleFit {
    pub scale: f64,
    pub center: Vec<f64>,
    pub sign: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Root-mean-square misfit relative to the largest sample.
    pub relative_rms: f64,
}

/// Levenberg–Marquardt in `(log δ, y)` started from `(δ₀, y₀)`.
///
/// The fit runs in blown-up coordinates `x ↦ δ₀^{(n−2)/2} u(δ₀x + y₀)`, where
/// the target is close to the standard bubble.
pub fn fit_bubble<F: ScalarField + ?Sized>(u: &F, y0: &[f64], delta0: f64, cfg: &FitConfig) -> Result<BubbleFit> {
    ensure_positive("initial scale", delta0)?;
    let n = u.dimension();
    if y0.len() != n {
        return Err(Error::InvalidInput(format!("center must have {n} coordinates")));
    }
    let a = (n as f64 - 2.0) / 2.0;
    let amp = delta0.powf(a);
    let xs = build_ball_rule(n, &vec![0.0; n], cfg.sample_radius, cfg.samples)?.nodes();
    let data: Vec<f64> = xs
        .iter()
        .map(|x| {
            let z: Vec<f64> = x.iter().zip(y0).map(|(xi, yi)| delta0 * xi + yi).collect();
            amp * u.value(&z)
        })
        .collect();
    let peak = data
        .iter()
        .copied()
        .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::Degenerate {
            radius: cfg.sample_radius * delta0,
            value: peak,
        });
    }
    let sign = peak.signum();
    let c0 = bubble_prefactor(n);
    let m = xs.len();
    let p = n + 1;

    let eval = |theta: &DVector<f64>, jac: Option<&mut DMatrix<f64>>| -> DVector<f64> {
        let s = theta[0].exp();
        let s2 = s * s;
        let mut res = DVector::zeros(m);
        let mut jac = jac;
        for (i, x) in xs.iter().enumerate() {
            let q: f64 = (0..n).map(|j| (x[j] - theta[j + 1]).powi(2)).sum();
            let model = sign * c0 * (s / (s2 + q)).powf(a);
            res[i] = model - data[i];
            if let Some(jm) = jac.as_deref_mut() {
                jm[(i, 0)] = a * model * (q - s2) / (s2 + q);
                for j in 0..n {
                    jm[(i, j + 1)] = 2.0 * a * model * (x[j] - theta[j + 1]) / (s2 + q);
                }
            }
        }
        res
    };

    let mut theta = DVector::zeros(p);
    let mut jac = DMatrix::zeros(m, p);
    let mut res = eval(&theta, Some(&mut jac));
    let mut cost = res.norm_squared();
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let grad = &jt * &res;
        let mut damped = normal.clone();
        for j in 0..p {
            damped[(j, j)] += mu * normal[(j, j)].max(1e-300);
        }
        let Some(step) = damped.lu().solve(&(-grad)) else {
            break;
        };
        let trial = &theta + &step;
        let trial_res = eval(&trial, None);
        let trial_cost = trial_res.norm_squared();
        if trial_cost.is_finite() && trial_cost <= cost {
            theta = trial;
            res = eval(&theta, Some(&mut jac));
            cost = trial_cost;
            mu = (mu / 3.0).max(1e-12);
            if step.amax() <= cfg.tolerance * (1.0 + theta.amax()) {
                converged = true;
                break;
            }
        } else {
            mu *= 4.0;
            if mu > 1e16 {
                break;
            }
        }
    }
    let relative_rms = (cost / m as f64).sqrt() / peak.abs();
    Ok(BubbleFit {
        scale: delta0 * theta[0].exp(),
        center: (0..n).map(|j| y0[j] + delta0 * theta[j + 1]).collect(),
        sign,
        iterations,
        converged,
        relative_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Bubble;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_an_exact_bubble_from_a_rough_guess() {
        let truth = Bubble::new(4, &[0.1, 0.0, -0.2, 0.0], 1e-3, -1.0).unwrap();
        let fit = fit_bubble(&truth, &[0.1, 0.0005, -0.2, 0.0], 1.6e-3, &FitConfig::default()).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert_eq!(fit.sign, -1.0);
        assert_relative_eq!(fit.scale, 1e-3, max_relative = 1e-9);
        for (a, b) in fit.center.iter().zip(truth.center()) {
            assert!((a - b).abs() < 1e-11, "{fit:?}");
        }
        assert!(fit.relative_rms < 1e-10);
    }
}
