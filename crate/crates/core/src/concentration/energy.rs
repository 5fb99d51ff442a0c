use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ConcentrationSequence;
use crate::error::{ensure_positive, Error, Result};
use crate::fields::{energy_terms, FieldRef, Rescaled, ScalarField, Step};
use crate::grid::QuadConfig;

/// Which weighting of `[|∇u|², |u|^{2*}]` to integrate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    /// `|∇u|² + |u|^{2*}`, whose total on one bubble is `Λ₀`.
    #[default]
    Full,
    /// `½|∇u|² + (n−2)/(2n)|u|^{2*}`.
    Half,
}

impl Density {
    pub fn weights(self, n: usize) -> [f64; 2] {
        match self {
            Density::Full => [1.0, 1.0],
            Density::Half => [0.5, (n as f64 - 2.0) / (2.0 * n as f64)],
        }
    }

    pub fn combine(self, n: usize, [g2, pot]: [f64; 2]) -> f64 {
        let [a, b] = self.weights(n);
        a * g2 + b * pot
    }

    pub fn at<F: ScalarField + ?Sized>(self, u: &F, x: &[f64], step: Step) -> f64 {
        self.combine(x.len(), energy_terms(u, x, step))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    pub quad: QuadConfig,
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Region {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Annulus {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
    /// All of space, integrated up to `truncation` with a decay bound beyond.
    Whole {
        center: Vec<f64>,
        truncation: f64,
    },
}

/// An energy and an estimate of what the truncation left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub value: f64,
    /// Extrapolates the density on the truncation sphere with `|x|^{−2(n−1)}`
    /// decay, the rate of `|∇u|²` for a bubble; 0 for bounded regions.
    pub tail_estimate: f64,
}

pub fn energy_in<F: ScalarField + ?Sized>(
    u: &F,
    region: &Region,
    density: Density,
    cfg: &EnergyConfig,
) -> Result<EnergyValue> {
    let n = u.dimension();
    let hints = u.concentrations();
    let f = |x: &[f64]| density.at(u, x, cfg.step);
    let (center, inner, outer) = match region {
        Region::Ball { center, radius } => (center, 0.0, *radius),
        Region::Annulus { center, inner, outer } => {
            if !(inner < outer) || *inner < 0.0 {
                return Err(Error::InvalidInput(format!("annulus [{inner}, {outer}] is empty")));
            }
            (center, *inner, *outer)
        }
        Region::Whole { center, truncation } => (center, 0.0, *truncation),
    };
    if center.len() != n {
        return Err(Error::InvalidInput(format!("center must have {n} coordinates")));
    }
    let value = cfg.quad.integrate_annulus(n, center, inner, outer, &hints, f)?;
    let tail_estimate = match region {
        Region::Whole { .. } => cfg.quad.integrate_sphere(n, center, outer, f)? * outer / (n as f64 - 2.0),
        _ => 0.0,
    };
    Ok(EnergyValue { value, tail_estimate })
}

pub fn ball_energy<F: ScalarField + ?Sized>(
    u: &F,
    center: &[f64],
    radius: f64,
    density: Density,
    cfg: &EnergyConfig,
) -> Result<f64> {
    ensure_positive("radius", radius)?;
    let region = Region::Ball {
        center: center.to_vec(),
        radius,
    };
    energy_in(u, &region, density, cfg).map(|e| e.value)
}

/// `x ↦ δ^{(n−2)/2} u(δx + y)`.
pub fn rescale(u: &FieldRef, y: &[f64], delta: f64) -> Result<FieldRef> {
    Ok(Arc::new(Rescaled::new(u.clone(), y, delta)?))
}

/// Half-density energy of `rescale(u, y, λ)` over `B(0, r)`; equal to the
/// energy of `u` over `B(y, λr)` by change of variables.
pub fn scaled_measure(u: &FieldRef, y: &[f64], lambda: f64, r: f64, cfg: &EnergyConfig) -> Result<f64> {
    let v = rescale(u, y, lambda)?;
    ball_energy(&*v, &vec![0.0; u.dimension()], r, Density::Half, cfg)
}

/// Full energy of `u_k` over `B(y_k, R δ_k)`, where `(y_k, δ_k)` is the finest
/// bubble of the sequence; 0 for the zero sequence.
pub fn bubble_energy_limit(seq: &ConcentrationSequence, r_factor: f64, k: u32, cfg: &EnergyConfig) -> Result<f64> {
    ensure_positive("R", r_factor)?;
    let Some((y, delta)) = seq.finest(k)? else {
        return Ok(0.0);
    };
    ball_energy(&*seq.field(k)?, &y, r_factor * delta, Density::Full, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleEnergyRow {
    pub r_factor: f64,
    pub k: u32,
    pub energy: f64,
}

/// [`bubble_energy_limit`] over a grid, `R` varying fastest.
pub fn bubble_energy_table(
    seq: &ConcentrationSequence,
    r_factors: &[f64],
    ks: &[u32],
    cfg: &EnergyConfig,
) -> Result<Vec<BubbleEnergyRow>> {
    let mut rows = Vec::with_capacity(r_factors.len() * ks.len());
    for &k in ks {
        for &r_factor in r_factors {
            rows.push(BubbleEnergyRow {
                r_factor,
                k,
                energy: bubble_energy_limit(seq, r_factor, k, cfg)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub inner: f64,
    pub outer: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckEnergy {
    pub k: u32,
    pub r_factor: f64,
    pub inner: f64,
    pub outer: f64,
    pub total: f64,
    /// Dyadic shells `[inner·2^i, inner·2^{i+1}] ∩ [inner, outer]`.
    pub shells: Vec<Shell>,
}

impl NeckEnergy {
    pub fn max_shell(&self) -> f64 {
        self.shells.iter().map(|s| s.energy).fold(0.0, f64::max)
    }
}

/// Full energy of `u_k` over `B(y_k, outer) ∖ B(y_k, R δ_k)` around the
/// finest bubble.
pub fn neck_energy(
    seq: &ConcentrationSequence,
    k: u32,
    r_factor: f64,
    outer: f64,
    cfg: &EnergyConfig,
) -> Result<NeckEnergy> {
    ensure_positive("R", r_factor)?;
    let (y, delta) = seq.finest(k)?.unwrap_or_else(|| (vec![0.0; seq.dimension()], 0.0));
    let inner = r_factor * delta;
    if !(inner < outer) {
        return Err(Error::InvalidInput(format!(
            "neck inner radius {inner} is not below outer radius {outer}"
        )));
    }
    let u = seq.field(k)?;
    let annulus = |a: f64, b: f64| {
        let region = Region::Annulus {
            center: y.clone(),
            inner: a,
            outer: b,
        };
        energy_in(&*u, &region, Density::Full, cfg).map(|e| e.value)
    };
    let total = annulus(inner, outer)?;
    let mut shells = Vec::new();
    if inner > 0.0 {
        let mut a = inner;
        while a < outer {
            let b = (2.0 * a).min(outer);
            shells.push(Shell {
                inner: a,
                outer: b,
                energy: annulus(a, b)?,
            });
            a = b;
        }
    }
    Ok(NeckEnergy {
        k,
        r_factor,
        inner,
        outer,
        total,
        shells,
    })
}

/// Concentrated energy at one point, read from a small ball at a large index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    /// `None` when the ball energy moves by more than the allowed fraction
    /// between `r_small/2` and `r_small`.
    pub value: Option<f64>,
    pub at_radius: f64,
    pub at_half_radius: f64,
    pub relative_change: f64,
    pub weak_limit_energy: f64,
}

pub const THETA_STABILITY: f64 = 0.1;

pub fn theta_estimate(
    seq: &ConcentrationSequence,
    x: &[f64],
    r_small: f64,
    k_large: u32,
    cfg: &EnergyConfig,
) -> Result<ThetaEstimate> {
    let u = seq.field(k_large)?;
    // synthetic sequences converge weakly to zero
    let weak_limit_energy = 0.0;
    let at_radius = ball_energy(&*u, x, r_small, Density::Full, cfg)? - weak_limit_energy;
    let at_half_radius = ball_energy(&*u, x, 0.5 * r_small, Density::Full, cfg)? - weak_limit_energy;
    let relative_change = if at_radius == 0.0 {
        0.0
    } else {
        (at_radius - at_half_radius).abs() / at_radius.abs()
    };
    Ok(ThetaEstimate {
        value: (relative_change <= THETA_STABILITY).then_some(at_radius),
        at_radius,
        at_half_radius,
        relative_change,
        weak_limit_energy,
    })
}
