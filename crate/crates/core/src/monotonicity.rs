//! The radius-indexed quantity `E_u(x, r)`, its monotonicity and the local
//! energy bounds it controls.
//!
//! All formulations are assembled from five integrals over `B = B(x, r)`:
//! `V = ∫_B |u|^{2*}`, `G = ∫_B |∇u|²`, `Q = ∫_B u²`, `S = ∫_∂B u²` and the
//! radial derivative `S'`, taken by a centered difference in `r`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::fields::{energy_terms, ScalarField, Step};
use crate::grid::{build_ball_rule, QuadConfig, QuadOrder, RadialGrid};

/// Which closed expression of `E_u(x, r)` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// `(1/n)(V + S' + S/r)`.
    Derivative,
    /// `½G − (n−2)/(4n) V + (n−2)/(4r) S`; needs no `r`-derivative. Canonical.
    Closed,
    /// `(G + (n−2)/n V)/(2(n−1)) + (n−2)/(4(n−1)) S'`.
    Averaged,
    /// `V + S' + S/r`, the derivative form without the `1/n` prefactor.
    Unscaled,
    /// `(1/n)(V + Q' + Q/r)`: the derivative form with ball integrals of `u²`
    /// in place of sphere integrals. Diagnostic only.
    BallReading,
}

impl Formulation {
    pub const ALL: [Formulation; 5] = [
        Formulation::Derivative,
        Formulation::Closed,
        Formulation::Averaged,
        Formulation::Unscaled,
        Formulation::BallReading,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Formulation::Derivative => "derivative",
            Formulation::Closed => "closed",
            Formulation::Averaged => "averaged",
            Formulation::Unscaled => "unscaled",
            Formulation::BallReading => "ball_reading",
        }
    }

    /// Evaluates the formulation from precomputed components.
    pub fn evaluate(&self, n: usize, r: f64, c: &Components) -> f64 {
        let nf = n as f64;
        match self {
            Formulation::Derivative => (c.volume + c.sphere_derivative + c.sphere / r) / nf,
            Formulation::Closed => {
                0.5 * c.dirichlet - (nf - 2.0) / (4.0 * nf) * c.volume + (nf - 2.0) / (4.0 * r) * c.sphere
            }
            Formulation::Averaged => {
                (c.dirichlet + (nf - 2.0) / nf * c.volume) / (2.0 * (nf - 1.0))
                    + (nf - 2.0) / (4.0 * (nf - 1.0)) * c.sphere_derivative
            }
            Formulation::Unscaled => c.volume + c.sphere_derivative + c.sphere / r,
            // d/dr ∫_B u² = ∫_∂B u² = S
            Formulation::BallReading => (c.volume + c.sphere + c.ball_square / r) / nf,
        }
    }
}

/// The integrals every formulation is built from, at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    /// `∫_B |u|^{2n/(n−2)}`.
    pub volume: f64,
    /// `∫_B |∇u|²`.
    pub dirichlet: f64,
    /// `∫_B u²`.
    pub ball_square: f64,
    /// `∫_∂B u²`.
    pub sphere: f64,
    /// `d/dr ∫_∂B u²` by centered difference.
    pub sphere_derivative: f64,
}

/// Resolution of every integral and derivative in this module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonotonicityConfig {
    pub quad: QuadConfig,
    /// Relative step `ρ` of the centered difference in `r` (step `ρ r`).
    pub derivative_step: f64,
    pub step: Step,
}

impl Default for MonotonicityConfig {
    fn default() -> Self {
        MonotonicityConfig {
            quad: QuadConfig::default(),
            derivative_step: 1e-3,
            step: Step::default(),
        }
    }
}

fn sphere_square<F: ScalarField + ?Sized>(u: &F, x: &[f64], r: f64, cfg: &MonotonicityConfig) -> Result<f64> {
    cfg.quad.integrate_sphere(u.dimension(), x, r, |y| {
        let v = u.value(y);
        v * v
    })
}

pub fn components<F: ScalarField + ?Sized>(u: &F, x: &[f64], r: f64, cfg: &MonotonicityConfig) -> Result<Components> {
    ensure_positive("radius", r)?;
    let n = u.dimension();
    if x.len() != n {
        return Err(Error::InvalidInput(format!("center must have {n} coordinates")));
    }
    let hints = u.concentrations();
    let [volume, dirichlet, ball_square] = cfg.quad.integrate_ball_many(n, x, r, &hints, |y| {
        let [g2, pot] = energy_terms(u, y, cfg.step);
        let v = u.value(y);
        [pot, g2, v * v]
    })?;
    let sphere = sphere_square(u, x, r, cfg)?;
    let h = cfg.derivative_step * r;
    let sphere_derivative = (sphere_square(u, x, r + h, cfg)? - sphere_square(u, x, r - h, cfg)?) / (2.0 * h);
    Ok(Components {
        volume,
        dirichlet,
        ball_square,
        sphere,
        sphere_derivative,
    })
}

/// `E_u(x, r)` in the requested formulation.
pub fn energy_e<F: ScalarField + ?Sized>(
    u: &F,
    x: &[f64],
    r: f64,
    formulation: Formulation,
    cfg: &MonotonicityConfig,
) -> Result<f64> {
    let c = components(u, x, r, cfg)?;
    Ok(formulation.evaluate(u.dimension(), r, &c))
}

/// Closed-formulation `E_u(x, r)` without the derivative and `∫_B u²` terms.
pub fn closed_energy<F: ScalarField + ?Sized>(u: &F, x: &[f64], r: f64, cfg: &MonotonicityConfig) -> Result<f64> {
    ensure_positive("radius", r)?;
    let n = u.dimension();
    let hints = u.concentrations();
    let [volume, dirichlet] = cfg.quad.integrate_ball_many(n, x, r, &hints, |y| {
        let [g2, pot] = energy_terms(u, y, cfg.step);
        [pot, g2]
    })?;
    let sphere = sphere_square(u, x, r, cfg)?;
    let c = Components {
        volume,
        dirichlet,
        ball_square: 0.0,
        sphere,
        sphere_derivative: 0.0,
    };
    Ok(Formulation::Closed.evaluate(n, r, &c))
}

/// Sampled `r ↦ E_u(x, r)` with its component breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityProfile {
    pub dimension: usize,
    pub center: Vec<f64>,
    pub radii: RadialGrid,
    /// Closed-formulation values.
    pub values: Vec<f64>,
    pub components: Vec<Components>,
}

pub fn profile<F: ScalarField + ?Sized>(
    u: &F,
    x: &[f64],
    radii: &RadialGrid,
    cfg: &MonotonicityConfig,
) -> Result<MonotonicityProfile> {
    let comps: Vec<Result<Components>> = radii.radii().par_iter().map(|&r| components(u, x, r, cfg)).collect();
    let comps = comps.into_iter().collect::<Result<Vec<_>>>()?;
    let n = u.dimension();
    let values = radii
        .radii()
        .iter()
        .zip(&comps)
        .map(|(&r, c)| Formulation::Closed.evaluate(n, r, c))
        .collect();
    Ok(MonotonicityProfile {
        dimension: n,
        center: x.to_vec(),
        radii: radii.clone(),
        values,
        components: comps,
    })
}

impl MonotonicityProfile {
    pub fn values_for(&self, formulation: Formulation) -> Vec<f64> {
        self.radii
            .radii()
            .iter()
            .zip(&self.components)
            .map(|(&r, c)| formulation.evaluate(self.dimension, r, c))
            .collect()
    }

    /// `1e-6 · max |E|`.
    pub fn default_slack(&self) -> f64 {
        1e-6 * self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// CSV with columns `r, E, term_volume, term_boundary_derivative, term_boundary_over_r`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "r",
            "E",
            "term_volume",
            "term_boundary_derivative",
            "term_boundary_over_r",
        ])?;
        for ((r, e), c) in self.radii.radii().iter().zip(&self.values).zip(&self.components) {
            w.write_record([
                format!("{r:?}"),
                format!("{e:?}"),
                format!("{:?}", c.volume),
                format!("{:?}", c.sphere_derivative),
                format!("{:?}", (c.sphere / r)),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<profile csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// A consecutive pair of radii where `E` drops by more than the slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub r_from: f64,
    pub r_to: f64,
    pub drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub slack: f64,
    pub violations: Vec<Violation>,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Flags `E(r_{i+1}) < E(r_i) − slack`; `None` uses [`MonotonicityProfile::default_slack`].
pub fn check_monotone(profile: &MonotonicityProfile, slack: Option<f64>) -> MonotoneReport {
    let slack = slack.unwrap_or_else(|| profile.default_slack());
    let r = profile.radii.radii();
    let violations = profile
        .values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] < w[0] - slack)
        .map(|(i, w)| Violation {
            r_from: r[i],
            r_to: r[i + 1],
            drop: w[0] - w[1],
        })
        .collect();
    MonotoneReport { slack, violations }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub slack: f64,
    /// `(r, E(r))` wherever `E(r) < −slack`.
    pub violations: Vec<(f64, f64)>,
}

impl PositivityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_positive(profile: &MonotonicityProfile, slack: Option<f64>) -> PositivityReport {
    let slack = slack.unwrap_or_else(|| profile.default_slack());
    let violations = profile
        .radii
        .radii()
        .iter()
        .zip(&profile.values)
        .filter(|(_, e)| **e < -slack)
        .map(|(r, e)| (*r, *e))
        .collect();
    PositivityReport { slack, violations }
}

/// `(R, (1/R)∫₀^R E, E(R))` at every sampled radius, with `E(0) = 0` and
/// trapezoidal integration.
pub fn integral_means(profile: &MonotonicityProfile) -> Vec<(f64, f64, f64)> {
    let mut area = 0.0;
    let (mut r_prev, mut e_prev) = (0.0, 0.0);
    let mut out = Vec::with_capacity(profile.values.len());
    for (&r, &e) in profile.radii.radii().iter().zip(&profile.values) {
        area += 0.5 * (e + e_prev) * (r - r_prev);
        out.push((r, area / r, e));
        r_prev = r;
        e_prev = e;
    }
    out
}

/// Pairwise comparison of two formulations along one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub left: Formulation,
    pub right: Formulation,
    /// `max |E_left − E_right| / (1 + |E_closed|)`.
    pub max_deviation: f64,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub tolerance: f64,
    pub values: Vec<(Formulation, Vec<f64>)>,
    pub pairs: Vec<PairAgreement>,
}

/// Compares every pair of formulations, normalized by `1 + |E_closed|`.
pub fn formulation_agreement(profile: &MonotonicityProfile, tolerance: f64) -> AgreementReport {
    let values: Vec<(Formulation, Vec<f64>)> = Formulation::ALL.iter().map(|f| (*f, profile.values_for(*f))).collect();
    let mut pairs = Vec::new();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let max_deviation = values[i]
                .1
                .iter()
                .zip(&values[j].1)
                .zip(&profile.values)
                .map(|((a, b), e)| (a - b).abs() / (1.0 + e.abs()))
                .fold(0.0, f64::max);
            pairs.push(PairAgreement {
                left: values[i].0,
                right: values[j].0,
                max_deviation,
                agree: max_deviation <= tolerance,
            });
        }
    }
    AgreementReport {
        tolerance,
        values,
        pairs,
    }
}

fn ball_energy<F: ScalarField + ?Sized>(u: &F, x: &[f64], r: f64, cfg: &MonotonicityConfig) -> Result<f64> {
    let hints = u.concentrations();
    cfg.quad.integrate_ball(u.dimension(), x, r, &hints, |y| {
        let [g2, pot] = energy_terms(u, y, cfg.step);
        g2 + pot
    })
}

/// `∫_{B(x,r)} (|∇u|² + |u|^{2*}) / E_u(x, r)` for `0 < r < r₀/2`, with
/// `0/0 = 0`.
pub fn energy_bound_check<F: ScalarField + ?Sized>(
    u: &F,
    x: &[f64],
    r: f64,
    r0: f64,
    cfg: &MonotonicityConfig,
) -> Result<f64> {
    ensure_positive("radius", r)?;
    if !(r < 0.5 * r0) {
        return Err(Error::InvalidInput(format!(
            "energy bound needs r < r0/2, got r = {r}, r0 = {r0}"
        )));
    }
    let energy = ball_energy(u, x, r, cfg)?;
    let e = energy_e(u, x, r, Formulation::Closed, cfg)?;
    if energy == 0.0 && e == 0.0 {
        return Ok(0.0);
    }
    if e <= 0.0 {
        return Err(Error::Degenerate { radius: r, value: e });
    }
    Ok(energy / e)
}

/// Outcome of testing small local energy against a pointwise bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub center: Vec<f64>,
    pub r0: f64,
    pub r: f64,
    /// `∫_{B(x₀, r₀)} |∇u|² + |u|^{2*}`.
    pub energy: f64,
    pub epsilon: f64,
    /// Whether `energy ≤ ε`; no bound is measured otherwise.
    pub applicable: bool,
    /// `sup |u|` over samples of `B(x₀, r/2)`.
    pub sup_abs: Option<f64>,
    /// `sup |u| · r^{(n−2)/2}`.
    pub c_meas: Option<f64>,
}

pub fn eps_regularity_check<F: ScalarField + ?Sized>(
    u: &F,
    x0: &[f64],
    r0: f64,
    r: f64,
    epsilon: f64,
    cfg: &MonotonicityConfig,
) -> Result<RegularityReport> {
    ensure_positive("r", r)?;
    ensure_positive("epsilon", epsilon)?;
    if !(r < r0) {
        return Err(Error::InvalidInput(format!("need 0 < r < r0, got r = {r}, r0 = {r0}")));
    }
    let n = u.dimension();
    let energy = ball_energy(u, x0, r0, cfg)?;
    let applicable = energy <= epsilon;
    let (sup_abs, c_meas) = if applicable {
        let rule = build_ball_rule(n, x0, 0.5 * r, QuadOrder::new(24, 8))?;
        let mut sup = u.value(x0).abs();
        rule.for_each_node(|y, _| sup = sup.max(u.value(y).abs()));
        (Some(sup), Some(sup * r.powf((n as f64 - 2.0) / 2.0)))
    } else {
        (None, None)
    };
    Ok(RegularityReport {
        center: x0.to_vec(),
        r0,
        r,
        energy,
        epsilon,
        applicable,
        sup_abs,
        c_meas,
    })
}

/// Whether `C_meas` grows with the ball energy across applicable reports,
/// i.e. the measured constant shrinks as the energy threshold shrinks.
pub fn regularity_trend(reports: &[RegularityReport]) -> bool {
    let mut pts: Vec<(f64, f64)> = reports.iter().filter_map(|r| r.c_meas.map(|c| (r.energy, c))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).all(|w| w[1].1 >= w[0].1)
}
