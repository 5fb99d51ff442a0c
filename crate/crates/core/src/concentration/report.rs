use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    ball_energy, detect_sigma, fit_bubble, standard_radial_energy, standard_threshold_radius, theta_estimate,
    BubbleConstant, BudgetSample, ConcentrationSequence, Density, DetectConfig, EnergyConfig, FitConfig, Region,
    ThetaEstimate, THETA_STABILITY,
};
use crate::error::{ensure_positive, Error, Result};
use crate::fields::{Bubble, FieldKind, FieldRef, ScalarField};
use crate::grid::{distance, Concentration, QuadConfig, MAX_DIM};

pub const SCHEMA: &str = "bubble-lab/1";

/// Settings of the full quantization pipeline. Thresholds left as `None`
/// default to `Λ₀/10`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantizeConfig {
    pub eps0: Option<f64>,
    pub eps_n: Option<f64>,
    pub r_grid: Vec<f64>,
    pub k_max: u32,
    /// Index at which energies are read; defaults to `k_max`.
    pub k_large: Option<u32>,
    pub r_small: f64,
    pub lattice_half_width: f64,
    pub lattice_spacing: f64,
    /// `R` values for neck energies outside `R` times the coarsest fitted scale.
    pub neck_factors: Vec<f64>,
    pub max_bubbles: usize,
    pub check_budget: bool,
    pub fit: FitConfig,
    pub energy: EnergyConfig,
    pub detect_quad: QuadConfig,
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        QuantizeConfig {
            eps0: None,
            eps_n: None,
            r_grid: vec![0.05, 0.1, 0.2],
            k_max: 10,
            k_large: None,
            r_small: 0.25,
            lattice_half_width: 1.0,
            lattice_spacing: 0.5,
            neck_factors: vec![10.0, 30.0, 100.0],
            max_bubbles: 6,
            check_budget: true,
            fit: FitConfig::default(),
            energy: EnergyConfig {
                quad: QuadConfig {
                    graded_angular: 4,
                    ..QuadConfig::default()
                },
                ..EnergyConfig::default()
            },
            detect_quad: DetectConfig::coarse_quad(),
        }
    }
}

/// Thresholds and slacks actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eps0: f64,
    pub eps_n: f64,
    pub r_grid: Vec<f64>,
    pub r_small: f64,
    pub k0: u32,
    pub k_max: u32,
    pub k_large: u32,
    pub fit_tolerance: f64,
    pub theta_stability: f64,
    pub lambda0_error: f64,
}

/// One extracted bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub scale: f64,
    pub center: Vec<f64>,
    pub sign: f64,
    /// Full energy of the fitted bubble inside `B(x, r_small)`.
    pub energy: f64,
    pub half_threshold_radius: f64,
    pub fit_iterations: usize,
    pub fit_relative_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub center: Vec<f64>,
    pub cluster_members: Vec<Vec<f64>>,
    pub theta: ThetaEstimate,
    pub n_hat: usize,
    pub ratio: Option<f64>,
    pub distance_to_integer: Option<f64>,
    pub inventory: Vec<InventoryEntry>,
    pub inventory_sum: f64,
    /// Energy of the superposition minus the energies of its bubbles taken
    /// one at a time, all inside `B(x, r_small)`.
    pub cross_term: f64,
    /// `|Θ̂ − Σ inventory|` is expected below this.
    pub inventory_tolerance: f64,
    /// Energy left in `B(x, r_small)` after subtracting the inventory.
    pub residual_energy: f64,
    /// Aligned with [`DefectReport::neck_factors`]; `None` when `R δ ≥ r_small`.
    pub necks: Vec<Option<f64>>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub schema: String,
    pub dimension: usize,
    pub description: String,
    pub lambda0: f64,
    pub sigma_points: Vec<Vec<f64>>,
    pub theta: Vec<Option<f64>>,
    pub n_hat: Vec<usize>,
    pub ratios: Vec<Option<f64>>,
    pub neck_factors: Vec<f64>,
    pub necks: Vec<Vec<Option<f64>>>,
    pub tolerances: Tolerances,
    pub budget: Vec<BudgetSample>,
    pub points: Vec<PointReport>,
}

// u minus the bubbles extracted so far; keeps only the quadrature hints of u.
struct Remainder<'a> {
    base: &'a FieldRef,
    fitted: &'a [Bubble],
}

impl ScalarField for Remainder<'_> {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn kind(&self) -> FieldKind {
        FieldKind::Superposition
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x) - self.fitted.iter().map(|b| b.value(x)).sum::<f64>()
    }

    fn analytic_gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        if !self.base.analytic_gradient(x, out) {
            return false;
        }
        let n = x.len();
        let mut g = [0.0; MAX_DIM];
        for b in self.fitted {
            b.analytic_gradient(x, &mut g[..n]);
            (0..n).for_each(|i| out[i] -= g[i]);
        }
        true
    }

    fn concentrations(&self) -> Vec<Concentration> {
        self.base.concentrations()
    }
}

// Smallest ρ ≤ r_max with ball energy ≥ target, to 1e-4 relative.
fn threshold_radius<F: ScalarField + ?Sized>(
    u: &F,
    x: &[f64],
    r_max: f64,
    target: f64,
    cfg: &EnergyConfig,
) -> Result<Option<f64>> {
    let e = |r: f64| ball_energy(u, x, r, Density::Full, cfg);
    if e(r_max)? < target {
        return Ok(None);
    }
    let finest = u.concentrations().iter().map(|c| c.scale).fold(r_max, f64::min);
    let mut lo = 1e-6 * finest;
    let mut tries = 0;
    while e(lo)? >= target {
        lo *= 1e-6;
        tries += 1;
        if tries > 8 {
            return Ok(None);
        }
    }
    let mut hi = r_max;
    while hi / lo > 1.0 + 1e-4 {
        let mid = (lo * hi).sqrt();
        if e(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

struct Plan<'a> {
    seq: &'a ConcentrationSequence,
    cfg: &'a QuantizeConfig,
    lambda0: f64,
    eps0: f64,
    eps_n: f64,
    k_large: u32,
    rho_std: f64,
}

impl Plan<'_> {
    fn point(&self, x: &[f64], members: Vec<Vec<f64>>, unresolved: bool) -> Result<PointReport> {
        let n = self.seq.dimension();
        let cfg = self.cfg;
        let r_small = cfg.r_small;
        let u = self.seq.field(self.k_large)?;
        let mut flags = Vec::new();
        if unresolved {
            flags.push(format!("unresolved cluster of {} lattice points", members.len()));
        }

        let mut fitted: Vec<Bubble> = Vec::new();
        let mut inventory = Vec::new();
        let residual_energy = loop {
            let rest = Remainder {
                base: &u,
                fitted: &fitted,
            };
            let left = ball_energy(&rest, x, r_small, Density::Full, &cfg.energy)?;
            if left < self.eps0 {
                break left;
            }
            if fitted.len() == cfg.max_bubbles {
                flags.push(format!("stopped after {} bubbles", cfg.max_bubbles));
                break left;
            }
            let Some(rho) = threshold_radius(&rest, x, r_small, 0.5 * self.eps_n, &cfg.energy)? else {
                flags.push("no half-threshold radius below r_small".into());
                break left;
            };
            let fit = fit_bubble(&rest, x, rho / self.rho_std, &cfg.fit)?;
            if !fit.converged {
                flags.push(format!("bubble fit {} did not converge", fitted.len() + 1));
                break left;
            }
            let energy = standard_radial_energy(n, 0.0, r_small / fit.scale, Density::Full)?;
            fitted.push(Bubble::new(n, &fit.center, fit.scale, fit.sign)?);
            inventory.push(InventoryEntry {
                scale: fit.scale,
                center: fit.center,
                sign: fit.sign,
                energy,
                half_threshold_radius: rho,
                fit_iterations: fit.iterations,
                fit_relative_rms: fit.relative_rms,
            });
        };

        let theta = theta_estimate(self.seq, x, r_small, self.k_large, &cfg.energy)?;
        if theta.value.is_none() {
            flags.push(format!(
                "ball energy changes by {:.3} between r_small/2 and r_small",
                theta.relative_change
            ));
        }
        let mut separate = 0.0;
        for (y, delta) in self.seq.scales(self.k_large)? {
            if distance(&y, x) < r_small {
                let b = Bubble::new(n, &y, delta, 1.0)?;
                separate += ball_energy(&b, x, r_small, Density::Full, &cfg.energy)?;
            }
        }
        let signed_weights: Vec<f64> = self.seq.bubbles().iter().map(|b| b.weight).collect();
        let weighted = signed_weights.iter().all(|w| (w.abs() - 1.0).abs() < 1e-15);
        let cross_term = if weighted { theta.at_radius - separate } else { f64::NAN };
        let inventory_sum: f64 = inventory.iter().map(|e| e.energy).sum();
        let inventory_tolerance =
            cross_term.abs().max(0.0) + 0.01 * self.lambda0 * inventory.len().max(1) as f64 + residual_energy;
        let inventory_tolerance = if inventory_tolerance.is_finite() {
            inventory_tolerance
        } else {
            0.05 * self.lambda0 * inventory.len().max(1) as f64 + residual_energy
        };

        let coarsest = inventory.iter().map(|e| e.scale).fold(0.0, f64::max);
        let mut necks = Vec::with_capacity(cfg.neck_factors.len());
        for &r_factor in &cfg.neck_factors {
            let inner = r_factor * coarsest;
            necks.push(if coarsest > 0.0 && inner < r_small {
                let region = Region::Annulus {
                    center: x.to_vec(),
                    inner,
                    outer: r_small,
                };
                Some(super::energy_in(&*u, &region, Density::Full, &cfg.energy)?.value)
            } else {
                None
            });
        }

        let ratio = theta.value.map(|t| t / self.lambda0);
        Ok(PointReport {
            center: x.to_vec(),
            cluster_members: members,
            n_hat: inventory.len(),
            ratio,
            distance_to_integer: ratio.map(|r| (r - r.round()).abs()),
            theta,
            inventory,
            inventory_sum,
            cross_term: if cross_term.is_finite() { cross_term } else { 0.0 },
            inventory_tolerance,
            residual_energy,
            necks,
            flags,
        })
    }
}

/// Detects concentration points, extracts the bubbles at each and reports
/// `Θ̂`, `N̂`, the inventory, neck energies and `Θ̂/Λ₀`.
pub fn quantization_report(seq: &ConcentrationSequence, cfg: &QuantizeConfig) -> Result<DefectReport> {
    let n = seq.dimension();
    ensure_positive("r_small", cfg.r_small)?;
    let constant = BubbleConstant::compute(n)?;
    let lambda0 = constant.value;
    let eps0 = cfg.eps0.unwrap_or(lambda0 / 10.0);
    let eps_n = cfg.eps_n.unwrap_or(lambda0 / 10.0);
    ensure_positive("eps0", eps0)?;
    ensure_positive("eps_n", eps_n)?;
    let k_max = seq.max_index().map_or(cfg.k_max, |m| cfg.k_max.min(m));
    let detect_cfg = DetectConfig {
        eps0,
        r_grid: cfg.r_grid.clone(),
        k_max,
        lattice_half_width: cfg.lattice_half_width,
        lattice_spacing: cfg.lattice_spacing,
        quad: cfg.detect_quad,
        step: cfg.energy.step,
    };
    let k0 = detect_cfg.k0().min(k_max);
    let k_large = cfg.k_large.unwrap_or(k_max);
    if k_large == 0 || k_large > k_max {
        return Err(Error::InvalidInput(format!("k_large {k_large} outside 1..={k_max}")));
    }
    let budget = if cfg.check_budget && !seq.is_zero() {
        let ks: Vec<u32> = (k0..=k_max).collect();
        seq.check_budget(&ks, &cfg.energy)?
    } else {
        Vec::new()
    };
    let tolerances = Tolerances {
        eps0,
        eps_n,
        r_grid: cfg.r_grid.clone(),
        r_small: cfg.r_small,
        k0,
        k_max,
        k_large,
        fit_tolerance: cfg.fit.tolerance,
        theta_stability: THETA_STABILITY,
        lambda0_error: constant.error_bound,
    };
    let detection = detect_sigma(seq, &detect_cfg)?;
    let plan = Plan {
        seq,
        cfg,
        lambda0,
        eps0,
        eps_n,
        k_large,
        rho_std: standard_threshold_radius(n, 0.5 * eps_n, Density::Full)?,
    };
    let points: Vec<PointReport> = detection
        .clusters
        .par_iter()
        .map(|c| plan.point(&c.representative, c.members.clone(), c.unresolved))
        .collect::<Result<_>>()?;
    Ok(DefectReport {
        schema: SCHEMA.to_string(),
        dimension: n,
        description: seq.description().to_string(),
        lambda0,
        sigma_points: points.iter().map(|p| p.center.clone()).collect(),
        theta: points.iter().map(|p| p.theta.value).collect(),
        n_hat: points.iter().map(|p| p.n_hat).collect(),
        ratios: points.iter().map(|p| p.ratio).collect(),
        neck_factors: cfg.neck_factors.clone(),
        necks: points.iter().map(|p| p.necks.clone()).collect(),
        tolerances,
        budget,
        points,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

impl DefectReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per detected point.
    pub fn write_points_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["point".to_string()];
        header.extend((1..=self.dimension).map(|i| format!("x{i}")));
        header.extend(["theta", "n_hat", "ratio", "distance_to_integer", "flags"].map(String::from));
        w.write_record(&header)?;
        for (i, p) in self.points.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(p.center.iter().map(|c| format!("{c:?}")));
            row.extend([
                opt(p.theta.value),
                p.n_hat.to_string(),
                opt(p.ratio),
                opt(p.distance_to_integer),
                p.flags.join("; "),
            ]);
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<points csv>", e))?;
        Ok(())
    }

    /// One row per extracted bubble.
    pub fn write_inventory_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["point".to_string(), "bubble".to_string(), "scale".to_string()];
        header.extend((1..=self.dimension).map(|i| format!("y{i}")));
        header.extend(["sign", "energy"].map(String::from));
        w.write_record(&header)?;
        for (i, p) in self.points.iter().enumerate() {
            for (j, b) in p.inventory.iter().enumerate() {
                let mut row = vec![i.to_string(), j.to_string(), format!("{:?}", b.scale)];
                row.extend(b.center.iter().map(|c| format!("{c:?}")));
                row.extend([format!("{:?}", b.sign), format!("{:?}", b.energy)]);
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(|e| Error::io("<inventory csv>", e))?;
        Ok(())
    }

    /// One row per point and neck factor.
    pub fn write_necks_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["point", "k", "r_factor", "energy"])?;
        for (i, p) in self.points.iter().enumerate() {
            for (r, e) in self.neck_factors.iter().zip(&p.necks) {
                w.write_record([
                    i.to_string(),
                    self.tolerances.k_large.to_string(),
                    format!("{r:?}"),
                    opt(*e),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<necks csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentration::{make_sequence, BubbleSpec};

    #[test]
    fn zero_sequence_gives_empty_report() {
        let seq = make_sequence(3, vec![], None, "zero").unwrap();
        let rep = quantization_report(&seq, &QuantizeConfig::default()).unwrap();
        assert!(rep.sigma_points.is_empty() && rep.points.is_empty());
        assert_eq!(rep.schema, SCHEMA);
        let back = DefectReport::from_json(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn single_bubble_is_quantized() {
        let seq = make_sequence(3, vec![BubbleSpec::geometric(&[0.0; 3], 4.0)], None, "one").unwrap();
        let rep = quantization_report(&seq, &QuantizeConfig::default()).unwrap();
        assert_eq!(rep.n_hat, vec![1]);
        let p = &rep.points[0];
        assert!((rep.ratios[0].unwrap() - 1.0).abs() < 0.05, "{p:?}");
        assert!((p.inventory_sum - p.theta.at_radius).abs() <= p.inventory_tolerance);
        assert!(p.flags.is_empty(), "{:?}", p.flags);
    }
}
