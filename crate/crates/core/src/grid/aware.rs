//! Integration that adapts to fields concentrating at tiny scales.
//!
//! A field may advertise concentration points `(center, scale)`. A ball or
//! annulus integral then splits the integrand with a smooth partition of
//! unity, one piece per concentration center, and integrates each piece with
//! a graded rule centered where that piece peaks. Without relevant hints the
//! plain product Gauss rule is used.

use serde::{Deserialize, Serialize};

use super::{
    build_annulus_rule, build_graded_annulus_rule, build_graded_ball_rule, distance, integrate_many, Grading, QuadOrder,
};
use crate::error::{ensure_positive, Result};

/// A point where a field concentrates at length scale `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub center: Vec<f64>,
    pub scale: f64,
}

/// Quadrature resolution shared by every integral of a computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    /// Plain product rule used when no concentration is relevant.
    pub order: QuadOrder,
    /// Nodes per polar angle on spheres; `None` follows `order`.
    pub sphere_angular: Option<usize>,
    /// Ratio of consecutive panel radii in graded rules.
    pub panel_ratio: f64,
    /// Gauss–Legendre nodes per graded panel.
    pub panel_nodes: usize,
    /// Nodes per polar angle in graded rules.
    pub graded_angular: usize,
    /// Innermost graded panel radius as a fraction of the concentration scale.
    pub core_fraction: f64,
    /// Off-center concentrations count only below this fraction of the radius.
    pub concentration_ratio: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            order: QuadOrder::default(),
            sphere_angular: None,
            panel_ratio: 2.0,
            panel_nodes: 8,
            graded_angular: 6,
            core_fraction: 0.05,
            concentration_ratio: 0.02,
        }
    }
}

struct Group {
    center: Vec<f64>,
    scales: Vec<f64>,
}

impl Group {
    fn min_scale(&self) -> f64 {
        self.scales.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn log_weight(&self, y: &[f64], n: usize) -> f64 {
        let d2: f64 = y.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        log_sum_exp(self.scales.iter().map(|&s| n as f64 * (s.ln() - (s * s + d2).ln())))
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl QuadConfig {
    pub fn sphere_order(&self) -> QuadOrder {
        QuadOrder {
            radial: 1,
            angular: self.sphere_angular.or(self.order.angular),
        }
    }

    fn grading(&self, scale: f64) -> Grading {
        Grading {
            core_radius: self.core_fraction * scale,
            ratio: self.panel_ratio,
            panel_nodes: self.panel_nodes,
            angular: self.graded_angular,
        }
    }

    fn relevant_groups(&self, center: &[f64], outer: f64, hints: &[Concentration]) -> Vec<Group> {
        let mut groups: Vec<Group> = Vec::new();
        for h in hints {
            if h.center.len() != center.len() || !(h.scale > 0.0) {
                continue;
            }
            match groups
                .iter_mut()
                .find(|g| distance(&g.center, &h.center) <= 1e-12 * (1.0 + h.scale))
            {
                Some(g) => g.scales.push(h.scale),
                None => groups.push(Group {
                    center: h.center.clone(),
                    scales: vec![h.scale],
                }),
            }
        }
        groups.retain(|g| {
            let d = distance(&g.center, center);
            let s = g.min_scale();
            if d <= 1e-12 * outer {
                s < outer
            } else {
                d < 2.0 * outer && s < self.concentration_ratio * outer
            }
        });
        groups
    }

    /// `∫_{B(center, r)} f`.
    pub fn integrate_ball<F>(&self, n: usize, center: &[f64], r: f64, hints: &[Concentration], f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.integrate_annulus_many(n, center, 0.0, r, hints, |x| [f(x)])
            .map(|[v]| v)
    }

    /// `∫ f` over `inner ≤ |x - center| ≤ outer`; `inner = 0` is a ball.
    pub fn integrate_annulus<F>(
        &self,
        n: usize,
        center: &[f64],
        inner: f64,
        outer: f64,
        hints: &[Concentration],
        f: F,
    ) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.integrate_annulus_many(n, center, inner, outer, hints, |x| [f(x)])
            .map(|[v]| v)
    }

    /// Ball integral of `K` quantities in one sweep.
    pub fn integrate_ball_many<const K: usize, F>(
        &self,
        n: usize,
        center: &[f64],
        r: f64,
        hints: &[Concentration],
        f: F,
    ) -> Result<[f64; K]>
    where
        F: Fn(&[f64]) -> [f64; K] + Sync,
    {
        self.integrate_annulus_many(n, center, 0.0, r, hints, f)
    }

    /// Annulus integral of `K` quantities in one sweep.
    pub fn integrate_annulus_many<const K: usize, F>(
        &self,
        n: usize,
        center: &[f64],
        inner: f64,
        outer: f64,
        hints: &[Concentration],
        f: F,
    ) -> Result<[f64; K]>
    where
        F: Fn(&[f64]) -> [f64; K] + Sync,
    {
        ensure_positive("outer radius", outer)?;
        let groups = self.relevant_groups(center, outer, hints);
        if groups.is_empty() {
            return integrate_many(&build_annulus_rule(n, center, inner, outer, self.order)?, f);
        }
        if groups.len() == 1 && distance(&groups[0].center, center) <= 1e-12 * outer {
            let rule = build_graded_annulus_rule(n, center, inner, outer, self.grading(groups[0].min_scale()))?;
            return integrate_many(&rule, f);
        }
        let mut total = [0.0; K];
        for (gi, g) in groups.iter().enumerate() {
            let reach = distance(&g.center, center) + outer;
            let rule = build_graded_ball_rule(n, &g.center, reach, self.grading(g.min_scale()))?;
            let piece = integrate_many(&rule, |y| {
                let d = distance(y, center);
                if d > outer || d < inner {
                    return [0.0; K];
                }
                let logs = groups.iter().map(|h| h.log_weight(y, n));
                let own = groups[gi].log_weight(y, n);
                let share = (own - log_sum_exp(logs)).exp();
                if share == 0.0 {
                    return [0.0; K];
                }
                let mut v = f(y);
                v.iter_mut().for_each(|x| *x *= share);
                v
            })?;
            for k in 0..K {
                total[k] += piece[k];
            }
        }
        Ok(total)
    }

    /// `∫_{∂B(center, r)} f`.
    pub fn integrate_sphere<F>(&self, n: usize, center: &[f64], r: f64, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.integrate_sphere_many(n, center, r, |x| [f(x)]).map(|[v]| v)
    }

    /// Sphere integral of `K` quantities in one sweep.
    pub fn integrate_sphere_many<const K: usize, F>(&self, n: usize, center: &[f64], r: f64, f: F) -> Result<[f64; K]>
    where
        F: Fn(&[f64]) -> [f64; K] + Sync,
    {
        integrate_many(&super::build_sphere_rule(n, center, r, self.sphere_order())?, f)
    }
}
