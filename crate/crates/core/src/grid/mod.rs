//! Quadrature over balls, spheres and annuli in ℝⁿ.
//!
//! Every rule is a tensor product of a radial rule (Gauss–Legendre, carrying
//! the `rⁿ⁻¹` Jacobian in its weights) and an angular rule on `Sⁿ⁻¹` built
//! from hyperspherical coordinates: one Gauss–Gegenbauer factor per polar
//! angle and an equispaced trapezoid rule in the azimuth. Graded rules split
//! the radial direction into geometric panels so that fields concentrated at
//! a tiny scale around the rule center are resolved at every radius.
//!
//! Integration is a pure fold. Radial shells are evaluated in parallel, each
//! shell is reduced with pairwise summation and the shell partials are then
//! reduced in a fixed order, so results do not depend on the thread count.

mod aware;
pub mod gauss;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

type Cache<K, V> = OnceLock<Mutex<HashMap<K, Arc<V>>>>;

pub use aware::{Concentration, QuadConfig};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 12;

pub fn validate_dimension(n: usize) -> Result<()> {
    if (3..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidDimension { got: n, max: MAX_DIM })
    }
}

/// Volume ωₙ of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

pub fn ball_volume(n: usize, r: f64) -> f64 {
    unit_ball_volume(n) * r.powi(n as i32)
}

/// Surface measure `n ωₙ rⁿ⁻¹` of the sphere of radius `r`.
pub fn sphere_area(n: usize, r: f64) -> f64 {
    n as f64 * unit_ball_volume(n) * r.powi(n as i32 - 1)
}

/// Pairwise (cascade) summation with a fixed reduction tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        acc
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Radial and angular resolution of a product rule.
///
/// `angular` is the number of nodes per polar angle; the azimuth gets twice
/// as many. `None` picks a dimension-dependent default that keeps the
/// angular node count manageable in higher dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadOrder {
    pub radial: usize,
    pub angular: Option<usize>,
}

impl QuadOrder {
    pub const fn new(radial: usize, angular: usize) -> Self {
        QuadOrder {
            radial,
            angular: Some(angular),
        }
    }

    pub fn angular_for(&self, n: usize) -> usize {
        self.angular.unwrap_or_else(|| default_angular(n))
    }
}

impl Default for QuadOrder {
    fn default() -> Self {
        QuadOrder {
            radial: 64,
            angular: None,
        }
    }
}

impl From<usize> for QuadOrder {
    fn from(radial: usize) -> Self {
        QuadOrder { radial, angular: None }
    }
}

pub fn default_angular(n: usize) -> usize {
    match n {
        0..=3 => 24,
        4 => 12,
        5 => 8,
        6 => 6,
        _ => 4,
    }
}

/// Product rule on the unit sphere `Sⁿ⁻¹`; weights sum to `n ωₙ`.
#[derive(Debug, Clone)]
pub struct AngularRule {
    dim: usize,
    directions: Vec<f64>,
    weights: Vec<f64>,
}

impl AngularRule {
    fn build(n: usize, m: usize) -> Self {
        let m = m.max(1);
        let azimuth = 2 * m;
        // polar angle j (1-based) carries the weight sin^(n-1-j)
        let polar: Vec<(Vec<f64>, Vec<f64>)> = (1..=n - 2).map(|j| gauss::gauss_gegenbauer(m, n - 1 - j)).collect();
        let count = m.pow(n as u32 - 2) * azimuth;
        let mut directions = Vec::with_capacity(count * n);
        let mut weights = Vec::with_capacity(count);
        let mut idx = vec![0usize; n - 2];
        let dtheta = 2.0 * PI / azimuth as f64;
        loop {
            for a in 0..azimuth {
                let theta = (a as f64 + 0.5) * dtheta;
                let mut sin_prod = 1.0;
                let mut w = dtheta;
                for (j, &i) in idx.iter().enumerate() {
                    let t = polar[j].0[i];
                    directions.push(sin_prod * t);
                    sin_prod *= (1.0 - t * t).max(0.0).sqrt();
                    w *= polar[j].1[i];
                }
                directions.push(sin_prod * theta.cos());
                directions.push(sin_prod * theta.sin());
                weights.push(w);
            }
            // odometer over the polar indices
            let mut pos = n - 2;
            loop {
                if pos == 0 {
                    return AngularRule {
                        dim: n,
                        directions,
                        weights,
                    };
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < m {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    /// Cached angular rule for dimension `n` and `m` nodes per polar angle.
    pub fn get(n: usize, m: usize) -> Arc<AngularRule> {
        static CACHE: Cache<(usize, usize), AngularRule> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("angular rule cache poisoned");
        guard
            .entry((n, m))
            .or_insert_with(|| Arc::new(AngularRule::build(n, m)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.directions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn legendre_cached(count: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: Cache<usize, Vec<(f64, f64)>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("legendre cache poisoned");
    guard
        .entry(count)
        .or_insert_with(|| Arc::new(gauss::gauss_legendre(count, -1.0, 1.0)))
        .clone()
}

/// Gauss–Legendre nodes on `[lo, hi]` with the `rⁿ⁻¹` Jacobian folded in.
fn radial_panel(n: usize, count: usize, lo: f64, hi: f64, out: &mut Vec<(f64, f64)>) {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    for &(t, w) in legendre_cached(count).iter() {
        let r = mid + half * t;
        out.push((r, half * w * r.powi(n as i32 - 1)));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Ball,
    Sphere,
    Annulus,
}

/// An immutable product quadrature rule on a ball, sphere or annulus.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    dim: usize,
    kind: RegionKind,
    center: Vec<f64>,
    inner: f64,
    outer: f64,
    radial: Vec<(f64, f64)>,
    angular: Arc<AngularRule>,
}

impl QuadratureRule {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `(inner, outer)` radii; a ball has `inner = 0`, a sphere `inner = outer`.
    pub fn radii(&self) -> (f64, f64) {
        (self.inner, self.outer)
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.angular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exact measure of the region the rule approximates.
    pub fn exact_measure(&self) -> f64 {
        match self.kind {
            RegionKind::Sphere => sphere_area(self.dim, self.outer),
            _ => ball_volume(self.dim, self.outer) - ball_volume(self.dim, self.inner),
        }
    }

    pub fn weight_sum(&self) -> f64 {
        let ang = pairwise_sum(self.angular.weights());
        let rad: Vec<f64> = self.radial.iter().map(|&(_, w)| w).collect();
        ang * pairwise_sum(&rad)
    }

    /// Whether `point` lies in the closed region, with relative slack `1e-12`.
    pub fn contains(&self, point: &[f64]) -> bool {
        let d = distance(point, &self.center);
        let slack = 1e-12 * self.outer.max(1e-300);
        match self.kind {
            RegionKind::Sphere => (d - self.outer).abs() <= slack,
            _ => d <= self.outer + slack && d >= self.inner - slack,
        }
    }

    /// Visits every node with its weight, in a fixed order.
    pub fn for_each_node(&self, mut visit: impl FnMut(&[f64], f64)) {
        let n = self.dim;
        let mut x = [0.0; MAX_DIM];
        for &(r, wr) in &self.radial {
            for a in 0..self.angular.len() {
                let dir = self.angular.direction(a);
                for i in 0..n {
                    x[i] = self.center[i] + r * dir[i];
                }
                visit(&x[..n], wr * self.angular.weights[a]);
            }
        }
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each_node(|x, _| out.push(x.to_vec()));
        out
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each_node(|_, w| out.push(w));
        out
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_common(n: usize, center: &[f64]) -> Result<()> {
    validate_dimension(n)?;
    if center.len() != n {
        return Err(Error::InvalidInput(format!(
            "center has {} coordinates, expected {n}",
            center.len()
        )));
    }
    if center.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("center is not finite".into()));
    }
    Ok(())
}

fn check_order(order: QuadOrder) -> Result<()> {
    if order.radial == 0 || order.angular == Some(0) {
        return Err(Error::InvalidInput("quadrature order must be at least 1".into()));
    }
    Ok(())
}

/// Product Gauss rule on the ball `B(center, r)`.
pub fn build_ball_rule(n: usize, center: &[f64], r: f64, order: impl Into<QuadOrder>) -> Result<QuadratureRule> {
    build_annulus_rule(n, center, 0.0, r, order).map(|mut rule| {
        rule.kind = RegionKind::Ball;
        rule
    })
}

/// Product rule on the sphere `∂B(center, r)`.
pub fn build_sphere_rule(n: usize, center: &[f64], r: f64, order: impl Into<QuadOrder>) -> Result<QuadratureRule> {
    let order = order.into();
    check_common(n, center)?;
    check_order(order)?;
    ensure_positive("radius", r)?;
    Ok(QuadratureRule {
        dim: n,
        kind: RegionKind::Sphere,
        center: center.to_vec(),
        inner: r,
        outer: r,
        radial: vec![(r, r.powi(n as i32 - 1))],
        angular: AngularRule::get(n, order.angular_for(n)),
    })
}

/// Product Gauss rule on the annulus `inner ≤ |x - center| ≤ outer`.
pub fn build_annulus_rule(
    n: usize,
    center: &[f64],
    inner: f64,
    outer: f64,
    order: impl Into<QuadOrder>,
) -> Result<QuadratureRule> {
    let order = order.into();
    check_common(n, center)?;
    check_order(order)?;
    ensure_positive("outer radius", outer)?;
    if !(inner >= 0.0 && inner < outer) {
        return Err(Error::InvalidInput(format!(
            "annulus radii must satisfy 0 <= inner < outer, got ({inner}, {outer})"
        )));
    }
    let mut radial = Vec::with_capacity(order.radial);
    radial_panel(n, order.radial, inner, outer, &mut radial);
    Ok(QuadratureRule {
        dim: n,
        kind: if inner == 0.0 {
            RegionKind::Ball
        } else {
            RegionKind::Annulus
        },
        center: center.to_vec(),
        inner,
        outer,
        radial,
        angular: AngularRule::get(n, order.angular_for(n)),
    })
}

/// Geometric radial panelling used by graded rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grading {
    /// Radius of the innermost panel (a plain ball when building a ball rule).
    pub core_radius: f64,
    /// Ratio between consecutive panel boundaries.
    pub ratio: f64,
    /// Gauss–Legendre nodes per panel.
    pub panel_nodes: usize,
    /// Nodes per polar angle.
    pub angular: usize,
}

fn graded_breaks(start: f64, end: f64, ratio: f64) -> Vec<f64> {
    let mut breaks = vec![start];
    let mut b = start;
    while b * ratio < end {
        b *= ratio;
        breaks.push(b);
    }
    // avoid a sliver panel at the outer edge
    if breaks.len() > 1 && end / breaks[breaks.len() - 1] < ratio.sqrt() {
        breaks.pop();
    }
    breaks.push(end);
    breaks
}

/// Composite rule on `B(center, r)` with geometric panels growing from
/// `grading.core_radius`.
pub fn build_graded_ball_rule(n: usize, center: &[f64], r: f64, grading: Grading) -> Result<QuadratureRule> {
    check_common(n, center)?;
    ensure_positive("radius", r)?;
    check_grading(&grading)?;
    let core = grading.core_radius.min(r);
    let mut radial = Vec::new();
    radial_panel(n, grading.panel_nodes, 0.0, core, &mut radial);
    if core < r {
        let breaks = graded_breaks(core, r, grading.ratio);
        for w in breaks.windows(2) {
            radial_panel(n, grading.panel_nodes, w[0], w[1], &mut radial);
        }
    }
    Ok(QuadratureRule {
        dim: n,
        kind: RegionKind::Ball,
        center: center.to_vec(),
        inner: 0.0,
        outer: r,
        radial,
        angular: AngularRule::get(n, grading.angular),
    })
}

/// Composite rule on an annulus with geometric panels starting at `inner`.
pub fn build_graded_annulus_rule(
    n: usize,
    center: &[f64],
    inner: f64,
    outer: f64,
    grading: Grading,
) -> Result<QuadratureRule> {
    if inner == 0.0 {
        return build_graded_ball_rule(n, center, outer, grading);
    }
    check_common(n, center)?;
    ensure_positive("inner radius", inner)?;
    check_grading(&grading)?;
    if inner >= outer {
        return Err(Error::InvalidInput(format!(
            "annulus radii must satisfy inner < outer, got ({inner}, {outer})"
        )));
    }
    let mut radial = Vec::new();
    for w in graded_breaks(inner, outer, grading.ratio).windows(2) {
        radial_panel(n, grading.panel_nodes, w[0], w[1], &mut radial);
    }
    Ok(QuadratureRule {
        dim: n,
        kind: RegionKind::Annulus,
        center: center.to_vec(),
        inner,
        outer,
        radial,
        angular: AngularRule::get(n, grading.angular),
    })
}

fn check_grading(g: &Grading) -> Result<()> {
    ensure_positive("core radius", g.core_radius)?;
    if !(g.ratio > 1.0) || g.panel_nodes == 0 || g.angular == 0 {
        return Err(Error::InvalidInput(format!("invalid grading {g:?}")));
    }
    Ok(())
}

/// `Σᵢ wᵢ f(xᵢ)` over the rule.
///
/// Fails with the offending node when `f` is not finite somewhere.
pub fn integrate<F>(rule: &QuadratureRule, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    integrate_many(rule, |x| [f(x)]).map(|[v]| v)
}

/// Integrates `K` quantities in one sweep over the nodes.
pub fn integrate_many<const K: usize, F>(rule: &QuadratureRule, f: F) -> Result<[f64; K]>
where
    F: Fn(&[f64]) -> [f64; K] + Sync,
{
    let n = rule.dim;
    let angular = &rule.angular;
    let shells: Vec<Result<[f64; K]>> = rule
        .radial
        .par_iter()
        .map(|&(r, wr)| {
            let mut x = [0.0; MAX_DIM];
            let mut terms: [Vec<f64>; K] = std::array::from_fn(|_| Vec::with_capacity(angular.len()));
            for a in 0..angular.len() {
                let dir = angular.direction(a);
                for i in 0..n {
                    x[i] = rule.center[i] + r * dir[i];
                }
                let v = f(&x[..n]);
                for (k, vk) in v.iter().enumerate() {
                    if !vk.is_finite() {
                        return Err(Error::NonFinite {
                            node: x[..n].to_vec(),
                            value: *vk,
                        });
                    }
                    terms[k].push(angular.weights[a] * vk);
                }
            }
            Ok(std::array::from_fn(|k| wr * pairwise_sum(&terms[k])))
        })
        .collect();
    let mut partials: [Vec<f64>; K] = std::array::from_fn(|_| Vec::with_capacity(shells.len()));
    for s in shells {
        let s = s?;
        for k in 0..K {
            partials[k].push(s[k]);
        }
    }
    Ok(std::array::from_fn(|k| pairwise_sum(&partials[k])))
}

/// Strictly increasing positive radii, e.g. the sampling of `r ↦ E(x, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    radii: Vec<f64>,
    level: u32,
}

impl RadialGrid {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidInput("radial grid is empty".into()));
        }
        ensure_positive("first radius", radii[0])?;
        if radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput(
                "radii must be finite and strictly increasing".into(),
            ));
        }
        Ok(RadialGrid { radii, level: 0 })
    }

    /// `count` logarithmically spaced radii from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Self> {
        ensure_positive("lower radius", lo)?;
        if count < 2 || !(hi > lo) {
            return Err(Error::InvalidInput(format!(
                "log grid needs count >= 2 and hi > lo, got {count}, [{lo}, {hi}]"
            )));
        }
        let step = (hi / lo).ln() / (count - 1) as f64;
        let mut radii: Vec<f64> = (0..count).map(|i| lo * (step * i as f64).exp()).collect();
        radii[count - 1] = hi;
        RadialGrid::new(radii)
    }

    /// Inserts the geometric midpoint of every interval.
    pub fn refined(&self) -> Self {
        let mut radii = Vec::with_capacity(2 * self.radii.len() - 1);
        for w in self.radii.windows(2) {
            radii.push(w[0]);
            radii.push((w[0] * w[1]).sqrt());
        }
        radii.push(*self.radii.last().expect("grid is nonempty"));
        RadialGrid {
            radii,
            level: self.level + 1,
        }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}
