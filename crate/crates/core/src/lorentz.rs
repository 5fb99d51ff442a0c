//! Nonincreasing rearrangements and Lorentz `L^{p,q}` norms of sampled
//! functions.
//!
//! A sampled function is a list of values with cell measures, i.e. a step
//! function. Its rearrangement is again a step function and every norm is
//! evaluated in closed form on it, so equimeasurability and the power rule
//! hold exactly; the only error is in the sampling itself.
//!
//! Normalization: `‖f‖_{p,q} = (∫₀^∞ (t^{1/p} f*(t))^q dt/t)^{1/q}` and
//! `‖f‖_{p,∞} = sup_t t^{1/p} f*(t)`. With it `‖f‖_{2,1} = ∫₀^∞ t^{−1/2} f*(t) dt`
//! and `‖fg‖₁ ≤ ‖f‖_{2,1} ‖g‖_{2,∞}` holds with constant 1.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::fields::{gradient_into, ScalarField, Step};
use crate::grid::{build_graded_annulus_rule, unit_ball_volume, Grading, QuadratureRule, MAX_DIM};

/// Values on cells of known measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    values: Vec<f64>,
    measures: Vec<f64>,
    domain_measure: f64,
}

impl SampledFunction {
    /// The domain is taken to be the union of the cells.
    pub fn new(values: Vec<f64>, measures: Vec<f64>) -> Result<Self> {
        let total = measures.iter().sum();
        SampledFunction::on_domain(values, measures, total)
    }

    /// Checks that the cells tile a domain of the given measure (to 1e-8).
    pub fn on_domain(values: Vec<f64>, measures: Vec<f64>, domain_measure: f64) -> Result<Self> {
        if values.len() != measures.len() {
            return Err(Error::MismatchedDomains {
                left: values.len(),
                right: measures.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample values must be finite".into()));
        }
        if measures.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidInput("cell measures must be positive and finite".into()));
        }
        let total: f64 = measures.iter().sum();
        if (total - domain_measure).abs() > 1e-8 * domain_measure.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidInput(format!(
                "cells cover {total}, domain measure is {domain_measure}"
            )));
        }
        Ok(SampledFunction {
            values,
            measures,
            domain_measure,
        })
    }

    /// Samples `f` at the nodes of a quadrature rule, using the weights as
    /// cell measures.
    pub fn from_rule(rule: &QuadratureRule, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rule.len());
        let mut measures = Vec::with_capacity(rule.len());
        rule.for_each_node(|x, w| {
            values.push(f(x));
            measures.push(w);
        });
        SampledFunction::new(values, measures)
    }

    /// `|x|^{−exponent}` on `ρ < |x| < R` in ℝⁿ, one cell per spherical
    /// shell with log-spaced radii, sampled at the geometric midpoint.
    pub fn radial_power(n: usize, exponent: f64, rho: f64, big_r: f64, cells: usize) -> Result<Self> {
        ensure_positive("inner radius", rho)?;
        if !(big_r > rho) || cells == 0 {
            return Err(Error::InvalidInput("need R > rho and at least one cell".into()));
        }
        let w = unit_ball_volume(n);
        let step = (big_r / rho).ln() / cells as f64;
        let mut values = Vec::with_capacity(cells);
        let mut measures = Vec::with_capacity(cells);
        for i in 0..cells {
            let lo = rho * (step * i as f64).exp();
            let hi = if i + 1 == cells {
                big_r
            } else {
                rho * (step * (i + 1) as f64).exp()
            };
            values.push((lo * hi).sqrt().powf(-exponent));
            measures.push(w * (hi.powi(n as i32) - lo.powi(n as i32)));
        }
        let domain = w * (big_r.powi(n as i32) - rho.powi(n as i32));
        SampledFunction::on_domain(values, measures, domain)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn domain_measure(&self) -> f64 {
        self.domain_measure
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same cells, new values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        SampledFunction::on_domain(
            self.values.iter().map(|v| f(*v)).collect(),
            self.measures.clone(),
            self.domain_measure,
        )
    }

    /// `meas{|f| > λ}`.
    pub fn distribution(&self, lambda: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.measures)
            .filter(|(v, _)| v.abs() > lambda)
            .map(|(_, m)| m)
            .sum()
    }

    /// Reads columns `value, cell_measure`.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["value", "cell_measure"] {
            return Err(Error::InvalidInput("header must read value,cell_measure".into()));
        }
        let mut values = Vec::new();
        let mut measures = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let row = values.len() + 1;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("row {row}: {e}")))
            };
            let (v, m) = (parse(0)?, parse(1)?);
            values.push(v);
            measures.push(m);
        }
        SampledFunction::new(values, measures)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["value", "cell_measure"])?;
        for (v, m) in self.values.iter().zip(&self.measures) {
            w.write_record([format!("{v:?}"), format!("{m:?}")])?;
        }
        w.flush().map_err(|e| Error::io("<samples csv>", e))?;
        Ok(())
    }
}

/// The step function `f*(t) = levels[i]` on `[breaks[i−1], breaks[i])`,
/// with `breaks[−1] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangementTable {
    breaks: Vec<f64>,
    levels: Vec<f64>,
}

impl RearrangementTable {
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn total_measure(&self) -> f64 {
        self.breaks.last().copied().unwrap_or(0.0)
    }

    /// `f*(t)`, zero beyond the total measure.
    pub fn at(&self, t: f64) -> f64 {
        let i = self.breaks.partition_point(|b| *b <= t);
        self.levels.get(i).copied().unwrap_or(0.0)
    }

    /// `meas{f* > λ}`.
    pub fn distribution(&self, lambda: f64) -> f64 {
        let k = self.levels.partition_point(|l| *l > lambda);
        if k == 0 {
            0.0
        } else {
            self.breaks[k - 1]
        }
    }

    /// Columns `t_break, level`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_break", "level"])?;
        for (t, l) in self.breaks.iter().zip(&self.levels) {
            w.write_record([format!("{t:?}"), format!("{l:?}")])?;
        }
        w.flush().map_err(|e| Error::io("<rearrangement csv>", e))?;
        Ok(())
    }
}

/// Sorts `|f|` in decreasing order (ties by original index) and accumulates
/// the cell measures into breakpoints.
pub fn rearrange(f: &SampledFunction) -> RearrangementTable {
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&i, &j| f.values[j].abs().total_cmp(&f.values[i].abs()).then(i.cmp(&j)));
    let mut breaks = Vec::with_capacity(order.len());
    let mut levels = Vec::with_capacity(order.len());
    let mut t = 0.0;
    for i in order {
        t += f.measures[i];
        breaks.push(t);
        levels.push(f.values[i].abs());
    }
    RearrangementTable { breaks, levels }
}

/// Second Lorentz index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QIndex {
    Finite(f64),
    Infinite,
}

impl fmt::Display for QIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QIndex::Finite(q) => write!(f, "{q}"),
            QIndex::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for QIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(QIndex::Infinite),
            other => {
                let q: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("cannot parse q index '{s}'")))?;
                ensure_positive("q", q)?;
                Ok(QIndex::Finite(q))
            }
        }
    }
}

/// The pair `(p, q)` of `L^{p,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzIndex {
    p: f64,
    q: QIndex,
}

impl LorentzIndex {
    pub fn new(p: f64, q: QIndex) -> Result<Self> {
        ensure_positive("p", p)?;
        if let QIndex::Finite(q) = q {
            ensure_positive("q", q)?;
        }
        Ok(LorentzIndex { p, q })
    }

    pub fn finite(p: f64, q: f64) -> Result<Self> {
        LorentzIndex::new(p, QIndex::Finite(q))
    }

    pub fn weak(p: f64) -> Result<Self> {
        LorentzIndex::new(p, QIndex::Infinite)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> QIndex {
        self.q
    }
}

/// `‖f‖_{p,q}` of the step function, in closed form.
pub fn lorentz_norm(table: &RearrangementTable, idx: LorentzIndex) -> f64 {
    let p = idx.p;
    match idx.q {
        QIndex::Infinite => table
            .levels
            .iter()
            .zip(&table.breaks)
            .filter(|(l, _)| **l > 0.0)
            .map(|(l, t)| l * t.powf(1.0 / p))
            .fold(0.0, f64::max),
        QIndex::Finite(q) => {
            let e = q / p;
            let mut prev = 0.0f64;
            let mut acc = 0.0;
            for (l, t) in table.levels.iter().zip(&table.breaks) {
                let tp = t.powf(e);
                if *l > 0.0 {
                    acc += l.powf(q) * (tp - prev);
                }
                prev = tp;
            }
            (acc / e).powf(1.0 / q)
        }
    }
}

/// `‖f‖_{p,q₂} ≤ C ‖f‖_{p,q₁}` for `q₁ < q₂` with `C = (q₁/p)^{1/q₁ − 1/q₂}`.
pub fn nesting_constant(p: f64, q1: f64, q2: QIndex) -> f64 {
    let inv2 = match q2 {
        QIndex::Finite(q) => 1.0 / q,
        QIndex::Infinite => 0.0,
    };
    (q1 / p).powf(1.0 / q1 - inv2)
}

/// `(‖fg‖₁, ‖f‖_{2,1}, ‖g‖_{2,∞})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityTriple {
    pub product_l1: f64,
    pub f_norm_21: f64,
    pub g_norm_2inf: f64,
}

impl DualityTriple {
    /// `‖fg‖₁ ≤ ‖f‖_{2,1} ‖g‖_{2,∞}` up to relative rounding slack `1e-12`.
    pub fn holds(&self) -> bool {
        let bound = self.f_norm_21 * self.g_norm_2inf;
        self.product_l1 <= bound * (1.0 + 1e-12)
    }
}

fn same_cells(f: &SampledFunction, g: &SampledFunction) -> Result<()> {
    if f.measures != g.measures {
        return Err(Error::MismatchedDomains {
            left: f.len(),
            right: g.len(),
        });
    }
    Ok(())
}

pub fn duality_product_check(f: &SampledFunction, g: &SampledFunction) -> Result<DualityTriple> {
    same_cells(f, g)?;
    let product_l1 = f
        .values
        .iter()
        .zip(&g.values)
        .zip(&f.measures)
        .map(|((a, b), m)| (a * b).abs() * m)
        .sum();
    Ok(DualityTriple {
        product_l1,
        f_norm_21: lorentz_norm(&rearrange(f), LorentzIndex::finite(2.0, 1.0)?),
        g_norm_2inf: lorentz_norm(&rearrange(g), LorentzIndex::weak(2.0)?),
    })
}

/// Comparison of `‖f^α‖_{p/α, q/α}` with `‖f‖_{p,q}^α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRule {
    pub power_norm: f64,
    pub norm_power: f64,
    /// Whether `(f^α)* = (f*)^α` level by level, bit for bit.
    pub rearrangement_commutes: bool,
}

pub fn power_rule_check(f: &SampledFunction, alpha: f64, idx: LorentzIndex) -> Result<PowerRule> {
    ensure_positive("alpha", alpha)?;
    let integer = alpha.fract() == 0.0;
    if let Some(v) = f.values.iter().find(|v| **v < 0.0 && !integer) {
        return Err(Error::NegativeFractionalPower { value: *v, alpha });
    }
    let pow = |v: f64| v.abs().powf(alpha);
    let g = f.map(pow)?;
    let tf = rearrange(f);
    let tg = rearrange(&g);
    let rearrangement_commutes = tg.levels.iter().zip(&tf.levels).all(|(a, b)| *a == pow(*b));
    let q_alpha = match idx.q {
        QIndex::Finite(q) => QIndex::Finite(q / alpha),
        QIndex::Infinite => QIndex::Infinite,
    };
    Ok(PowerRule {
        power_norm: lorentz_norm(&tg, LorentzIndex::new(idx.p / alpha, q_alpha)?),
        norm_power: lorentz_norm(&tf, idx).powf(alpha),
        rearrangement_commutes,
    })
}

/// Pointwise decay of `|∇u|` on an annulus against its weak-`L²` norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDecay {
    /// `sup |x − c|^{n/2} |∇u(x)|` over the samples.
    pub weighted_sup: f64,
    /// `‖∇u‖_{L^{2,∞}}` of the sampled annulus.
    pub weak_norm: f64,
    /// `ωₙ^{1/2} · weighted_sup`, the bound implied by pointwise decay.
    pub decay_bound: f64,
}

impl TailDecay {
    /// `weak_norm ≤ decay_bound · (1 + slack)`.
    pub fn within(&self, slack: f64) -> bool {
        self.weak_norm <= self.decay_bound * (1.0 + slack)
    }
}

/// Samples `|∇u|` on `a < |x − center| < b` with a graded rule whose nodes
/// double as cells.
pub fn tail_decay_check<F: ScalarField + ?Sized>(
    u: &F,
    center: &[f64],
    a: f64,
    b: f64,
    step: Step,
) -> Result<TailDecay> {
    ensure_positive("inner radius", a)?;
    if !(b > a) {
        return Err(Error::InvalidInput(format!("need a < b, got ({a}, {b})")));
    }
    let n = u.dimension();
    let grading = Grading {
        core_radius: a,
        ratio: 1.25,
        panel_nodes: 6,
        angular: match n {
            3 => 12,
            4 => 8,
            _ => 5,
        },
    };
    let rule = build_graded_annulus_rule(n, center, a, b, grading)?;
    let grad_norm = |x: &[f64]| {
        let mut g = [0.0; MAX_DIM];
        gradient_into(u, x, step, &mut g[..n]);
        g[..n].iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    let mut weighted_sup = 0.0f64;
    rule.for_each_node(|x, _| {
        let d: f64 = x.iter().zip(center).map(|(p, c)| (p - c) * (p - c)).sum::<f64>().sqrt();
        weighted_sup = weighted_sup.max(d.powf(n as f64 / 2.0) * grad_norm(x));
    });
    let samples = SampledFunction::from_rule(&rule, grad_norm)?;
    let weak_norm = lorentz_norm(&rearrange(&samples), LorentzIndex::weak(2.0)?);
    Ok(TailDecay {
        weighted_sup,
        weak_norm,
        decay_bound: unit_ball_volume(n).sqrt() * weighted_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{aubin_talenti, Constant};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn dyadic(values: &[f64], measures: &[u32]) -> SampledFunction {
        SampledFunction::new(values.to_vec(), measures.iter().map(|m| *m as f64 / 1024.0).collect()).unwrap()
    }

    #[test]
    fn indicator_rearrangement() {
        let f = dyadic(&[0.0, 1.0, 1.0, 0.0], &[512, 256, 256, 1024]);
        let t = rearrange(&f);
        assert_eq!(t.levels(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(t.at(0.3), 1.0);
        assert_eq!(t.at(0.6), 0.0);
        assert_eq!(t.distribution(0.5), 0.5);
        assert_relative_eq!(
            lorentz_norm(&t, LorentzIndex::finite(2.0, 1.0).unwrap()),
            2.0 * 0.5f64.sqrt()
        );
    }

    #[test]
    fn homogeneity_and_l2() {
        let f = dyadic(&[3.0, -1.0, 2.5, 0.25], &[100, 300, 24, 600]);
        let g = f.map(|v| 2.0 * v).unwrap();
        let (tf, tg) = (rearrange(&f), rearrange(&g));
        assert_eq!(tf.breaks(), tg.breaks());
        assert!(tf.levels().iter().zip(tg.levels()).all(|(a, b)| 2.0 * a == *b));
        let l2: f64 = f
            .values()
            .iter()
            .zip(f.measures())
            .map(|(v, m)| v * v * m)
            .sum::<f64>()
            .sqrt();
        assert_relative_eq!(
            lorentz_norm(&tf, LorentzIndex::finite(2.0, 2.0).unwrap()),
            l2,
            max_relative = 1e-14
        );
        let zero = f.map(|_| 0.0).unwrap();
        for idx in [
            LorentzIndex::finite(2.0, 1.0).unwrap(),
            LorentzIndex::weak(3.0).unwrap(),
        ] {
            assert_eq!(lorentz_norm(&rearrange(&zero), idx), 0.0);
        }
    }

    #[test]
    fn weak_l2_of_critical_power() {
        let f = SampledFunction::radial_power(3, 1.5, 1e-3, 1e2, 20_000).unwrap();
        let norm = lorentz_norm(&rearrange(&f), LorentzIndex::weak(2.0).unwrap());
        assert_relative_eq!(norm, (4.0 * PI / 3.0).sqrt(), max_relative = 0.02);
    }

    #[test]
    fn rearranged_power_law_matches_distribution() {
        let (rho, big_r) = (0.1, 10.0);
        let f = SampledFunction::radial_power(3, 1.5, rho, big_r, 4000).unwrap();
        let t = rearrange(&f);
        let w = 4.0 * PI / 3.0;
        let v_rho = w * rho * rho * rho;
        for s in [0.01, 0.5, 10.0, 1000.0] {
            let exact = (w / (s + v_rho)).sqrt();
            assert_relative_eq!(t.at(s), exact, max_relative = 0.02);
        }
    }

    #[test]
    fn duality_on_indicators() {
        let f = dyadic(&[1.0, 0.0], &[1024, 1024]);
        let d = duality_product_check(&f, &f).unwrap();
        assert_relative_eq!(d.product_l1, 1.0);
        assert_relative_eq!(d.f_norm_21, 2.0);
        assert_relative_eq!(d.g_norm_2inf, 1.0);
        assert!(d.holds());
        let other = dyadic(&[1.0], &[2048]);
        assert!(matches!(
            duality_product_check(&f, &other),
            Err(Error::MismatchedDomains { .. })
        ));
    }

    #[test]
    fn power_rule_basics() {
        let f = dyadic(&[0.5, 2.0, 1.5], &[1, 2, 3]);
        let idx = LorentzIndex::finite(4.0, 2.0).unwrap();
        let same = power_rule_check(&f, 1.0, idx).unwrap();
        assert_eq!(same.power_norm, same.norm_power);
        let sq = power_rule_check(&f, 2.0, idx).unwrap();
        assert!(sq.rearrangement_commutes);
        assert_relative_eq!(sq.power_norm, sq.norm_power, max_relative = 1e-12);
        let neg = dyadic(&[-0.5, 2.0], &[1, 2]);
        assert!(matches!(
            power_rule_check(&neg, 0.5, idx),
            Err(Error::NegativeFractionalPower { .. })
        ));
    }

    #[test]
    fn tail_decay_of_a_concentrated_bubble() {
        let zero = Constant::zero(3).unwrap();
        let z = tail_decay_check(&zero, &[0.0; 3], 0.1, 1.0, Step::default()).unwrap();
        assert_eq!(z.weighted_sup, 0.0);
        let mut sups = Vec::new();
        for delta in [1e-2, 1e-3] {
            let u = aubin_talenti(3, delta, &[0.0; 3]).unwrap();
            let t = tail_decay_check(&u, &[0.0; 3], 0.1, 1.0, Step::default()).unwrap();
            assert!(t.within(0.05), "{t:?}");
            sups.push(t.weighted_sup);
        }
        assert!(sups[1] < sups[0]);
    }

    #[test]
    fn csv_round_trip() {
        let f = dyadic(&[0.5, 2.0, 1.5], &[1, 2, 3]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"value,cell_measure\n"));
        assert_eq!(SampledFunction::read_csv(&buf[..]).unwrap(), f);
        let mut tbuf = Vec::new();
        rearrange(&f).write_csv(&mut tbuf).unwrap();
        assert!(tbuf.starts_with(b"t_break,level\n"));
    }

    #[test]
    fn q_index_parsing() {
        assert_eq!("inf".parse::<QIndex>().unwrap(), QIndex::Infinite);
        assert_eq!("2".parse::<QIndex>().unwrap(), QIndex::Finite(2.0));
        assert!("-1".parse::<QIndex>().is_err());
        assert!(LorentzIndex::finite(0.0, 1.0).is_err());
    }
}
