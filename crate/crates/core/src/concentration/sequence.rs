use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BubbleConstant, EnergyConfig};
use crate::error::{Error, Result};
use crate::fields::{critical_exponent, energy_terms, Bubble, BubbleConfiguration, Constant, FieldRef};
use crate::grid::{distance, validate_dimension};

/// How the scale of one bubble shrinks with the sequence index `k ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSchedule {
    /// `δ_k = base^{−k}`.
    Geometric { base: f64 },
    /// `δ_k = scales[k − 1]`.
    Explicit { scales: Vec<f64> },
}

impl ScaleSchedule {
    pub fn scale(&self, k: u32) -> Option<f64> {
        if k == 0 {
            return None;
        }
        match self {
            ScaleSchedule::Geometric { base } => Some(base.powi(-(k as i32))),
            ScaleSchedule::Explicit { scales } => scales.get(k as usize - 1).copied(),
        }
    }

    /// Largest valid index, `None` when unbounded.
    pub fn last_index(&self) -> Option<u32> {
        match self {
            ScaleSchedule::Geometric { .. } => None,
            ScaleSchedule::Explicit { scales } => Some(scales.len() as u32),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ScaleSchedule::Geometric { base } => base.is_finite() && *base > 1.0,
            ScaleSchedule::Explicit { scales } => {
                !scales.is_empty()
                    && scales.iter().all(|s| s.is_finite() && *s > 0.0)
                    && scales.windows(2).all(|w| w[1] < w[0])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "scale schedule {self:?} is not strictly decreasing to zero"
            )))
        }
    }
}

/// One bubble of a synthetic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleSpec {
    pub center: Vec<f64>,
    #[serde(flatten)]
    pub schedule: ScaleSchedule,
    #[serde(default = "unit")]
    pub weight: f64,
}

fn unit() -> f64 {
    1.0
}

impl BubbleSpec {
    pub fn geometric(center: &[f64], base: f64) -> Self {
        BubbleSpec {
            center: center.to_vec(),
            schedule: ScaleSchedule::Geometric { base },
            weight: 1.0,
        }
    }
}

/// `k ↦ u_k = Σ_j w_j U_{δ_j(k), y_j}`; the empty sum is the zero sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationSequence {
    dimension: usize,
    bubbles: Vec<BubbleSpec>,
    budget: f64,
    description: String,
}

/// Validates `specs` and builds the sequence. Without a `budget` a loose
/// default proportional to the total bubble weight is used.
pub fn make_sequence(
    n: usize,
    specs: Vec<BubbleSpec>,
    budget: Option<f64>,
    description: impl Into<String>,
) -> Result<ConcentrationSequence> {
    validate_dimension(n)?;
    for s in &specs {
        if s.center.len() != n || s.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bubble center must have {n} finite coordinates"
            )));
        }
        if !s.weight.is_finite() || s.weight == 0.0 {
            return Err(Error::InvalidInput("bubble weight must be finite and nonzero".into()));
        }
        s.schedule.validate()?;
    }
    for (i, a) in specs.iter().enumerate() {
        for b in &specs[i + 1..] {
            if distance(&a.center, &b.center) == 0.0 {
                check_separated(a, b)?;
            }
        }
    }
    let budget = match budget {
        Some(b) if b.is_finite() && b > 0.0 => b,
        Some(b) => {
            return Err(Error::NonPositive {
                what: "budget",
                value: b,
            })
        }
        None => {
            let lambda = BubbleConstant::compute(n)?.value;
            let w: f64 = specs.iter().map(|s| s.weight.abs()).sum();
            2.0 * w.max(1.0) * (lambda.sqrt() + lambda.powf(1.0 / critical_exponent(n))) + 1.0
        }
    };
    Ok(ConcentrationSequence {
        dimension: n,
        bubbles: specs,
        budget,
        description: description.into(),
    })
}

// Same-center bubbles must separate: the ratio of their scales has to
// shrink with k.
fn check_separated(a: &BubbleSpec, b: &BubbleSpec) -> Result<()> {
    let probe = match (a.schedule.last_index(), b.schedule.last_index()) {
        (Some(x), Some(y)) => x.min(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => 8,
    }
    .max(1);
    let ratios: Vec<f64> = (1..=probe)
        .map(|k| {
            let (s, t) = (a.schedule.scale(k).unwrap(), b.schedule.scale(k).unwrap());
            s.min(t) / s.max(t)
        })
        .collect();
    let shrinking = ratios.len() >= 2 && ratios.windows(2).all(|w| w[1] < w[0]);
    if shrinking {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "bubbles at {:?} are not scale-separated (ratios {ratios:?})",
            a.center
        )))
    }
}

/// `‖u_k‖_{H¹(B(0,1))} + ‖u_k‖_{L^{2*}(B(0,1))}` at one index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSample {
    pub k: u32,
    pub measured: f64,
}

impl ConcentrationSequence {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bubbles(&self) -> &[BubbleSpec] {
        &self.bubbles
    }

    pub fn is_zero(&self) -> bool {
        self.bubbles.is_empty()
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Largest index every schedule supports, `None` when unbounded.
    pub fn max_index(&self) -> Option<u32> {
        self.bubbles.iter().filter_map(|b| b.schedule.last_index()).min()
    }

    fn check_index(&self, k: u32) -> Result<()> {
        if k == 0 || self.max_index().is_some_and(|m| k > m) {
            return Err(Error::InvalidInput(format!(
                "sequence index {k} outside 1..={}",
                self.max_index().map_or("inf".to_string(), |m| m.to_string())
            )));
        }
        Ok(())
    }

    /// `(y, δ)` of every bubble at index `k`.
    pub fn scales(&self, k: u32) -> Result<Vec<(Vec<f64>, f64)>> {
        self.check_index(k)?;
        Ok(self
            .bubbles
            .iter()
            .map(|b| (b.center.clone(), b.schedule.scale(k).unwrap()))
            .collect())
    }

    /// Center and scale of the finest bubble at index `k`.
    pub fn finest(&self, k: u32) -> Result<Option<(Vec<f64>, f64)>> {
        Ok(self.scales(k)?.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)))
    }

    /// The field `u_k`.
    pub fn field(&self, k: u32) -> Result<FieldRef> {
        self.check_index(k)?;
        if self.bubbles.is_empty() {
            return Ok(Arc::new(Constant::zero(self.dimension)?));
        }
        let bubbles = self
            .bubbles
            .iter()
            .map(|b| Bubble::new(self.dimension, &b.center, b.schedule.scale(k).unwrap(), b.weight))
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(BubbleConfiguration::new(bubbles)?))
    }

    /// Measures the norm bound at each index and rejects the sequence if any
    /// exceeds the budget.
    pub fn check_budget(&self, ks: &[u32], cfg: &EnergyConfig) -> Result<Vec<BudgetSample>> {
        let n = self.dimension;
        let p = critical_exponent(n);
        let origin = vec![0.0; n];
        let mut out = Vec::with_capacity(ks.len());
        for &k in ks {
            let u = self.field(k)?;
            let hints = u.concentrations();
            let [sq, g2, pot] = cfg.quad.integrate_ball_many(n, &origin, 1.0, &hints, |x| {
                let v = u.value(x);
                let [g2, pot] = energy_terms(&*u, x, cfg.step);
                [v * v, g2, pot]
            })?;
            let measured = (sq + g2).sqrt() + pot.powf(1.0 / p);
            if measured > self.budget {
                return Err(Error::BudgetExceeded {
                    budget: self.budget,
                    k,
                    measured,
                });
            }
            out.push(BudgetSample { k, measured });
        }
        Ok(out)
    }
}

/// Thresholds a sequence file may carry; absent values use defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Detection threshold.
    pub eps0: Option<f64>,
    /// Half of this is the ball energy that fixes each concentration radius.
    pub eps_n: Option<f64>,
    pub r_grid: Option<Vec<f64>>,
}

/// On-disk description of a sequence, in TOML.
///
/// ```toml
/// dimension = 3
/// k_max = 10
///
/// [[bubbles]]
/// center = [0.0, 0.0, 0.0]
/// base = 4.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceFile {
    pub dimension: usize,
    pub k_max: u32,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub bubbles: Vec<BubbleSpec>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl SequenceFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sequence(&self) -> Result<ConcentrationSequence> {
        make_sequence(
            self.dimension,
            self.bubbles.clone(),
            self.budget,
            self.description.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_must_shrink() {
        let c = [0.0; 3];
        assert!(make_sequence(3, vec![BubbleSpec::geometric(&c, 4.0)], None, "").is_ok());
        assert!(make_sequence(3, vec![BubbleSpec::geometric(&c, 1.0)], None, "").is_err());
        let flat = BubbleSpec {
            center: c.to_vec(),
            schedule: ScaleSchedule::Explicit {
                scales: vec![1.0, 1.0, 1.0],
            },
            weight: 1.0,
        };
        assert!(make_sequence(3, vec![flat], None, "").is_err());
    }

    #[test]
    fn same_center_bubbles_must_separate() {
        let c = [0.0; 3];
        let two = vec![BubbleSpec::geometric(&c, 4.0), BubbleSpec::geometric(&c, 16.0)];
        assert!(make_sequence(3, two, None, "").is_ok());
        let twins = vec![BubbleSpec::geometric(&c, 4.0), BubbleSpec::geometric(&c, 4.0)];
        assert!(make_sequence(3, twins, None, "").is_err());
        let apart = vec![
            BubbleSpec::geometric(&c, 4.0),
            BubbleSpec::geometric(&[0.5, 0.0, 0.0], 4.0),
        ];
        assert!(make_sequence(3, apart, None, "").is_ok());
    }

    #[test]
    fn fields_follow_the_schedule() {
        let seq = make_sequence(3, vec![BubbleSpec::geometric(&[0.0; 3], 4.0)], None, "").unwrap();
        let u = seq.field(2).unwrap();
        let b = Bubble::new(3, &[0.0; 3], 1.0 / 16.0, 1.0).unwrap();
        use crate::fields::ScalarField;
        assert_eq!(u.value(&[0.01, 0.0, 0.0]), b.value(&[0.01, 0.0, 0.0]));
        assert!(seq.field(0).is_err());
        let zero = make_sequence(3, vec![], None, "").unwrap();
        assert_eq!(zero.field(5).unwrap().value(&[0.0; 3]), 0.0);
    }

    #[test]
    fn file_round_trip() {
        let text = r#"
            dimension = 3
            k_max = 6
            [[bubbles]]
            center = [0.0, 0.0, 0.0]
            base = 4.0
            [[bubbles]]
            center = [0.0, 0.0, 0.0]
            scales = [0.1, 0.001, 1e-5, 1e-7, 1e-9, 1e-11]
            weight = 1.0
            [thresholds]
            eps0 = 2.5
        "#;
        let f = SequenceFile::parse(text).unwrap();
        assert_eq!(f.bubbles[0].schedule, ScaleSchedule::Geometric { base: 4.0 });
        assert_eq!(f.thresholds.eps0, Some(2.5));
        assert_eq!(f.sequence().unwrap().max_index(), Some(6));
        let again = SequenceFile::parse(&f.to_toml().unwrap()).unwrap();
        assert_eq!(again, f);
        assert!(SequenceFile::parse("dimension = 3\nk_max = 2\nbogus = 1").is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let c = [0.0; 3];
        let seq = make_sequence(3, vec![BubbleSpec::geometric(&c, 4.0)], Some(1.0), "").unwrap();
        let err = seq.check_budget(&[3], &EnergyConfig::default()).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { k: 3, .. }));
        let loose = make_sequence(3, vec![BubbleSpec::geometric(&c, 4.0)], None, "").unwrap();
        let samples = loose.check_budget(&[2, 4], &EnergyConfig::default()).unwrap();
        assert_eq!(samples.len(), 2);
    }
}
