use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ConcentrationSequence;
use crate::error::{Error, Result};
use crate::fields::{FieldRef, Step};
use crate::grid::{distance, QuadConfig, QuadOrder};
use crate::monotonicity::{closed_energy, MonotonicityConfig};

/// Finite-index surrogate for `liminf_k E_{u_k}(x, r) ≥ ε₀` on every `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub eps0: f64,
    pub r_grid: Vec<f64>,
    pub k_max: u32,
    /// Candidates lie on `{−L, −L + h, …, L}ⁿ` plus the declared centers.
    pub lattice_half_width: f64,
    pub lattice_spacing: f64,
    pub quad: QuadConfig,
    pub step: Step,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            eps0: 1.0,
            r_grid: vec![0.05, 0.1, 0.2],
            k_max: 10,
            lattice_half_width: 1.0,
            lattice_spacing: 0.5,
            quad: DetectConfig::coarse_quad(),
            step: Step::default(),
        }
    }
}

impl DetectConfig {
    /// Thresholding needs far less accuracy than the energies themselves.
    pub fn coarse_quad() -> QuadConfig {
        QuadConfig {
            order: QuadOrder::new(16, 4),
            graded_angular: 3,
            panel_nodes: 6,
            ..QuadConfig::default()
        }
    }

    /// `⌈k_max/2⌉`, the first index of the liminf window.
    pub fn k0(&self) -> u32 {
        self.k_max.div_ceil(2).max(1)
    }

    fn validate(&self) -> Result<()> {
        let bad = !(self.eps0 > 0.0)
            || self.r_grid.is_empty()
            || self.r_grid.iter().any(|r| !(*r > 0.0))
            || self.k_max == 0
            || !(self.lattice_half_width >= 0.0)
            || !(self.lattice_spacing > 0.0);
        if bad {
            Err(Error::InvalidInput(format!("invalid detection settings {self:?}")))
        } else {
            Ok(())
        }
    }
}

/// Detected points closer than the linking distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub representative: Vec<f64>,
    pub members: Vec<Vec<f64>>,
    /// Smallest `E_{u_k}(x, r)` over the window at the representative.
    pub min_energy: f64,
    /// More than one candidate fired; the point set is not resolved.
    pub unresolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// One representative per cluster.
    pub points: Vec<Vec<f64>>,
    pub clusters: Vec<Cluster>,
    pub candidates: usize,
    pub k0: u32,
    pub k_max: u32,
}

fn lattice(n: usize, half_width: f64, h: f64) -> Vec<Vec<f64>> {
    let steps = (2.0 * half_width / h + 1e-9).floor() as usize;
    let axis: Vec<f64> = (0..=steps).map(|i| -half_width + i as f64 * h).collect();
    let mut points = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    points
}

/// Scans lattice points and declared centers; a candidate is kept when every
/// `r` in the grid and every `k` in `[⌈k_max/2⌉, k_max]` give
/// `E_{u_k}(x, r) ≥ ε₀`.
pub fn detect_sigma(seq: &ConcentrationSequence, cfg: &DetectConfig) -> Result<Detection> {
    cfg.validate()?;
    let n = seq.dimension();
    let k_max = seq.max_index().map_or(cfg.k_max, |m| cfg.k_max.min(m));
    let k0 = cfg.k0().min(k_max);
    let empty = Detection {
        points: vec![],
        clusters: vec![],
        candidates: 0,
        k0,
        k_max,
    };
    if seq.is_zero() {
        return Ok(empty);
    }
    let declared: Vec<Vec<f64>> = seq.bubbles().iter().map(|b| b.center.clone()).collect();
    let mut candidates = lattice(n, cfg.lattice_half_width, cfg.lattice_spacing);
    for c in &declared {
        if !candidates.iter().any(|p| distance(p, c) < 1e-12) {
            candidates.push(c.clone());
        }
    }
    let fields: Vec<FieldRef> = (k0..=k_max).rev().map(|k| seq.field(k)).collect::<Result<_>>()?;
    let mut radii = cfg.r_grid.clone();
    radii.sort_by(f64::total_cmp);
    let mcfg = MonotonicityConfig {
        quad: cfg.quad,
        step: cfg.step,
        ..MonotonicityConfig::default()
    };
    // smallest radius and largest k first: the likeliest to fall short
    let scores: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|x| -> Result<Option<f64>> {
            let mut min = f64::INFINITY;
            for &r in &radii {
                for u in &fields {
                    let e = closed_energy(&**u, x, r, &mcfg)?;
                    if e < cfg.eps0 {
                        return Ok(None);
                    }
                    min = min.min(e);
                }
            }
            Ok(Some(min))
        })
        .collect::<Result<_>>()?;
    let scanned = candidates.len();
    let hits: Vec<(Vec<f64>, f64)> = candidates
        .into_iter()
        .zip(scores)
        .filter_map(|(x, s)| s.map(|e| (x, e)))
        .collect();
    let link = (2.0 * radii[radii.len() - 1]).max(cfg.lattice_spacing) * (1.0 + 1e-9);
    let clusters = cluster(hits, link, &declared);
    Ok(Detection {
        points: clusters.iter().map(|c| c.representative.clone()).collect(),
        clusters,
        candidates: scanned,
        ..empty
    })
}

// Single linkage; the representative is a declared center when one fired,
// else the member with the largest minimum energy.
fn cluster(hits: Vec<(Vec<f64>, f64)>, link: f64, declared: &[Vec<f64>]) -> Vec<Cluster> {
    let m = hits.len();
    let mut label: Vec<usize> = (0..m).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..m {
        for j in i + 1..m {
            if distance(&hits[i].0, &hits[j].0) <= link {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..m {
        let r = root(&mut label, i);
        match out.iter_mut().find(|(k, _)| *k == r) {
            Some((_, members)) => members.push(i),
            None => out.push((r, vec![i])),
        }
    }
    out.into_iter()
        .map(|(_, members)| {
            let is_declared = |i: &usize| declared.iter().any(|d| distance(d, &hits[*i].0) < 1e-12);
            let best = members.iter().copied().find(is_declared).unwrap_or_else(|| {
                *members
                    .iter()
                    .max_by(|a, b| hits[**a].1.total_cmp(&hits[**b].1).then(b.cmp(a)))
                    .unwrap()
            });
            Cluster {
                representative: hits[best].0.clone(),
                min_energy: hits[best].1,
                unresolved: members.len() > 1,
                members: members.iter().map(|&i| hits[i].0.clone()).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentration::{make_sequence, BubbleConstant, BubbleSpec};

    #[test]
    fn lattice_has_expected_size() {
        assert_eq!(lattice(3, 1.0, 0.5).len(), 125);
        assert_eq!(lattice(2, 0.0, 0.5), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn zero_sequence_detects_nothing() {
        let seq = make_sequence(3, vec![], None, "").unwrap();
        assert!(detect_sigma(&seq, &DetectConfig::default()).unwrap().points.is_empty());
    }

    #[test]
    fn single_bubble_is_found_alone() {
        let seq = make_sequence(3, vec![BubbleSpec::geometric(&[0.0; 3], 4.0)], None, "").unwrap();
        let cfg = DetectConfig {
            eps0: BubbleConstant::compute(3).unwrap().value / 10.0,
            ..DetectConfig::default()
        };
        let d = detect_sigma(&seq, &cfg).unwrap();
        assert_eq!(d.points, vec![vec![0.0; 3]]);
        assert!(!d.clusters[0].unresolved);
    }
}
