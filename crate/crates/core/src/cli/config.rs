use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::concentration::QuantizeConfig;
use crate::error::{Error, Result};
use crate::fields::Step;
use crate::grid::{validate_dimension, QuadConfig};

/// Detection and regularity thresholds; unset values fall back to `Λ₀/10`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSettings {
    pub eps0: Option<f64>,
    pub eps_n: Option<f64>,
    /// Small-energy threshold of the regularity check.
    pub eps_regularity: Option<f64>,
}

/// Pass/fail limits of the subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSettings {
    /// Largest `|−Δu − u|u|^{4/(n−2)}|` accepted for an exact solution.
    pub residual: f64,
    /// Largest relative Pohozaev imbalance.
    pub pohozaev: f64,
    /// Relative slack on non-decrease, times `max |E|`.
    pub monotone: f64,
    /// Relative error of a Lorentz norm against its analytic value.
    pub lorentz: f64,
    /// Relative error for quantities that agree by construction.
    pub exact: f64,
    /// Largest `|Θ̂/Λ₀ − N̂|`.
    pub quantization: f64,
    /// Neck energy at the largest `R` as a fraction of `Λ₀`.
    pub neck_fraction: f64,
}

impl Default for ToleranceSettings {
    fn default() -> Self {
        ToleranceSettings {
            residual: 1e-10,
            pohozaev: 1e-6,
            monotone: 1e-6,
            lorentz: 0.02,
            exact: 1e-10,
            quantization: 0.05,
            neck_fraction: 0.01,
        }
    }
}

/// Settings shared by every subcommand, read from TOML; command-line flags
/// override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub seed: u64,
    /// Not echoed: it does not change any result.
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    /// Worker threads, 0 for one per core. Not echoed.
    #[serde(skip_serializing)]
    pub threads: usize,
    /// Truncation radius for whole-space energies.
    pub truncation_radius: f64,
    pub quadrature: QuadConfig,
    pub step: Step,
    pub thresholds: ThresholdSettings,
    pub tolerances: ToleranceSettings,
    pub quantize: QuantizeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dimension: 3,
            seed: 0,
            out_dir: PathBuf::from("bubble-lab-out"),
            threads: 0,
            truncation_radius: 50.0,
            quadrature: QuadConfig::default(),
            step: Step::default(),
            thresholds: ThresholdSettings::default(),
            tolerances: ToleranceSettings::default(),
            quantize: QuantizeConfig::default(),
        }
    }
}

impl RunConfig {
    /// A `[command]` table, as echoed in `effective-config.toml`, is ignored
    /// so the echo can be passed back with `--config`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        table.remove("command");
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Rejects non-positive or non-finite numbers.
    pub fn validate(&self) -> Result<()> {
        validate_dimension(self.dimension)?;
        let t = &self.tolerances;
        let mut checks = vec![
            ("truncation_radius", self.truncation_radius),
            ("tolerances.residual", t.residual),
            ("tolerances.pohozaev", t.pohozaev),
            ("tolerances.monotone", t.monotone),
            ("tolerances.lorentz", t.lorentz),
            ("tolerances.exact", t.exact),
            ("tolerances.quantization", t.quantization),
            ("tolerances.neck_fraction", t.neck_fraction),
            ("quantize.r_small", self.quantize.r_small),
            ("quadrature.panel_ratio", self.quadrature.panel_ratio - 1.0),
            ("quadrature.core_fraction", self.quadrature.core_fraction),
        ];
        let th = &self.thresholds;
        for (name, v) in [
            ("thresholds.eps0", th.eps0),
            ("thresholds.eps_n", th.eps_n),
            ("thresholds.eps_regularity", th.eps_regularity),
        ] {
            if let Some(v) = v {
                checks.push((name, v));
            }
        }
        match self.step {
            Step::Relative(h) | Step::Absolute(h) => checks.push(("step", h)),
        }
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.quadrature.order.radial == 0 || self.quadrature.panel_nodes == 0 || self.quadrature.graded_angular == 0
        {
            return Err(Error::Config("quadrature orders must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = RunConfig::parse("dimension = 4\n[tolerances]\nresidual = 1e-9\n").unwrap();
        assert_eq!(cfg.dimension, 4);
        assert_eq!(cfg.tolerances.residual, 1e-9);
        assert_eq!(cfg.tolerances.pohozaev, 1e-6);
        cfg.validate().unwrap();
        assert!(RunConfig::parse("dimensions = 4").is_err());
        let bad = RunConfig::parse("truncation_radius = -1.0").unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert!(!text.contains("out_dir"));
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }
}
