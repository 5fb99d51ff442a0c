use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{Bubble, Constant, FieldRef, SampledField};

/// Which field a subcommand works on; a standard bubble when none is given.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct FieldArgs {
    /// Bubble as KEY=VALUE pairs: n, delta, center (comma separated), weight.
    #[arg(long, num_args = 0.., value_name = "KEY=VALUE", group = "field")]
    pub bubble: Option<Vec<String>>,
    /// Constant field with this value.
    #[arg(long, value_name = "VALUE", allow_negative_numbers = true, group = "field")]
    pub constant: Option<f64>,
    /// The zero field.
    #[arg(long, group = "field")]
    pub zero: bool,
    /// Tensor-grid samples in CSV with header x1..xn,u.
    #[arg(long, value_name = "PATH", group = "field")]
    pub sampled: Option<PathBuf>,
}

/// A parsed field description.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FieldSpec {
    Bubble {
        n: usize,
        delta: f64,
        center: Vec<f64>,
        weight: f64,
    },
    Constant {
        n: usize,
        value: f64,
    },
    Sampled {
        path: PathBuf,
    },
}

pub(crate) fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("'{s}' is not a number")))
        })
        .collect()
}

pub(crate) fn key_values(pairs: &[String]) -> Result<Vec<(String, String)>> {
    pairs
        .iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got '{p}'")))
        })
        .collect()
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("cannot parse {key}='{v}'")))
}

impl FieldArgs {
    pub fn spec(&self, default_n: usize) -> Result<FieldSpec> {
        if let Some(v) = self.constant {
            return Ok(FieldSpec::Constant { n: default_n, value: v });
        }
        if self.zero {
            return Ok(FieldSpec::Constant {
                n: default_n,
                value: 0.0,
            });
        }
        if let Some(path) = &self.sampled {
            return Ok(FieldSpec::Sampled { path: path.clone() });
        }
        let (mut n, mut delta, mut center, mut weight) = (default_n, 1.0, None, 1.0);
        for (k, v) in key_values(self.bubble.as_deref().unwrap_or_default())? {
            match k.as_str() {
                "n" => n = number(&k, &v)?,
                "delta" => delta = number(&k, &v)?,
                "weight" => weight = number(&k, &v)?,
                "center" => center = Some(parse_list(&v)?),
                _ => return Err(Error::Config(format!("unknown bubble key '{k}'"))),
            }
        }
        Ok(FieldSpec::Bubble {
            n,
            delta,
            center: center.unwrap_or_else(|| vec![0.0; n]),
            weight,
        })
    }
}

impl FieldSpec {
    pub fn build(&self) -> Result<FieldRef> {
        Ok(match self {
            FieldSpec::Bubble {
                n,
                delta,
                center,
                weight,
            } => Arc::new(Bubble::new(*n, center, *delta, *weight)?),
            FieldSpec::Constant { n, value } => Arc::new(Constant::new(*n, *value)?),
            FieldSpec::Sampled { path } => Arc::new(SampledField::read_csv(path)?),
        })
    }

    /// Whether the field solves the equation exactly, so residual
    /// tolerances apply.
    pub fn is_exact_solution(&self) -> bool {
        match self {
            FieldSpec::Bubble { weight, .. } => weight.abs() == 1.0,
            FieldSpec::Constant { value, .. } => *value == 0.0,
            FieldSpec::Sampled { .. } => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bubble_pairs_parse() {
        let args = FieldArgs {
            bubble: Some(vec!["n=4".into(), "delta=0.5".into(), "center=1,0,0,0".into()]),
            ..FieldArgs::default()
        };
        assert_eq!(
            args.spec(3).unwrap(),
            FieldSpec::Bubble {
                n: 4,
                delta: 0.5,
                center: vec![1.0, 0.0, 0.0, 0.0],
                weight: 1.0
            }
        );
        let bad = FieldArgs {
            bubble: Some(vec!["size=2".into()]),
            ..FieldArgs::default()
        };
        assert!(matches!(bad.spec(3), Err(Error::Config(_))));
        assert!(FieldArgs::default().spec(3).unwrap().is_exact_solution());
    }
}
