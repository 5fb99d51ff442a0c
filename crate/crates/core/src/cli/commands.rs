use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::json;

use super::spec::{key_values, parse_list, FieldSpec};
use super::{FieldArgs, Output, RunConfig, Summary};
use crate::concentration::{
    bubble_energy_table, energy_in, make_sequence, neck_energy, quantization_report, BubbleConstant, BubbleSpec,
    ConcentrationSequence, Density, EnergyConfig, Region, SequenceFile,
};
use crate::error::{Error, Result};
use crate::fields::{pde_residual, pohozaev_residual, Bubble, FieldRef, FnField, ScalarField};
use crate::grid::{unit_ball_volume, RadialGrid};
use crate::lorentz::{duality_product_check, lorentz_norm, rearrange, LorentzIndex, QIndex, SampledFunction};
use crate::monotonicity::{
    check_monotone, check_positive, eps_regularity_check, profile, Formulation, MonotonicityConfig,
};

fn summary(command: &str, passed: bool, lines: Vec<String>, data: serde_json::Value) -> Summary {
    Summary {
        command: command.to_string(),
        passed,
        lines,
        data,
    }
}

fn energy_config(cfg: &RunConfig) -> EnergyConfig {
    EnergyConfig {
        quad: cfg.quadrature,
        step: cfg.step,
    }
}

fn relative(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ResidualArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Pohozaev breakdown, e.g. `r=0.5,1,2`; `r=1` when given bare.
    #[arg(long, num_args = 0.., value_name = "KEY=VALUE")]
    pub pohozaev: Option<Vec<String>>,
    /// Random sample points in the ball.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Radius of the sampling ball around the origin.
    #[arg(long, default_value_t = 5.0)]
    pub radius: f64,
    /// Central differences instead of closed-form derivatives.
    #[arg(long)]
    pub finite_differences: bool,
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    let mut d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
    d.iter_mut().for_each(|v| *v *= r / norm);
    d
}

pub(super) fn residual(cfg: &RunConfig, args: &ResidualArgs, out: &Output) -> Result<Summary> {
    let spec = args.field.spec(cfg.dimension)?;
    let mut u = spec.build()?;
    let n = u.dimension();
    if args.finite_differences {
        let inner = u.clone();
        u = Arc::new(FnField::new(n, move |x| inner.value(x))?);
    }
    if args.points == 0 || !(args.radius > 0.0) {
        return Err(Error::Config("need at least one point and a positive radius".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(args.points);
    let mut max_abs = 0.0f64;
    for _ in 0..args.points {
        let x = uniform_in_ball(&mut rng, n, args.radius);
        let res = pde_residual(&*u, &x, cfg.step);
        max_abs = max_abs.max(res.abs());
        let mut row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        row.push(format!("{:?}", u.value(&x)));
        row.push(format!("{res:?}"));
        rows.push(row);
    }
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend(["u".into(), "residual".into()]);
    out.write_rows(
        "residuals.csv",
        &header.iter().map(String::as_str).collect::<Vec<_>>(),
        &rows,
    )?;

    let asserted = spec.is_exact_solution() && !args.finite_differences;
    let mut passed = !asserted || max_abs < cfg.tolerances.residual;
    let mut lines = vec![format!(
        "max |residual| over {} points in B(0, {}): {:.3e} ({})",
        args.points,
        args.radius,
        max_abs,
        if asserted {
            format!("tolerance {:.1e}", cfg.tolerances.residual)
        } else {
            "informational".to_string()
        }
    )];

    let mut pohozaev = Vec::new();
    if let Some(pairs) = &args.pohozaev {
        let mut radii = vec![1.0];
        for (k, v) in key_values(pairs)? {
            match k.as_str() {
                "r" => radii = parse_list(&v)?,
                _ => return Err(Error::Config(format!("unknown pohozaev key '{k}'"))),
            }
        }
        let center = match &spec {
            FieldSpec::Bubble { center, .. } => center.clone(),
            _ => vec![0.0; n],
        };
        let mut prow = Vec::new();
        for r in radii {
            let rep = pohozaev_residual(&*u, &center, r, &cfg.quadrature)?;
            for t in &rep.terms {
                prow.push(vec![
                    format!("{r:?}"),
                    t.label.clone(),
                    format!("{:?}", t.derived),
                    format!("{:?}", t.variant),
                ]);
            }
            prow.push(vec![
                format!("{r:?}"),
                "residual".into(),
                format!("{:?}", rep.residual),
                format!("{:?}", rep.variant_residual),
            ]);
            if asserted {
                passed &= rep.relative < cfg.tolerances.pohozaev;
            }
            lines.push(format!(
                "Pohozaev r={r}: relative imbalance {:.3e}, variant display imbalance {:.3e}",
                rep.relative, rep.variant_residual
            ));
            pohozaev.push(rep);
        }
        out.write_rows("pohozaev.csv", &["radius", "term", "derived", "variant"], &prow)?;
    }
    let data = json!({
        "field": spec,
        "points": args.points,
        "radius": args.radius,
        "max_abs_residual": max_abs,
        "tolerance": cfg.tolerances.residual,
        "asserted": asserted,
        "pohozaev": pohozaev,
    });
    Ok(summary("residual", passed, lines, data))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MonotonicityArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Probe center, comma separated; the origin by default.
    #[arg(long, value_name = "X1,X2,...", allow_hyphen_values = true)]
    pub center: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub r_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub r_max: f64,
    /// Log-spaced radii.
    #[arg(long, default_value_t = 40)]
    pub points: usize,
}

pub(super) fn monotonicity(cfg: &RunConfig, args: &MonotonicityArgs, out: &Output) -> Result<Summary> {
    let spec = args.field.spec(cfg.dimension)?;
    let u = spec.build()?;
    let n = u.dimension();
    let center = match &args.center {
        Some(c) => parse_list(c)?,
        None => vec![0.0; n],
    };
    if center.len() != n {
        return Err(Error::Config(format!("center needs {n} coordinates")));
    }
    let mcfg = MonotonicityConfig {
        quad: cfg.quadrature,
        step: cfg.step,
        ..MonotonicityConfig::default()
    };
    let grid = RadialGrid::log_spaced(args.r_min, args.r_max, args.points)?;
    let prof = profile(&*u, &center, &grid, &mcfg)?;
    let slack = cfg.tolerances.monotone * prof.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let monotone = check_monotone(&prof, Some(slack));
    let positive = check_positive(&prof, Some(slack));
    out.write_with("profile.csv", |w| prof.write_csv(w))?;
    let columns: Vec<Vec<f64>> = Formulation::ALL.iter().map(|f| prof.values_for(*f)).collect();
    let rows: Vec<Vec<String>> = grid
        .radii()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![format!("{r:?}")];
            row.extend(columns.iter().map(|c| format!("{:?}", c[i])));
            row
        })
        .collect();
    let mut header = vec!["r"];
    header.extend(Formulation::ALL.iter().map(|f| f.name()));
    out.write_rows("formulations.csv", &header, &rows)?;
    let regularity = match cfg.thresholds.eps_regularity {
        Some(eps) => Some(eps_regularity_check(
            &*u,
            &center,
            args.r_max,
            0.25 * args.r_max,
            eps,
            &mcfg,
        )?),
        None => None,
    };
    let passed = monotone.passed() && positive.passed();
    let lines = vec![format!(
        "E(x, r) on {} radii in [{}, {}]: {} drops, {} negative values beyond slack {:.3e}",
        args.points,
        args.r_min,
        args.r_max,
        monotone.violations.len(),
        positive.violations.len(),
        slack
    )];
    let data = json!({
        "field": spec,
        "center": center,
        "monotone": monotone,
        "positive": positive,
        "regularity": regularity,
    });
    Ok(summary("monotonicity", passed, lines, data))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LorentzArgs {
    /// Analytic test function; `inv-sqrt-n` is `|x|^{-n/2}` on an annulus.
    #[arg(long, value_name = "NAME", group = "input")]
    pub analytic: Option<String>,
    /// CSV with columns value,cell_measure.
    #[arg(long, value_name = "PATH", group = "input")]
    pub samples: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// A positive number or `inf`.
    #[arg(long, default_value = "inf")]
    pub q: String,
    /// Radial cells of the analytic function.
    #[arg(long, default_value_t = 100_000)]
    pub cells: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub inner: f64,
    #[arg(long, default_value_t = 1.0)]
    pub outer: f64,
    /// Random duality trials `‖fg‖₁ ≤ ‖f‖_{2,1} ‖g‖_{2,∞}`.
    #[arg(long, default_value_t = 0)]
    pub trials: usize,
    #[arg(long, default_value_t = 64)]
    pub trial_size: usize,
}

fn random_pair(rng: &mut ChaCha8Rng, size: usize) -> Result<(SampledFunction, SampledFunction)> {
    let measures: Vec<f64> = (0..size).map(|_| rng.gen_range(1e-3..1.0)).collect();
    let f: Vec<f64> = (0..size).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..size)
        .map(|_| {
            let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            s * rng.gen_range(1e-3f64..1.0).powf(-0.5)
        })
        .collect();
    Ok((
        SampledFunction::new(f, measures.clone())?,
        SampledFunction::new(g, measures)?,
    ))
}

pub(super) fn lorentz(cfg: &RunConfig, args: &LorentzArgs, out: &Output) -> Result<Summary> {
    let n = cfg.dimension;
    let q: QIndex = args.q.parse()?;
    let idx = LorentzIndex::new(args.p, q)?;
    let mut lines = Vec::new();
    let mut passed = true;
    let mut norm_data = serde_json::Value::Null;
    let analytic = match (&args.analytic, &args.samples) {
        (None, None) if args.trials == 0 => Some("inv-sqrt-n".to_string()),
        (a, _) => a.clone(),
    };
    let f = match (&analytic, &args.samples) {
        (Some(name), _) if name == "inv-sqrt-n" => Some(SampledFunction::radial_power(
            n,
            n as f64 / 2.0,
            args.inner,
            args.outer,
            args.cells,
        )?),
        (Some(name), _) => return Err(Error::Config(format!("unknown analytic function '{name}'"))),
        (None, Some(path)) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            Some(SampledFunction::read_csv(BufReader::new(file))?)
        }
        (None, None) => None,
    };
    if let Some(f) = f {
        let table = rearrange(&f);
        let norm = lorentz_norm(&table, idx);
        out.write_with("rearrangement.csv", |w| table.write_csv(w))?;
        let mut expected = None;
        let mut tolerance = None;
        if analytic.is_some() && args.p == 2.0 && q == QIndex::Infinite {
            expected = Some(unit_ball_volume(n).sqrt());
            tolerance = Some(cfg.tolerances.lorentz);
        } else if q == QIndex::Finite(args.p) {
            let direct = f
                .values()
                .iter()
                .zip(f.measures())
                .map(|(v, m)| v.abs().powf(args.p) * m)
                .sum::<f64>()
                .powf(1.0 / args.p);
            expected = Some(direct);
            tolerance = Some(cfg.tolerances.exact);
        }
        let error = expected.map(|e| relative(norm, e));
        if let (Some(err), Some(tol)) = (error, tolerance) {
            passed &= err <= tol;
        }
        lines.push(match expected {
            Some(e) => format!(
                "L^({}, {}) norm {norm:.6} against {e:.6} (relative error {:.2e})",
                args.p,
                args.q,
                error.unwrap()
            ),
            None => format!("L^({}, {}) norm {norm:.6}", args.p, args.q),
        });
        norm_data = json!({
            "p": args.p,
            "q": args.q,
            "cells": f.len(),
            "norm": norm,
            "expected": expected,
            "relative_error": error,
            "tolerance": tolerance,
        });
    }
    let mut duality = Vec::new();
    if args.trials > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut rows = Vec::with_capacity(args.trials);
        for t in 0..args.trials {
            let (f, g) = random_pair(&mut rng, args.trial_size.max(1))?;
            let d = duality_product_check(&f, &g)?;
            rows.push(vec![
                t.to_string(),
                format!("{:?}", d.product_l1),
                format!("{:?}", d.f_norm_21),
                format!("{:?}", d.g_norm_2inf),
                d.holds().to_string(),
            ]);
            duality.push(d);
        }
        out.write_rows(
            "duality.csv",
            &["trial", "product_l1", "f_norm_21", "g_norm_2inf", "holds"],
            &rows,
        )?;
        let held = duality.iter().filter(|d| d.holds()).count();
        passed &= held == duality.len();
        lines.push(format!("duality bound held in {held} of {} trials", duality.len()));
    }
    let data = json!({
        "norm": norm_data,
        "duality_trials": duality.len(),
        "duality_held": duality.iter().filter(|d| d.holds()).count(),
    });
    Ok(summary("lorentz", passed, lines, data))
}

/// Where a concentrating sequence comes from.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SequenceArgs {
    /// Sequence file in TOML.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    /// Without a file: one bubble at the origin with scales base^-k.
    #[arg(long, default_value_t = 4.0)]
    pub base: f64,
}

impl SequenceArgs {
    fn load(&self, cfg: &RunConfig) -> Result<(ConcentrationSequence, Option<SequenceFile>)> {
        match &self.spec {
            Some(path) => {
                let file = SequenceFile::load(path)?;
                Ok((file.sequence()?, Some(file)))
            }
            None => {
                let n = cfg.dimension;
                let seq = make_sequence(
                    n,
                    vec![BubbleSpec::geometric(&vec![0.0; n], self.base)],
                    None,
                    format!("single bubble, scales {}^-k", self.base),
                )?;
                Ok((seq, None))
            }
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NeckArgs {
    #[command(flatten)]
    pub sequence: SequenceArgs,
    /// Sequence indices, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [6u32, 8])]
    pub k: Vec<u32>,
    /// Inner radius as a multiple of the finest scale.
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 30.0, 100.0])]
    pub r_factors: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub outer: f64,
}

pub(super) fn neck(cfg: &RunConfig, args: &NeckArgs, out: &Output) -> Result<Summary> {
    let (seq, _) = args.sequence.load(cfg)?;
    let ecfg = energy_config(cfg);
    let lambda0 = BubbleConstant::compute(seq.dimension())?.value;
    let mut factors = args.r_factors.clone();
    factors.sort_by(f64::total_cmp);
    if factors.is_empty() || args.k.is_empty() {
        return Err(Error::Config("need at least one k and one R".into()));
    }
    let mut rows = Vec::new();
    let mut shell_rows = Vec::new();
    let mut passed = true;
    let mut lines = Vec::new();
    let mut necks = Vec::new();
    for &k in &args.k {
        let mut totals = Vec::new();
        for &r in &factors {
            let neck = neck_energy(&seq, k, r, args.outer, &ecfg)?;
            rows.push(vec![
                k.to_string(),
                format!("{r:?}"),
                format!("{:?}", neck.inner),
                format!("{:?}", neck.outer),
                format!("{:?}", neck.total),
                format!("{:?}", neck.max_shell()),
            ]);
            for (i, s) in neck.shells.iter().enumerate() {
                shell_rows.push(vec![
                    k.to_string(),
                    format!("{r:?}"),
                    i.to_string(),
                    format!("{:?}", s.inner),
                    format!("{:?}", s.outer),
                    format!("{:?}", s.energy),
                ]);
            }
            totals.push(neck.total);
            necks.push(neck);
        }
        let decreasing = totals.windows(2).all(|w| w[1] <= w[0]);
        let last = totals[totals.len() - 1];
        let small = last < cfg.tolerances.neck_fraction * lambda0;
        passed &= decreasing && small;
        lines.push(format!(
            "k={k}: neck energy at R={} is {:.3e} = {:.3}% of the bubble energy; {} in R",
            factors[factors.len() - 1],
            last,
            100.0 * last / lambda0,
            if decreasing { "decreasing" } else { "NOT decreasing" }
        ));
    }
    out.write_rows(
        "necks.csv",
        &["k", "r_factor", "inner", "outer", "total", "max_shell"],
        &rows,
    )?;
    out.write_rows(
        "shells.csv",
        &["k", "r_factor", "shell", "inner", "outer", "energy"],
        &shell_rows,
    )?;
    let table = bubble_energy_table(&seq, &factors, &args.k, &ecfg)?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| vec![r.k.to_string(), format!("{:?}", r.r_factor), format!("{:?}", r.energy)])
        .collect();
    out.write_rows("bubble_energy.csv", &["k", "r_factor", "energy"], &rows)?;
    let data = json!({
        "description": seq.description(),
        "lambda0": lambda0,
        "necks": necks,
        "bubble_energy": table,
    });
    Ok(summary("neck", passed, lines, data))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuantizeArgs {
    #[command(flatten)]
    pub sequence: SequenceArgs,
    #[arg(long)]
    pub k_max: Option<u32>,
    #[arg(long)]
    pub r_small: Option<f64>,
}

pub(super) fn quantize(cfg: &RunConfig, args: &QuantizeArgs, out: &Output) -> Result<Summary> {
    let (seq, file) = args.sequence.load(cfg)?;
    let mut q = cfg.quantize.clone();
    q.eps0 = cfg.thresholds.eps0.or(q.eps0);
    q.eps_n = cfg.thresholds.eps_n.or(q.eps_n);
    if let Some(f) = &file {
        q.k_max = f.k_max;
        q.eps0 = f.thresholds.eps0.or(q.eps0);
        q.eps_n = f.thresholds.eps_n.or(q.eps_n);
        if let Some(r) = &f.thresholds.r_grid {
            q.r_grid = r.clone();
        }
    }
    if let Some(k) = args.k_max {
        q.k_max = k;
    }
    if let Some(r) = args.r_small {
        q.r_small = r;
    }
    let report = quantization_report(&seq, &q)?;
    out.write_text("report.json", &(report.to_json()? + "\n"))?;
    out.write_with("points.csv", |w| report.write_points_csv(w))?;
    out.write_with("inventory.csv", |w| report.write_inventory_csv(w))?;
    out.write_with("necks.csv", |w| report.write_necks_csv(w))?;
    let tol = cfg.tolerances.quantization;
    let mut passed = true;
    let mut lines = vec![format!("{} concentration point(s) detected", report.points.len())];
    for p in &report.points {
        let ok = p.flags.is_empty() && p.ratio.is_some_and(|r| (r - p.n_hat as f64).abs() <= tol);
        passed &= ok;
        lines.push(format!(
            "x={:?}: N={} bubbles, Theta/Lambda0 = {}{}",
            p.center,
            p.n_hat,
            p.ratio.map_or("unstable".to_string(), |r| format!("{r:.6}")),
            if p.flags.is_empty() {
                String::new()
            } else {
                format!(" [{}]", p.flags.join("; "))
            }
        ));
    }
    let data = json!({
        "description": report.description,
        "sigma_points": report.sigma_points,
        "n_hat": report.n_hat,
        "ratios": report.ratios,
        "tolerance": tol,
    });
    Ok(summary("quantize", passed, lines, data))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConstantArgs {
    /// Radial nodes per piece; the value is taken at twice this.
    #[arg(long, default_value_t = 64)]
    pub nodes: usize,
}

pub(super) fn bubble_constant(cfg: &RunConfig, args: &ConstantArgs, out: &Output) -> Result<Summary> {
    let n = cfg.dimension;
    let c = BubbleConstant::with_nodes(n, args.nodes)?;
    let u: FieldRef = Arc::new(Bubble::standard(n)?);
    let region = Region::Whole {
        center: vec![0.0; n],
        truncation: cfg.truncation_radius,
    };
    let truncated = energy_in(&*u, &region, Density::Full, &energy_config(cfg))?;
    let passed = c.error_bound <= 1e-6 * c.value;
    let lines = vec![
        format!("Lambda0(n={n}) = {} +/- {:.1e}", c.value, c.error_bound),
        format!(
            "ball quadrature to R={}: {} with tail estimate {:.3e}",
            cfg.truncation_radius, truncated.value, truncated.tail_estimate
        ),
    ];
    let data = json!({ "constant": c, "truncated": truncated, "truncation_radius": cfg.truncation_radius });
    out.write_json("bubble_constant.json", &data)?;
    Ok(summary("bubble-constant", passed, lines, data))
}
