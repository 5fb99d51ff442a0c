//! Acceptance checks. Each criterion prints one line:
//! `PASS|FAIL  [id] name  measured vs tolerance  (runtime)`.
//! The process exits non-zero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bubble_lab::concentration::{
    make_sequence, neck_energy, quantization_report, scaled_measure, BubbleConstant, BubbleSpec, EnergyConfig,
    QuantizeConfig, ScaleSchedule,
};
use bubble_lab::fields::{aubin_talenti, pde_residual, pohozaev_residual, FieldRef, FnField, ScalarField, Step};
use bubble_lab::grid::{unit_ball_volume, QuadConfig, RadialGrid};
use bubble_lab::lorentz::{
    duality_product_check, lorentz_norm, power_rule_check, rearrange, tail_decay_check, LorentzIndex, SampledFunction,
};
use bubble_lab::monotonicity::{check_monotone, check_positive, profile, Formulation, MonotonicityConfig};

type Outcome = Result<(bool, String), bubble_lab::Error>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn random_point<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            return x;
        }
    }
}

fn exact_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for n in 3..=6 {
        let u = aubin_talenti(n, 1.0, &vec![0.0; n])?;
        for _ in 0..200 {
            let x = random_point(&mut rng, n, 5.0);
            worst = worst.max(pde_residual(&u, &x, Step::default()).abs());
        }
    }
    let mut min_order = f64::INFINITY;
    for n in 3..=6 {
        let exact = aubin_talenti(n, 1.0, &vec![0.0; n])?;
        let numeric = FnField::new(n, move |x| exact.value(x))?;
        let x: Vec<f64> = (0..n).map(|i| 0.4 - 0.25 * i as f64).collect();
        let errs: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&h| pde_residual(&numeric, &x, Step::Absolute(h)).abs())
            .collect();
        for w in errs.windows(2) {
            min_order = min_order.min((w[0] / w[1]).log2());
        }
    }
    Ok((
        worst < 1e-10 && min_order >= 1.8,
        format!("sup|residual| = {worst:.2e} < 1e-10, min FD order = {min_order:.3} >= 1.8"),
    ))
}

fn monotonicity() -> Outcome {
    let grid = RadialGrid::log_spaced(0.05, 5.0, 40)?;
    let cfg = MonotonicityConfig::default();
    let mut worst_drop = 0.0f64;
    let mut ok = true;
    let mut cases = 0;
    for (n, delta) in [(3, 0.5), (3, 1.0), (4, 0.5), (4, 1.0), (5, 1.0)] {
        let u = aubin_talenti(n, delta, &vec![0.0; n])?;
        let probes: Vec<Vec<f64>> = [0.0, 0.3, 0.7, 1.5, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let mut c = vec![0.0; n];
                c[i % n] = d;
                c[(i + 1) % n] += 0.5 * d;
                c
            })
            .collect();
        for c in &probes {
            let p = profile(&u, c, &grid, &cfg)?;
            let closed = p.values_for(Formulation::Closed);
            let scale = closed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for w in closed.windows(2) {
                worst_drop = worst_drop.max((w[0] - w[1]) / scale);
            }
            ok &= check_monotone(&p, Some(1e-6 * scale)).passed() && check_positive(&p, Some(1e-6 * scale)).passed();
            cases += 1;
        }
    }
    Ok((
        ok,
        format!("{cases} profiles nonnegative and nondecreasing, worst relative drop {worst_drop:.2e} <= 1e-6"),
    ))
}

fn pohozaev() -> Outcome {
    let mut worst = 0.0f64;
    let mut table = String::new();
    for n in [3, 4] {
        let u = aubin_talenti(n, 1.0, &vec![0.0; n])?;
        for r in [0.5, 1.0, 2.0] {
            let rep = pohozaev_residual(&u, &vec![0.0; n], r, &QuadConfig::default())?;
            worst = worst.max(rep.relative);
            table.push_str(&format!(
                "\n        n={n} r={r:<3}  derived imbalance {:>9.2e}   variant imbalance {:>10.4}",
                rep.residual, rep.variant_residual
            ));
        }
    }
    Ok((worst < 1e-6, format!("max relative residual {worst:.2e} < 1e-6{table}")))
}

fn dyadic_function<R: Rng>(rng: &mut R, len: usize, signed: bool) -> SampledFunction {
    // measures are multiples of 2^-10 so every partial sum is exact
    let values = (0..len)
        .map(|_| {
            let v = (rng.gen_range(0..40) as f64) * 0.25;
            if signed && rng.gen_bool(0.5) {
                -v
            } else {
                v
            }
        })
        .collect();
    let measures = (0..len).map(|_| rng.gen_range(1..=1024) as f64 / 1024.0).collect();
    SampledFunction::new(values, measures).expect("valid samples")
}

fn lorentz() -> Outcome {
    let mut weak_err = 0.0f64;
    for n in 3..=5 {
        let f = SampledFunction::radial_power(n, n as f64 / 2.0, 1e-6, 1.0, 100_000)?;
        let weak = lorentz_norm(&rearrange(&f), LorentzIndex::weak(2.0)?);
        weak_err = weak_err.max((weak / unit_ball_volume(n).sqrt() - 1.0).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut exact = 0;
    for trial in 0..1000 {
        let len = rng.gen_range(1..200);
        let signed = trial % 2 == 0;
        let f = dyadic_function(&mut rng, len, signed);
        let t = rearrange(&f);
        let levels_ok = f
            .values()
            .iter()
            .all(|v| f.distribution(v.abs()) == t.distribution(v.abs()))
            && f.distribution(-1.0) == t.distribution(-1.0);
        let alpha = if signed { 3.0 } else { 1.5 };
        let rule = power_rule_check(&f, alpha, LorentzIndex::finite(2.0, 1.0)?)?;
        if levels_ok && rule.rearrangement_commutes {
            exact += 1;
        }
    }
    let mut dual = 0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..300);
        let measures: Vec<f64> = (0..len).map(|_| rng.gen_range(1e-3..1.0)).collect();
        let fv = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let gv = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let d = duality_product_check(
            &SampledFunction::new(fv, measures.clone())?,
            &SampledFunction::new(gv, measures)?,
        )?;
        if d.holds() {
            dual += 1;
        }
    }
    Ok((
        weak_err < 0.02 && exact == 1000 && dual == 1000,
        format!("weak-L2 rel err {weak_err:.2e} < 2e-2, exact rearrangement {exact}/1000, duality {dual}/1000"),
    ))
}

fn tail_bridge() -> Outcome {
    let mut worst = 0.0f64;
    for n in [3, 4, 5] {
        for delta in [1e-2, 1e-3] {
            let u = aubin_talenti(n, delta, &vec![0.0; n])?;
            let t = tail_decay_check(&u, &vec![0.0; n], 10.0 * delta, 1.0, Step::default())?;
            worst = worst.max(t.weak_norm / t.decay_bound);
        }
    }
    Ok((
        worst <= 1.05,
        format!("max weak norm / (sqrt(omega_n) sup |x|^(n/2)|grad u|) = {worst:.4} <= 1.05"),
    ))
}

fn no_neck() -> Outcome {
    let n = 3;
    let seq = make_sequence(
        n,
        vec![BubbleSpec {
            center: vec![0.0; n],
            schedule: ScaleSchedule::Explicit {
                scales: vec![1e-2, 1e-3],
            },
            weight: 1.0,
        }],
        None,
        "single bubble",
    )?;
    let lambda0 = BubbleConstant::compute(n)?.value;
    let cfg = EnergyConfig::default();
    let necks: Vec<f64> = [10.0, 30.0, 100.0]
        .iter()
        .map(|&r| neck_energy(&seq, 2, r, 0.5, &cfg).map(|e| e.total / lambda0))
        .collect::<Result<_, _>>()?;
    let decreasing = necks.windows(2).all(|w| w[1] < w[0]);
    Ok((
        necks[2] < 0.01 && decreasing,
        format!(
            "neck/Lambda0 at R=10,30,100: {:.4}, {:.4}, {:.5} (< 0.01 at R=100, decreasing: {decreasing})",
            necks[0], necks[1], necks[2]
        ),
    ))
}

fn quantization() -> Outcome {
    let bases = [[4.0, 16.0, 64.0], [2.0, 8.0, 32.0], [8.0, 64.0, 512.0]];
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    let mut cases = 0;
    for n in 3..=5 {
        for schedule in &bases {
            for count in 1..=3 {
                let specs = schedule[..count]
                    .iter()
                    .map(|&b| BubbleSpec::geometric(&vec![0.0; n], b))
                    .collect();
                let seq = make_sequence(n, specs, None, "tower")?;
                let report = quantization_report(&seq, &QuantizeConfig::default())?;
                counts_ok &= report.n_hat == vec![count];
                match report.ratios.first().copied().flatten() {
                    Some(r) => worst = worst.max((r - count as f64).abs()),
                    None => counts_ok = false,
                }
                cases += 1;
            }
        }
    }
    let mut drift = 0.0f64;
    for n in 3..=5 {
        let a = BubbleConstant::with_nodes(n, 64)?.value;
        let b = BubbleConstant::with_nodes(n, 128)?.value;
        drift = drift.max((a / b - 1.0).abs());
    }
    Ok((
        counts_ok && worst <= 0.05 && drift < 1e-6,
        format!(
            "{cases} towers: N-hat = N {counts_ok}, max |Theta/Lambda0 - N| = {worst:.4} <= 0.05, Lambda0 drift {drift:.1e} < 1e-6"
        ),
    ))
}

fn scaled_measure_constancy() -> Outcome {
    let cfg = EnergyConfig::default();
    let mut worst = 0.0f64;
    for n in 3..=5 {
        for delta in [1e-2, 1e-3] {
            let u: FieldRef = Arc::new(aubin_talenti(n, delta, &vec![0.0; n])?);
            let product = 5.0 * delta;
            let values: Vec<f64> = [1.0, 2.0, 4.0]
                .iter()
                .map(|&r| scaled_measure(&u, &vec![0.0; n], product / r, r, &cfg))
                .collect::<Result<_, _>>()?;
            for v in &values {
                worst = worst.max((v / values[0] - 1.0).abs());
            }
        }
    }
    Ok((
        worst < 1e-8,
        format!("max relative spread over r in [1, 4] = {worst:.2e} < 1e-8"),
    ))
}

fn run_cli(out: &Path, threads: usize, args: &[&str]) -> Result<(), bubble_lab::Error> {
    let status = Command::new(env!("CARGO_BIN_EXE_bubble-lab"))
        .args(["--quiet", "--seed", "7", "--threads", &threads.to_string(), "--out"])
        .arg(out)
        .args(args)
        .status()
        .map_err(|e| bubble_lab::Error::InvalidInput(e.to_string()))?;
    if status.code() != Some(0) {
        return Err(bubble_lab::Error::InvalidInput(format!(
            "{args:?} exited with {status}"
        )));
    }
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| bubble_lab::Error::InvalidInput(e.to_string()))?;
    let commands: [&[&str]; 4] = [
        &["residual", "--bubble", "n=4", "--points", "100"],
        &["monotonicity", "--bubble", "n=3", "delta=0.5", "--points", "12"],
        &[
            "lorentz",
            "--analytic",
            "inv-sqrt-n",
            "--cells",
            "20000",
            "--trials",
            "50",
        ],
        &["quantize", "--dimension", "3", "--k-max", "8"],
    ];
    let mut compared = 0;
    let mut identical = true;
    for (ci, args) in commands.iter().enumerate() {
        let mut runs = Vec::new();
        for (ri, threads) in [1, 2, 4, 1].into_iter().enumerate() {
            let out = dir.path().join(format!("c{ci}-r{ri}"));
            run_cli(&out, threads, args)?;
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
                .map_err(|e| bubble_lab::Error::InvalidInput(e.to_string()))?
                .filter_map(|e| e.ok())
                .map(|e| {
                    let name = e.file_name().to_string_lossy().into_owned();
                    (name, std::fs::read(e.path()).unwrap_or_default())
                })
                .collect();
            files.sort();
            runs.push(files);
        }
        compared += runs[0].len();
        identical &= runs.iter().all(|r| *r == runs[0]);
    }
    Ok((
        identical,
        format!("{compared} output files byte-identical across threads 1, 2, 4 and a repeat: {identical}"),
    ))
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "exact-solution residual",
            budget: Some(Duration::from_secs(10)),
            run: exact_residual,
        },
        Criterion {
            id: 2,
            name: "monotonicity",
            budget: Some(Duration::from_secs(60)),
            run: monotonicity,
        },
        Criterion {
            id: 3,
            name: "pohozaev balance",
            budget: None,
            run: pohozaev,
        },
        Criterion {
            id: 4,
            name: "lorentz calculus",
            budget: Some(Duration::from_secs(30)),
            run: lorentz,
        },
        Criterion {
            id: 5,
            name: "tail / weak-L2 bridge",
            budget: None,
            run: tail_bridge,
        },
        Criterion {
            id: 6,
            name: "no neck energy",
            budget: None,
            run: no_neck,
        },
        Criterion {
            id: 7,
            name: "quantization",
            budget: Some(Duration::from_secs(300)),
            run: quantization,
        },
        Criterion {
            id: 8,
            name: "scaled-measure constancy",
            budget: None,
            run: scaled_measure_constancy,
        },
        Criterion {
            id: 9,
            name: "determinism",
            budget: None,
            run: determinism,
        },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = c.budget.is_none_or(|b| elapsed <= b);
        let budget = c.budget.map_or(String::new(), |b| format!(" / {}s", b.as_secs()));
        let (passed, detail) = match outcome {
            Ok((p, d)) => (p && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "{}  [{}] {:<26} {}  ({:.1}s{budget})",
            if passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
