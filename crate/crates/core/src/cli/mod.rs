//! Command-line driver: one subcommand per experiment, CSV and JSON outputs.

mod commands;
mod config;
mod spec;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use commands::{ConstantArgs, LorentzArgs, MonotonicityArgs, NeckArgs, QuantizeArgs, ResidualArgs, SequenceArgs};
pub use config::{RunConfig, ThresholdSettings, ToleranceSettings};
pub use spec::{FieldArgs, FieldSpec};

use crate::error::{Error, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bubble-lab", version, about = "Bubbling and energy quantization experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dimension: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print nothing.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Print the summary as JSON.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// PDE residual of a field, optionally with a Pohozaev breakdown.
    Residual(ResidualArgs),
    /// Profile of the monotone quantity `r ↦ E(x, r)`.
    Monotonicity(MonotonicityArgs),
    /// Lorentz norms of sampled functions and duality trials.
    Lorentz(LorentzArgs),
    /// Neck energies around the finest bubble of a sequence.
    Neck(NeckArgs),
    /// Full detection, extraction and quantization report.
    Quantize(QuantizeArgs),
    /// The standard-bubble energy with its error bound.
    BubbleConstant(ConstantArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Residual(_) => "residual",
            Command::Monotonicity(_) => "monotonicity",
            Command::Lorentz(_) => "lorentz",
            Command::Neck(_) => "neck",
            Command::Quantize(_) => "quantize",
            Command::BubbleConstant(_) => "bubble-constant",
        }
    }
}

/// What a subcommand found.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: String,
    pub passed: bool,
    /// Human-readable lines.
    #[serde(skip)]
    pub lines: Vec<String>,
    pub data: serde_json::Value,
}

/// Files written by one run.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_with(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        self.write_with(name, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(name, e)))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// CSV from a header and stringified rows.
    pub fn write_rows(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        self.write_with(name, |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(header)?;
            for r in rows {
                c.write_record(r)?;
            }
            c.flush().map_err(|e| Error::io(name, e))
        })
    }
}

#[derive(Serialize)]
struct Echo<'a> {
    #[serde(flatten)]
    config: &'a RunConfig,
    command: &'a Command,
}

fn effective_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &global.out {
        cfg.out_dir = d.clone();
    }
    if let Some(n) = global.dimension {
        cfg.dimension = n;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(t) = global.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one parsed invocation and returns its summary.
pub fn execute(cli: &Cli) -> Result<Summary> {
    let cfg = effective_config(&cli.global)?;
    let out = Output::create(&cfg.out_dir)?;
    let echo = toml::to_string(&Echo {
        config: &cfg,
        command: &cli.command,
    })
    .map_err(|e| Error::Config(e.to_string()))?;
    out.write_text("effective-config.toml", &echo)?;
    let work = || match &cli.command {
        Command::Residual(a) => commands::residual(&cfg, a, &out),
        Command::Monotonicity(a) => commands::monotonicity(&cfg, a, &out),
        Command::Lorentz(a) => commands::lorentz(&cfg, a, &out),
        Command::Neck(a) => commands::neck(&cfg, a, &out),
        Command::Quantize(a) => commands::quantize(&cfg, a, &out),
        Command::BubbleConstant(a) => commands::bubble_constant(&cfg, a, &out),
    };
    let summary = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)?
    } else {
        work()?
    };
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::InvalidInput(_)
            | Error::InvalidDimension { .. }
            | Error::NonPositive { .. }
            | Error::NegativeFractionalPower { .. }
    )
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code: 0 pass, 1 tolerance failure or runtime error, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            if cli.global.json {
                match serde_json::to_string_pretty(&summary) {
                    Ok(s) => println!("{s}"),
                    Err(e) => eprintln!("error: {e}"),
                }
            } else if !cli.global.quiet {
                for line in &summary.lines {
                    println!("{line}");
                }
                println!("{}: {}", summary.command, if summary.passed { "PASS" } else { "FAIL" });
            }
            if summary.passed {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage(&e) {
                EXIT_USAGE
            } else {
                EXIT_FAIL
            }
        }
    }
}
