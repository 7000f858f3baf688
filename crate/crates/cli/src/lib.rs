//! Batch driver: `quadrica <pipeline> --config <file> [--out <dir>] [--seed <u64>]`.
//!
//! Every pipeline writes `<out>/report.json`. Exit status is 0 when every
//! residual is within its threshold, 2 on a breach, 1 on a numerical error
//! and 64 on a usage or schema error.

pub mod config;
pub mod export;
pub mod pipelines;
pub mod thresholds;

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;

use quadrica_core::ResidualReport;

pub use config::{Pipeline, RunConfig};
use thresholds::{Thresholds, DEFAULT_ORDER_CONSTANT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BREACH: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] quadrica_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_ERROR,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "quadrica", version, about = "Deformations of quadrics: verification suites, seeds, Backlund leaves")]
pub struct Args {
    /// One of sjcheck, confocal-verify, ivory-verify, lmap-verify, deform, backlund, bpt.
    pub pipeline: String,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub pipeline: String,
    pub seed: u64,
    pub passed: bool,
    pub order_constant: f64,
    pub reports: Vec<ResidualReport>,
}

pub struct Outcome {
    pub report: RunReport,
    pub out: PathBuf,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            EXIT_OK
        } else {
            EXIT_BREACH
        }
    }
}

/// Cap rayon's global pool from `QUADRICA_THREADS`.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QUADRICA_THREADS") else { return Ok(()) };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Usage(format!("QUADRICA_THREADS must be a positive integer, got {v:?}")))?;
    // A pool built earlier in the same process keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(pipeline: Pipeline, mut cfg: RunConfig, out: &Path) -> Result<Outcome, CliError> {
    if let Some(p) = cfg.pipeline {
        if p != pipeline {
            return Err(CliError::Usage(format!("config is for {} but {} was requested", p.name(), pipeline.name())));
        }
    }
    cfg.pipeline = Some(pipeline);
    cfg.validate()?;
    let mut reports = match pipeline {
        Pipeline::Sjcheck => pipelines::sjcheck(&cfg)?,
        Pipeline::ConfocalVerify => pipelines::confocal_verify(&cfg)?,
        Pipeline::IvoryVerify => pipelines::ivory_verify(&cfg)?,
        Pipeline::LmapVerify => pipelines::lmap_verify(&cfg)?,
        Pipeline::Deform => pipelines::deform(&cfg, out)?,
        Pipeline::Backlund => pipelines::backlund(&cfg, out)?,
        Pipeline::Bpt => pipelines::bpt(&cfg, out)?,
    };
    let order_constant = cfg.order_constant.unwrap_or(DEFAULT_ORDER_CONSTANT);
    let th = Thresholds { overrides: &cfg.thresholds, order_constant };
    for r in &mut reports {
        th.apply(r);
    }
    let report = RunReport {
        pipeline: pipeline.name().into(),
        seed: cfg.seed(),
        passed: reports.iter().all(|r| r.passes()),
        order_constant,
        reports,
    };
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(quadrica_core::Error::from)?;
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(Outcome { report, out: out.to_path_buf() })
}

/// Parse arguments, run, print a summary and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&args) {
        Ok(o) => {
            for r in &o.report.reports {
                for e in r.entries.iter().filter(|e| !e.passes()) {
                    eprintln!("breach: {}.{} = {:.3e} > {:.3e}", r.suite, e.name, e.max, e.threshold.unwrap_or(f64::NAN));
                }
            }
            println!(
                "{}: {} ({})",
                o.report.pipeline,
                if o.report.passed { "pass" } else { "threshold breach" },
                o.out.join("report.json").display()
            );
            o.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(args: &Args) -> Result<Outcome, CliError> {
    let pipeline = Pipeline::parse(&args.pipeline).ok_or_else(|| {
        let names: Vec<_> = Pipeline::ALL.iter().map(|p| p.name()).collect();
        CliError::Usage(format!("unknown pipeline {:?}; expected one of {}", args.pipeline, names.join(", ")))
    })?;
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    init_threads()?;
    let out = args.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("quadrica-out"));
    run(pipeline, cfg, &out)
}
