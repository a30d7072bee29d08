//! `lgc`: run lattice Gaussian coding experiments from a config file.

mod commands;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use lgc_core::LatticeError;
use serde_json::json;

use config::ExperimentConfig;

const AFTER_HELP: &str = "\
Config files hold one `key = value` per line; `#` starts a comment.
Commands: flatness, sample, simulate, sandwich, exponent, rate, ensemble.
SNR convention: when `snr` is given, sigma = 1 and sigma0 = sqrt(snr).
A single `<axis>_grid = v1, v2, ...` key (axis: sigma0, sigma, snr, mu,
volume) runs a sweep with one output row per grid value.

Exit codes: 0 success, 1 I/O failure, 2 configuration error,
3 numeric precondition failure (e.g. flatness factor not below 1).";

#[derive(Parser, Debug)]
#[command(name = "lgc", version, about = "Lattice Gaussian coding experiments", after_help = AFTER_HELP)]
struct Args {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials (overrides `trials`).
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "LGC_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn from_lattice(e: LatticeError) -> Self {
        match e {
            LatticeError::FlatnessTooLarge { .. }
            | LatticeError::InsufficientErrors { .. }
            | LatticeError::MuBelowOne(_)
            | LatticeError::BudgetExceeded(_)
            | LatticeError::DimensionTooLarge { .. }
            | LatticeError::RandomnessExhausted(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Numeric(m) => ("numeric", m),
            CliError::Io(m) => ("io", m),
        };
        write!(f, "{kind}: {}", msg.replace('\n', " "))
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn sidecar(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

fn run(args: &Args) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if cfg.trials == 0 {
        return Err(CliError::config("`trials` must be at least 1"));
    }
    let out = args
        .out
        .clone()
        .or(cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.command)));
    let threads = match args.threads {
        Some(0) => return Err(CliError::config("`--threads` must be at least 1")),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;

    let artifact = commands::execute(&cfg)?;
    let mut csv = artifact.header.clone();
    csv.push('\n');
    for r in &artifact.rows {
        csv.push_str(r);
        csv.push('\n');
    }
    write(&out, &csv)?;
    let mut outputs = vec![out.display().to_string()];
    for (ext, text) in &artifact.extras {
        let p = sidecar(&out, ext);
        write(&p, text)?;
        outputs.push(p.display().to_string());
    }
    let manifest = json!({
        "tool": "lgc",
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": lgc_core::VERSION,
        "command": cfg.command.to_string(),
        "config_path": args.config.display().to_string(),
        "config": cfg.raw,
        "effective": {
            "seed": cfg.seed,
            "stream": cfg.stream,
            "trials": cfg.trials,
            "threads": threads,
            "sweep": cfg.sweep.as_ref().map(|(a, v)| json!({"axis": a.key(), "values": v})),
        },
        "outputs": outputs,
        "rows": artifact.rows.len(),
        "finished_unix": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    write(
        &sidecar(&out, "manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
