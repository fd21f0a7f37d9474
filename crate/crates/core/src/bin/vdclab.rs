use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vdclab::harness::{self, ExperimentConfig, RunMode, CSV_COLUMNS};

#[derive(Parser, Debug)]
#[command(name = "vdclab", version, about = "Integral points on affine complete intersections", after_help = CSV_COLUMNS)]
struct Cli {
    /// count | ffpoints | singdim | expsum | audit | select-primes |
    /// hooley-sweep | katz-sweep | thm2-sweep | weighted
    mode: String,
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Max points any single enumeration may visit
    #[arg(long)]
    budget: Option<u64>,
    /// Output directory (default: the config's `out`, else `out/<mode>`)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> vdclab::Result<bool> {
    let mode: RunMode = cli.mode.parse()?;
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if !cfg.mode.is_empty() && cfg.mode != mode.name() {
        log::warn!("config says mode {}, running {}", cfg.mode, mode);
    }
    cfg.mode = mode.name().to_string();
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.budget.is_some() {
        cfg.budget = cli.budget;
    }
    let out = cli
        .out
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(mode.name()));
    let output = harness::run(&cfg)?;
    let files = output.write(&out)?;
    print!("{}", output.summary);
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(output.report.passed())
}
