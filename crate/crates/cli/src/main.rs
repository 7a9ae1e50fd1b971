mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use config::{ExperimentConfig, EXPERIMENTS};
use experiments::Report;

const EXIT_TOLERANCE: u8 = 2;
const EXIT_INPUT: u8 = 1;

#[derive(Parser)]
#[command(name = "moilab", version, about = "Run multiple-operator-integral experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write `<stem>.csv` and `<stem>.json`.
    Run {
        config: PathBuf,
        /// Worker threads; 1 gives bit-reproducible output.
        #[arg(long, value_name = "K")]
        threads: Option<usize>,
        /// Output directory, overriding `output.dir` of the config.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Print the experiment names.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Check a config against the schema without running it.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> Result<(String, ExperimentConfig), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let cfg = config::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((text, cfg))
}

fn write_csv(path: &Path, report: &Report) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    w.write_record(&report.columns).map_err(|e| e.to_string())?;
    for row in &report.rows {
        w.write_record(row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

fn summary(text: &str, cfg: &ExperimentConfig, report: &Report, threads: usize, csv_name: &str) -> Value {
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    json!({
        "experiment": cfg.name(),
        "config": cfg,
        "config_digest": format!("sha256:{hex}"),
        "seed": cfg.seed(),
        "threads": threads,
        "versions": {"moilab": env!("CARGO_PKG_VERSION"), "moilab-core": moilab_core::VERSION},
        "csv": csv_name,
        "checks": report.checks.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        "fits": report.fits,
        "residuals": report.residuals,
        "passed": report.passed(),
    })
}

fn run(path: &Path, threads: Option<usize>, out: Option<PathBuf>) -> Result<bool, String> {
    let (text, cfg) = load(path)?;
    if let Some(k) = threads {
        if k == 0 {
            return Err("--threads must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| format!("cannot start thread pool: {e}"))?;
    }
    let report = experiments::run(&cfg).map_err(|e| format!("{} failed: {e}", cfg.name()))?;

    let dir = out.or_else(|| cfg.output().dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
    fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let stem = cfg.output().stem.clone().unwrap_or_else(|| cfg.name().to_string());
    let csv_name = format!("{stem}.csv");
    write_csv(&dir.join(&csv_name), &report)?;
    let json_path = dir.join(format!("{stem}.json"));
    let body = serde_json::to_string_pretty(&summary(&text, &cfg, &report, rayon::current_num_threads(), &csv_name))
        .map_err(|e| e.to_string())?;
    fs::write(&json_path, body + "\n").map_err(|e| format!("cannot write {}: {e}", json_path.display()))?;

    for c in &report.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        match c.target {
            Some(t) => println!("{tag} {}: {:e} (target {t:e} +- {:e})", c.name, c.value, c.tolerance),
            None => println!("{tag} {}: {:e} (tolerance {:e})", c.name, c.value, c.tolerance),
        }
    }
    println!("wrote {} and {}", dir.join(&csv_name).display(), json_path.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { json } => {
            if json {
                println!("{}", serde_json::to_string(&EXPERIMENTS).expect("static names"));
            } else {
                for name in EXPERIMENTS {
                    println!("{name}");
                }
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok((_, cfg)) => {
                println!("{}: valid {} config", config.display(), cfg.name());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_INPUT)
            }
        },
        Command::Run { config, threads, out } => match run(&config, threads, out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(EXIT_TOLERANCE),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_INPUT)
            }
        },
    }
}
