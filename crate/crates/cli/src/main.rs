//! `rmps`: run random-MPS ensemble experiments and write CSV plus a JSON
//! manifest.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rmps_core::ensemble::Control;
use rmps_core::experiments::{config_hash, exit_code, run_in_pool, ConfigDocument, RunManifest, ALL_EXPERIMENTS};

const EXIT_CONFIG: u8 = 2;
const EXIT_INTERRUPTED: u8 = 130;

#[derive(Parser)]
#[command(name = "rmps", version, about = "Random matrix product state ensemble experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(RunArgs),
    /// List the experiment catalog.
    List {
        /// Print the catalog with default configs as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat JSON config; may name the experiment with an "experiment" key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override a config key, e.g. `--set samples=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "RMPS_WORKERS")]
    workers: Option<usize>,
    /// Experiment name, overriding the config; see `rmps list`.
    #[arg(long)]
    experiment: Option<String>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn config_failure(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn list(json: bool) -> ExitCode {
    if json {
        let catalog: Vec<_> = ALL_EXPERIMENTS
            .iter()
            .map(|k| {
                serde_json::json!({
                    "name": k.name(),
                    "description": k.description(),
                    "columns": k.columns(),
                    "default_config": k.default_config(),
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&catalog).expect("catalog serializes"));
    } else {
        for k in ALL_EXPERIMENTS {
            println!("{:<24} {}", k.name(), k.description());
        }
    }
    ExitCode::SUCCESS
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn run(args: RunArgs) -> ExitCode {
    let doc = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match ConfigDocument::parse(&text) {
                Ok(d) => d,
                Err(e) => return config_failure(e),
            },
            Err(e) => return config_failure(format!("cannot read {}: {e}", path.display())),
        },
        None => ConfigDocument::default(),
    };
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("master_seed={seed}"));
    }
    if let Some(name) = &args.experiment {
        overrides.push(format!("experiment={}", serde_json::Value::String(name.clone())));
    }
    let doc = match doc.with_overrides(&overrides) {
        Ok(d) => d,
        Err(e) => return config_failure(e),
    };
    let Some(kind) = doc.experiment else {
        return config_failure("no experiment selected; pass --experiment or set \"experiment\" in the config");
    };
    let cfg = match doc.resolve(kind) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return config_failure("invalid config: workers = 0: need at least one worker");
    }

    let control = Control::new();
    let handler_control = control.clone();
    if let Err(e) = ctrlc::set_handler(move || handler_control.cancel()) {
        eprintln!("warning: interrupt handler unavailable: {e}");
    }

    let output = match run_in_pool(workers, kind, &cfg, &control) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };

    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return config_failure(format!("cannot create {}: {e}", args.out.display()));
    }
    let csv_path = args.out.join(format!("{}.csv", kind.name()));
    let manifest_path = args.out.join("manifest.json");
    let manifest = RunManifest {
        experiment: kind,
        config_hash: config_hash(kind, &cfg),
        master_seed: cfg.master_seed,
        artifacts: vec![csv_path.display().to_string(), manifest_path.display().to_string()],
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        grid_wall_seconds: output.timings.clone(),
        interrupted: output.interrupted,
        summary: output.summary.clone(),
        config: cfg,
    };
    let manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    if let Err(e) = write_file(&csv_path, &output.csv).and_then(|_| write_file(&manifest_path, &manifest_text)) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    if output.interrupted {
        eprintln!("interrupted: wrote {} completed rows", output.rows);
        return ExitCode::from(EXIT_INTERRUPTED);
    }
    eprintln!("{}: {} rows -> {}", kind, output.rows, csv_path.display());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args),
        Command::List { json } => list(json),
    }
}
