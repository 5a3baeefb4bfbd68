use std::path::PathBuf;
use std::process::ExitCode;

use adagrad_core::bounds::TheoremId;
use adagrad_harness::config::{Check, ExperimentConfig};
use adagrad_harness::{output_root, presets, run_suite, HarnessError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adagrad", version, about = "Run AdaGrad-family experiment suites and check their envelopes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite from a TOML config (or a built-in preset with --preset).
    Run {
        /// Path to the config file, or a preset name with --preset.
        config: String,
        /// Treat CONFIG as a built-in preset name.
        #[arg(long)]
        preset: bool,
    },
    /// List the built-in presets.
    ListPresets,
    /// Describe an envelope or property check.
    Describe { id: String },
    /// Print a preset as an editable TOML config.
    ExportPreset { name: String },
}

fn load(config: &str, preset: bool) -> Result<ExperimentConfig, HarnessError> {
    if preset {
        presets::find(config)
            .map(|p| p.config())
            .ok_or_else(|| HarnessError::config("preset", format!("unknown preset `{config}`")))
    } else {
        ExperimentConfig::load(&PathBuf::from(config))
    }
}

fn run(config: &str, preset: bool) -> Result<i32, HarnessError> {
    let cfg = load(config, preset)?;
    let (outcome, dir) = run_suite(&cfg, &output_root())?;
    for v in &outcome.verdicts {
        println!(
            "{:<28} {}  value {:.6e}  threshold {:.6e}  {}",
            v.check,
            if v.passed { "PASS" } else { "FAIL" },
            v.value,
            v.threshold,
            v.detail
        );
    }
    for f in &outcome.failures {
        println!(
            "numeric failure: seed {} {} t {}: {}",
            f.seed.map_or("-".into(), |s| s.to_string()),
            f.stage,
            f.t.map_or("-".into(), |t| t.to_string()),
            f.reason
        );
    }
    println!("artifacts in {}", dir.display());
    Ok(outcome.status.exit_code())
}

fn describe(id: &str) -> Result<i32, HarnessError> {
    match Check::parse(id) {
        Some(Check::Theorem(t)) => {
            println!("{t}\n\n{}", t.describe());
            let algs: Vec<_> = t.compatible_algorithms().iter().map(|a| a.name()).collect();
            println!("\ncompatible algorithms: {}", algs.join(", "));
            Ok(0)
        }
        Some(Check::Property(p)) => {
            println!("{}\n\n{}", p.name(), p.describe());
            Ok(0)
        }
        None => {
            let known: Vec<_> = TheoremId::ALL.iter().map(|t| t.name()).collect();
            Err(HarnessError::config(
                "id",
                format!("unknown theorem id `{id}`; known ids: {}", known.join(", ")),
            ))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, preset } => run(&config, preset),
        Command::ListPresets => {
            for p in presets::PRESETS {
                println!("{:<26} {}", p.name, p.summary);
            }
            Ok(0)
        }
        Command::Describe { id } => describe(&id),
        Command::ExportPreset { name } => load(&name, true).map(|c| {
            print!("{}", c.to_toml_string());
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
