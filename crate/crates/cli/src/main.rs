use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use ncham::config::COMMON_KEYS;
use ncham::{run, CliError, Experiment, ExperimentConfig, USAGE};

#[derive(Parser)]
#[command(name = "ncham", version, about = "Quantum/classical correspondence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a key=value config file.
    Run {
        config: PathBuf,
        /// Override a config entry; may be repeated.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides `output_dir`).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// List experiments and their parameters.
    List,
}

fn list() {
    println!("common keys: {}", COMMON_KEYS.join(", "));
    for e in Experiment::ALL {
        println!("\n{}\n  {}", e.name(), e.description());
        for p in e.params() {
            println!("  {} = {}  ({}; {})", p.key, p.default, p.doc, p.kind);
        }
    }
}

fn run_command(config: PathBuf, set: Vec<String>, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&config).map_err(|source| CliError::Read { path: config, source })?;
    let mut cfg = ExperimentConfig::parse(&text, &set)?;
    if let Some(dir) = out {
        cfg = cfg.with_output_dir(dir);
    }
    let outcome = run(&cfg)?;
    println!("wrote {} tables to {}", outcome.tables.len(), outcome.dir.display());
    for (k, v) in &outcome.summary {
        println!("  {k} = {v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("{USAGE}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::List => {
            list();
            Ok(())
        }
        Command::Run { config, set, out } => run_command(config, set, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
