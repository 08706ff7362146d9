use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use spinpic_cli::{parse_config, run, Resume, RunError, RunOptions};

/// Run a spin particle-in-cell simulation from a TOML configuration.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for particle loops. Results do not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Continue from a checkpoint file, or from the latest checkpoint in
    /// the output directory when no file is given.
    #[arg(long, value_name = "CHECKPOINT", num_args = 0..=1)]
    resume: Option<Option<PathBuf>>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

fn execute(args: &Args) -> Result<(), RunError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| RunError::Io(format!("{}: {e}", args.config.display())))?;
    let cfg = parse_config(&text)?;
    let out_dir = match (&args.out, &cfg.directory) {
        (Some(out), _) => out.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => {
            return Err(RunError::Config(spinpic_cli::ConfigError {
                field: Some("output.directory".into()),
                line: None,
                message: "no output directory; pass --out or set output.directory".into(),
            }))
        }
    };
    let opts = RunOptions { out_dir, workers: args.workers.max(1), resume: args.resume.clone().map(|r| r.map_or(Resume::Latest, Resume::File)), quiet: args.quiet };
    let summary = run(&cfg, &opts)?;
    if !args.quiet {
        println!(
            "done: {} steps, {} rows, final rel_energy_err={:e}",
            summary.steps, summary.rows, summary.final_record.rel_energy_err
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
