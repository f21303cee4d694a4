use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kubo_cli::{
    parse_config_with_overrides, run_esm, run_exact, run_oracle, run_scan, run_verify, RunConfig,
    RunError,
};

#[derive(Debug, Parser)]
#[command(
    name = "kubo",
    version,
    about = "Kubo-transformed correlation functions by the external-source method"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run config file; defaults describe the unit harmonic oscillator.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file; overrides `output.path`. Stdout when neither is set.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Override a config value, applied before validation. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Direct eigen-sum Kubo correlator.
    Exact,
    /// Krishna-Voth correlator, its correction terms and the exact reconstruction.
    Esm,
    /// Closed-form harmonic references.
    Oracle,
    /// Error and timing over one parameter axis.
    Scan,
    /// Invariant suite; exits 4 on any failed check.
    Verify,
}

fn load(cli: &Cli) -> Result<RunConfig, RunError> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    Ok(parse_config_with_overrides(&text, &cli.set)?)
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), RunError> {
    match path {
        Some(path) => fs::write(path, text).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| RunError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn run(cli: &Cli) -> Result<(), RunError> {
    let cfg = load(cli)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
    let table = match cli.command {
        Command::Exact => run_exact(&cfg)?,
        Command::Esm => run_esm(&cfg)?,
        Command::Oracle => run_oracle(&cfg)?,
        Command::Scan => run_scan(&cfg.scan_config()?)?,
        Command::Verify => {
            let report = run_verify(&cfg)?;
            emit(&report.render(&cfg), out.as_deref())?;
            return match report.failures() {
                0 => Ok(()),
                failed => Err(RunError::VerifyFailed { failed }),
            };
        }
    };
    emit(&table.to_csv(cfg.output.precision), out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
