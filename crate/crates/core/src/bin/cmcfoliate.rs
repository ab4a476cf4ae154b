use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmc_foliate::cli::commands::{cmd_expand, cmd_foliate, cmd_leaf, cmd_moments, cmd_verify, ErrorRecord};
use cmc_foliate::cli::selftest::{parse_corruption, run_selftest};
use cmc_foliate::cli::{exit_code, load_context, Outcome};
use cmc_foliate::{Error, Result};

/// Free-boundary CMC hemisphere foliations near a boundary point.
#[derive(Parser)]
#[command(name = "cmcfoliate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON); defaults to a bump model in dimension 2.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized self-tests, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Inverse-metric coefficients at the centre point.
    Expand,
    /// Hemisphere moments and the reduced-map coefficient.
    Moments,
    /// A single leaf.
    Leaf {
        /// Leaf radius; defaults to the first radius of the grid.
        #[arg(long)]
        r: Option<f64>,
        /// Pins the boundary offset, e.g. `--tau 0.01,-0.02`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        tau: Option<Vec<f64>>,
    },
    /// Continuation over the configured radius grid.
    Foliate {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        tau: Option<Vec<f64>>,
    },
    /// Re-checks the leaves stored in the output directory.
    Verify,
    /// Runs the oracle suite.
    Selftest {
        #[arg(long, hide = true)]
        corrupt_coefficient: Option<String>,
    },
}

fn set_threads() -> Result<()> {
    let Ok(v) = std::env::var("CMC_THREADS") else { return Ok(()) };
    let count: usize =
        v.trim().parse().map_err(|_| Error::Configuration(format!("CMC_THREADS must be a positive integer, got {v:?}")))?;
    if count == 0 {
        return Err(Error::Configuration("CMC_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(count)
        .build_global()
        .map_err(|e| Error::Configuration(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<Outcome> {
    set_threads()?;
    let ctx = load_context(cli.config.as_deref(), cli.out, cli.seed)?;
    match cli.command {
        Command::Expand => cmd_expand(&ctx),
        Command::Moments => cmd_moments(&ctx),
        Command::Leaf { r, tau } => cmd_leaf(&ctx, r, tau.as_deref()),
        Command::Foliate { tau } => cmd_foliate(&ctx, tau.as_deref()),
        Command::Verify => cmd_verify(&ctx),
        Command::Selftest { corrupt_coefficient } => {
            let corrupt = corrupt_coefficient.as_deref().map(parse_corruption).transpose()?;
            let checks = run_selftest(&ctx.config, corrupt.as_ref())?;
            let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
            let mut lines: Vec<String> = checks
                .iter()
                .map(|c| format!("{:<width$}  {}  {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail))
                .collect();
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if !failed.is_empty() {
                lines.push(format!("failed: {}", failed.join(", ")));
            }
            Ok(Outcome { files: Vec::new(), status: if failed.is_empty() { 0 } else { 1 }, lines })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.status as u8)
        }
        Err(e) => {
            let record = ErrorRecord::from(&e);
            eprintln!("{}", serde_json::json!({ "error": record }));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
