use std::path::PathBuf;
use std::process::ExitCode;

use centaur_cli::{cmd_gradcheck, cmd_run, cmd_serve, cmd_sweep, format_gradcheck, gradcheck_status, CliError};
use clap::{Parser, Subcommand};

/// Human-algorithm centaur experiments.
#[derive(Debug, Parser)]
#[command(name = "centaur", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment; writes report.json, summary.csv and manifest.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one constraint knob; additionally writes frontier.csv.
    Sweep {
        config: PathBuf,
        /// lambda, beta, importance_cap or c1.
        #[arg(long)]
        knob: String,
        /// Comma-separated ascending values.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every analytic gradient against finite differences.
    Gradcheck,
    /// Serve the live session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Config used when a session is created with an empty body.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory of append-only session logs.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("error: {err}");
    err.exit_code()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out).map(|dir| println!("wrote {}", dir.display())),
        Command::Sweep { config, knob, grid, out } => {
            cmd_sweep(&config, &knob, &grid, out).map(|dir| println!("wrote {}", dir.display()))
        }
        Command::Gradcheck => cmd_gradcheck(None).and_then(|summary| {
            print!("{}", format_gradcheck(&summary));
            gradcheck_status(&summary)
        }),
        Command::Serve { bind, config, log_dir } => {
            tracing_subscriber::fmt().with_target(false).init();
            cmd_serve(&bind, config.as_deref(), log_dir)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
