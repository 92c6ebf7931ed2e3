//! `mlfsm` command-line front end.
//!
//! Exit status: 0 success, 1 validation, audit or script-assertion failure,
//! 2 usage error (bad arguments, missing or malformed input files),
//! 3 internal error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "mlfsm", version, about = "Multi-level FSM contract toolchain")]
struct Cli {
    /// Treat warnings as errors.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a spec against its packages.
    Validate {
        spec: PathBuf,
        #[arg(long, value_name = "DIR")]
        packages: Option<PathBuf>,
        /// Print a JSON report on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Render the clause dependency graph as DOT.
    Graph {
        spec: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        dot: Option<PathBuf>,
        /// Expand one clause into its states and transitions.
        #[arg(long, value_name = "CLAUSE")]
        focus: Option<String>,
    },
    /// Generate Solidity units and a deployment manifest.
    Gen {
        spec: PathBuf,
        #[arg(long, value_name = "DIR")]
        packages: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run a scripted scenario through the interpreter.
    Simulate {
        spec: PathBuf,
        #[arg(long, value_name = "DIR")]
        packages: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        script: PathBuf,
        /// JSON-lines trace output (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
    },
    /// Lint a spec file or a directory of Solidity sources.
    Audit {
        target: PathBuf,
        #[arg(long, value_name = "DIR")]
        packages: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = output::Output::from_env();
    let strict = cli.strict;
    let result = match cli.command {
        Command::Validate {
            spec,
            packages,
            json,
        } => commands::validate(&out, strict, &spec, packages.as_deref(), json),
        Command::Graph { spec, dot, focus } => {
            commands::graph(&out, &spec, dot.as_deref(), focus.as_deref())
        }
        Command::Gen {
            spec,
            packages,
            out: dir,
        } => commands::gen(&out, strict, &spec, packages.as_deref(), &dir),
        Command::Simulate {
            spec,
            packages,
            script,
            trace,
        } => commands::simulate(&out, &spec, packages.as_deref(), &script, trace.as_deref()),
        Command::Audit {
            target,
            packages,
            json,
        } => commands::audit(&out, strict, &target, packages.as_deref(), json),
    };
    let code = match result {
        Ok(commands::Outcome::Success) => 0,
        Ok(commands::Outcome::Failed) => 1,
        Err(commands::Failure::Usage(msg)) => {
            out.error(&msg);
            2
        }
        Err(commands::Failure::Internal(msg)) => {
            out.error(&format!("internal: {msg}"));
            3
        }
    };
    ExitCode::from(code)
}
