//! Argument parsing and command dispatch for the `stackgraph` binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 unreadable or malformed input,
//! 3 domain error (a cyclic hierarchy or a fusion conflict).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use stackgraph::io::IoError;
use stackgraph::sim::SimError;
use stackgraph::AdjacencyError;
use thiserror::Error;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "stackgraph", version, about = "Stacking-hierarchy inference, evaluation and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Safe-grasp probabilities, maximum entropy, moments and layering of one adjacency file.
    Inspect {
        file: PathBuf,
        /// Print the nonzero entries of the n-th matrix power.
        #[arg(long, value_name = "N")]
        moment: Option<usize>,
        /// Print the top-down layering of edges above this probability.
        #[arg(long, value_name = "T")]
        order_threshold: Option<f64>,
    },
    /// Fuse adjacency observations of the same objects into one posterior.
    Fuse {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Output file; the posterior goes to stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score prediction files against ground-truth files matched by name.
    Eval {
        #[arg(long, value_name = "DIR")]
        pred: PathBuf,
        #[arg(long, value_name = "DIR")]
        gt: PathBuf,
        /// Minimum IoU for a predicted box to match a ground-truth box.
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Ignore class labels.
        #[arg(long)]
        binary: bool,
        /// Comma-separated class names, in index order, for named ground-truth labels.
        #[arg(long, value_delimiter = ',')]
        class_names: Option<Vec<String>>,
        /// Do not count relationships between unmatched boxes as false positives.
        #[arg(long)]
        ignore_unmatched_edges: bool,
        /// Also write the report as JSON.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Run the bin-clearing simulator for both policies.
    Simulate {
        /// JSON config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `a..b`, `a..=b` or a comma list; overrides the config's seeds.
        #[arg(long)]
        seeds: Option<String>,
        /// Directory for benchmark.csv and episodes.jsonl.
        #[arg(long)]
        out: PathBuf,
        /// Run episodes on one thread.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Domain(_) => 3,
        }
    }
}

fn is_domain(e: &AdjacencyError) -> bool {
    matches!(e, AdjacencyError::Cycle(_) | AdjacencyError::FusionConflict { .. })
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match &e {
            IoError::Adjacency { source, .. } if is_domain(source) => CliError::Domain(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match commands::dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
