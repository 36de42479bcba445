//! The `pcb` command line: synthetic data, training runs and sweeps,
//! result tables and token attributions.
//!
//! Every command either succeeds with exit code 0 or prints one JSON line
//! `{"category": ..., "message": ...}` to stderr and exits 1.

pub mod args;
pub mod artifacts;
pub mod commands;

use std::path::PathBuf;

pub use args::{Cli, Command};
pub use artifacts::{Checkpoint, RunManifest, TrainConfig};

/// Environment variable holding the default output root.
pub const OUTPUT_ROOT_ENV: &str = "PCB_OUTPUT_ROOT";

/// `$PCB_OUTPUT_ROOT`, or `pcb-output` in the working directory.
pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("pcb-output"))
}

/// Machine-readable error line for stderr.
pub fn error_json(err: &pcb_core::Error) -> String {
    serde_json::json!({ "category": err.category(), "message": err.to_string() }).to_string()
}

/// Runs a parsed command line, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> pcb_core::Result<()> {
    match cli.command {
        Command::Synth(a) => commands::synth(&a, out),
        Command::Train(a) => commands::train(&a, out),
        Command::Report(a) => commands::report(&a, out),
        Command::Attribute(a) => commands::attribute(&a, out),
    }
}
