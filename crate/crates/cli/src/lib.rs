//! Command-line front-end for `gsd-tail`: subcommands, experiment runners and
//! report encoding.

pub mod commands;
pub mod experiments;
pub mod report;

use std::path::Path;

pub use commands::{run, Cli};
pub use experiments::{run_example1, run_example2, Example1Config, Example2Config};
pub use report::{report_emit, ExperimentReport, Format, ReportRow};

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Bad arguments, unreadable input, violated preconditions.
pub const EXIT_ARGUMENT: i32 = 2;
/// Numerical degeneracy.
pub const EXIT_DEGENERATE: i32 = 3;
/// Accuracy failures and backend disagreement.
pub const EXIT_ACCURACY: i32 = 4;

pub fn exit_code_for(err: &gsd_tail::Error) -> i32 {
    use gsd_tail::Error::*;
    match err {
        Argument(_) | Invariant { .. } | Contract(_) | Unsupported(_) | OutOfDomain(_) => EXIT_ARGUMENT,
        Degenerate { .. } | Ambiguous(_) | Matrix(_) | Diverged(_) => EXIT_DEGENERATE,
        Accuracy(_) | InsufficientSamples { .. } | OracleFailure(_) => EXIT_ACCURACY,
    }
}

/// Library errors map by kind; anything else (I/O, JSON, parsing) is an
/// argument error.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    err.chain()
        .find_map(|e| e.downcast_ref::<gsd_tail::Error>())
        .map(exit_code_for)
        .unwrap_or(EXIT_ARGUMENT)
}

/// Parse `arg` as JSON when it starts with `{` or `[`, otherwise read it as a
/// file path.
pub fn load_json_arg(arg: &str) -> anyhow::Result<serde_json::Value> {
    let trimmed = arg.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        arg.to_string()
    } else {
        std::fs::read_to_string(Path::new(arg)).map_err(|e| anyhow::anyhow!("cannot read {arg}: {e}"))?
    };
    serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("invalid JSON in {}: {e}", short(arg)))
}

fn short(arg: &str) -> String {
    if arg.len() > 40 {
        format!("{}…", &arg[..arg.char_indices().nth(40).map(|(i, _)| i).unwrap_or(arg.len())])
    } else {
        arg.to_string()
    }
}
