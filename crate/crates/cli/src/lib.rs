//! Command-line front end for the cross-lingual sentence-embedding
//! pipeline. Subcommand logic lives here so integration tests can call
//! it in-process.

pub mod commands;
pub mod config;

use xling_core::CoreError;

/// Process exit codes: 0 success, 1 usage/config, 2 data, 3 numerics.
pub fn exit_code(err: &CoreError) -> i32 {
    match err {
        CoreError::Config(_) => 1,
        CoreError::Io { .. }
        | CoreError::MalformedRecord { .. }
        | CoreError::EmptyInput(_)
        | CoreError::Misaligned(_)
        | CoreError::ModelFormat(_) => 2,
        CoreError::ShapeMismatch(_)
        | CoreError::ZeroNorm(_)
        | CoreError::Degenerate(_)
        | CoreError::NonFiniteLoss { .. } => 3,
    }
}
