//! Front end for the `ymlab` binary: settings resolution, the commands, and
//! run manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod profile;
pub mod suites;

use std::fmt;

pub use commands::{execute, replay, Command};
pub use config::Settings;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, keys or values, unreadable inputs, or a busy output directory.
    Config(String),
    /// Quadrature, optimiser or finite-difference failure.
    Numeric(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn io(e: std::io::Error) -> Self {
        Self::Io(e)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io(_) => exit::CONFIG,
            Self::Numeric(_) => exit::NUMERIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Numeric(m) => write!(f, "numerical failure: {m}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ymlab::Error> for CliError {
    fn from(e: ymlab::Error) -> Self {
        use ymlab::Error as E;
        match e {
            E::Argument(_) | E::UnsupportedDimension(_) | E::Csv(_) => Self::Config(e.to_string()),
            E::Io(io) => Self::Io(io),
            E::Tolerance { .. }
            | E::Accuracy(_)
            | E::NonConvergence(_)
            | E::NotSoliton(_)
            | E::Domain { .. }
            | E::Blowup { .. } => Self::Numeric(e.to_string()),
        }
    }
}
