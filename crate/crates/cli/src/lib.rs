//! Command dispatch, configuration and bit-stable output serialization for
//! the phase-space simulator.
//!
//! Subcommands:
//! - `validate`: kernel-axiom, generator-consistency and projection suites;
//! - `exact`:    dense Lindblad integration of the chain (n <= 8);
//! - `simulate`: stochastic positive-P ensemble with discrete projection;
//! - `compare`:  both of the above plus per-time z-scores.
//!
//! Series are written as CSV with floats at 17 significant digits so reruns
//! with the same configuration are byte-identical; a JSON sidecar carries
//! the full configuration echo and run statistics.

pub mod config;
pub mod output;
pub mod run;
pub mod validate;

pub use config::{Mode, RunConfig};
pub use run::{run, ExitSummary};
