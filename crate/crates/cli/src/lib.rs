//! Config-driven runner for the `meanfield-core` pipelines. The binary is a
//! thin shell over [`execute`], which tests call directly.

pub mod config;
mod run;

pub use run::{
    execute, read_artifact, Invocation, Outcome, Pipeline, EXIT_DIVERGED, EXIT_FAILURE, EXIT_NOT_CONVERGED,
    EXIT_OK, EXIT_VALIDATION,
};
