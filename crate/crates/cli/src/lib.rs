//! Harness behind the `rnsfhe` binary.

pub mod ablate;
pub mod operators;
pub mod pdqrun;
pub mod report;
