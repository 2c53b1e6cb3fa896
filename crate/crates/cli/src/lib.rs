//! Shared pieces of the `approxline` binary: file loading and the CSV
//! run-record schema. Kept in a library so integration tests can parse
//! the binary's output with the same code that produced it.

pub mod input;
pub mod record;
