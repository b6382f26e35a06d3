//! Derive and run composite metamorphic relations over DAG-structured
//! pipelines.

pub mod algebra;
pub mod builtins;
pub mod cli;
pub mod derive;
pub mod detector;
pub mod error;
pub mod genomics;
pub mod graph;
pub mod harness;
pub mod relation;
pub mod spec_file;

pub use error::{Error, Result};
