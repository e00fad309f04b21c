//! Schema-based instruction corpus construction for information
//! extraction datasets, with span-based micro-F1 scoring.

pub mod canonical;
pub mod clean;
pub mod error;
pub mod eval;
pub mod generate;
pub mod ingest;
pub mod model;
pub mod negatives;
pub mod pipeline;
pub mod text;

pub use error::{Error, Result};
pub use model::*;
