//! Command line, CSV ingestion and explorer service for Ball Mapper graphs.

pub mod cli;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod server;

pub use error::{AppError, AppResult};
