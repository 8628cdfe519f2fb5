//! HTTP service and command-line front ends for the mapper engine.

pub mod api;
pub mod cli;
pub mod error;
pub mod pipeline;
pub mod session;

pub use error::{ErrorBody, ServiceError};
