//! Command line verbs and the HTTP session service.

pub mod app;
pub mod commands;
pub mod config;
pub mod server;

use config::ConfigError;

/// A problem with how the program was invoked rather than with the data.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// 2 for usage and configuration errors, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() || e.downcast_ref::<ConfigError>().is_some() {
        2
    } else {
        1
    }
}
