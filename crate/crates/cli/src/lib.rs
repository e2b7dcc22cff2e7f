//! Pipeline driver behind the `lvcprobe` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
