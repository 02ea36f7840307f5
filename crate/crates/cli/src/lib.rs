//! Command-line and HTTP surfaces over `fabula-core`.

pub mod api;
pub mod cli;
pub mod server;

pub use cli::cli_main;
