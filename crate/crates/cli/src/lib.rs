//! Configuration, storage wiring and the HTTP service shared by the
//! `featseq` binary. The CLI and the service both go through [`Engine`], so
//! the two paths produce identical plans and transition reports.

pub mod config;
pub mod engine;
pub mod server;

pub use config::EngineConfig;
pub use engine::{exit_code, Engine};
