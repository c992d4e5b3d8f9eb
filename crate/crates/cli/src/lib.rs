//! Operator-facing CLI and machine-facing HTTP service over the
//! annotation-event store. Both are thin shells around `amiedot-core`;
//! the [`wire`] module keeps their JSON output byte-identical.

pub mod cli;
pub mod config;
pub mod server;
pub mod wire;
