//! Runtime shell around the pulse-radar core: configuration, the per-PRI
//! pipeline, the client wire protocol, recordings, batch runs, the live
//! WebSocket service and the correlator benchmark.

pub mod batch;
pub mod bench;
pub mod config;
pub mod pipeline;
pub mod protocol;
pub mod recording;
pub mod serve;

pub use config::SystemConfig;
