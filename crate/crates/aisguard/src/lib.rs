//! File formats, run orchestration and the command line around
//! [`aisguard_core`].
//!
//! * [`ingest`]: NDJSON and CSV record parsing with line-numbered errors.
//! * [`config`]: pipeline configuration and coastline loading.
//! * [`report`], [`events`]: the stage table and event GeoJSON.
//! * [`scenario`]: scenario documents, truth sidecars and evaluation reports.
//! * [`run`]: a complete run over files with its manifest.

pub mod config;
pub mod events;
pub mod ingest;
pub mod parallel;
pub mod report;
pub mod run;
pub mod scenario;

pub use parallel::RayonExecutor;
pub use run::{run, RunManifest, RunOutcome, RunRequest};
