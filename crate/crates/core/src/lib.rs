//! Detection of wide-area GNSS spoofing and jamming from decoded AIS reports.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithmic
//! piece of the detector:
//!
//! * [`model`]: AIS record types and the preprocessing filters (exact
//!   duplicates, same-timestamp position scatter, bounding box).
//! * [`geo`]: great-circle distance and the local tangent-plane projection.
//! * [`comm_integrity`]: stage 1, removal of MMSI duplication and stale
//!   retransmission artifacts.
//! * [`imm`] and [`tx_interval`]: stage 2, kinematic and transmission-gap cues.
//! * [`st_cluster`]: stage 3, spatiotemporal density clustering of cues and the
//!   final categorization into sensor artifacts, spoofing and jamming.
//! * [`pipeline`]: the in-memory orchestration of all stages plus the
//!   stage-reduction report.
//! * [`synth`]: a seeded scenario generator with ground truth, and the event
//!   evaluator.
//!
//! File formats, parsing and the command line live in the `aisguard` crate.

#![no_std]

extern crate alloc;

pub mod coastline;
pub mod comm_integrity;
pub mod config;
pub mod density;
pub mod exec;
pub mod geo;
pub mod imm;
pub mod model;
pub mod pipeline;
pub mod st_cluster;
pub mod synth;
pub mod tx_interval;

pub use config::{BoundingBox, ConfigError, ImmConfig, PipelineConfig, SogUnit};
pub use exec::{Executor, Sequential};
pub use geo::{GeoPos, PlanarPos};
pub use model::{AisRecord, EpochMs, Mmsi, Track};
pub use st_cluster::{AnomalyCue, Category, CueKind, StEvent};
pub use pipeline::{Mode, PipelineOutput, StageReport};
