//! Transmission-continuity screening.
//!
//! Each vessel gets a profile from its median reporting interval while under
//! way. An interval between consecutive reports that exceeds
//! `max(t_min, kappa * median)` becomes a [`GapCue`].

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::geo::GeoPos;
use crate::model::{AisRecord, EpochMs, Mmsi};

/// Intervals needed before a median is trusted.
pub const MIN_PROFILE_SAMPLES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TxProfile {
    pub mmsi: Mmsi,
    /// s
    pub median_interval: f64,
    /// s
    pub threshold: f64,
    pub n_samples: usize,
}

/// An outage: no report for longer than the vessel's threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCue {
    pub mmsi: Mmsi,
    pub gap_start_t: EpochMs,
    pub gap_end_t: EpochMs,
    /// Gap length, s.
    pub duration: f64,
    /// Last fix before the gap.
    pub pos: GeoPos,
    pub midpoint_t: EpochMs,
}

/// Median of the intervals whose two bounding reports are both faster than
/// `sog_normal_min`. `None` with fewer than [`MIN_PROFILE_SAMPLES`] intervals.
pub fn median_reporting_interval(records: &[AisRecord], sog_normal_min: f64) -> Option<(f64, usize)> {
    let mut intervals: Vec<i64> = records
        .windows(2)
        .filter(|w| w[0].sog > sog_normal_min && w[1].sog > sog_normal_min)
        .map(|w| w[1].t.0 - w[0].t.0)
        .collect();
    let n = intervals.len();
    if n < MIN_PROFILE_SAMPLES {
        return None;
    }
    intervals.sort_unstable();
    let median_ms = if n % 2 == 1 {
        intervals[n / 2] as f64
    } else {
        (intervals[n / 2 - 1] + intervals[n / 2]) as f64 / 2.0
    };
    Some((median_ms / 1000.0, n))
}

pub fn jamming_threshold(median: f64, kappa: f64, t_min: f64) -> f64 {
    t_min.max(kappa * median)
}

pub fn profile(mmsi: Mmsi, records: &[AisRecord], cfg: &PipelineConfig) -> Option<TxProfile> {
    let (median, n) = median_reporting_interval(records, cfg.sog_normal_min)?;
    Some(TxProfile { mmsi, median_interval: median, threshold: jamming_threshold(median, cfg.kappa, cfg.t_min), n_samples: n })
}

/// One cue per consecutive-report interval strictly longer than the
/// threshold. Time before the first and after the last report is never a gap.
pub fn extract_gap_cues(records: &[AisRecord], profile: &TxProfile) -> Vec<GapCue> {
    records
        .windows(2)
        .filter_map(|w| {
            let duration = w[1].t.seconds_since(w[0].t);
            (duration > profile.threshold).then(|| GapCue {
                mmsi: w[0].mmsi,
                gap_start_t: w[0].t,
                gap_end_t: w[1].t,
                duration,
                pos: w[0].pos(),
                midpoint_t: EpochMs(w[0].t.0 + (w[1].t.0 - w[0].t.0) / 2),
            })
        })
        .collect()
}
