//! AIS record types and the preprocessing filters applied before stage 1.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::BoundingBox;
use crate::geo::{geodesic_distance, GeoPos};

/// Maritime Mobile Service Identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mmsi(pub u32);

impl Mmsi {
    pub const MAX: u32 = 999_999_999;
}

impl fmt::Display for Mmsi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:09}", self.0)
    }
}

/// UTC instant as integer milliseconds since the Unix epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpochMs(pub i64);

impl EpochMs {
    pub const MS_PER_DAY: i64 = 86_400_000;

    /// Seconds elapsed from `earlier` to `self`.
    pub fn seconds_since(self, earlier: EpochMs) -> f64 {
        (self.0 - earlier.0) as f64 / 1000.0
    }

    /// Calendar UTC day index (days since 1970-01-01).
    pub fn utc_day(self) -> i64 {
        self.0.div_euclid(Self::MS_PER_DAY)
    }

    pub fn plus_seconds(self, s: f64) -> EpochMs {
        EpochMs(self.0 + libm::round(s * 1000.0) as i64)
    }
}

/// One decoded AIS dynamic report. SOG is in m/s, angles in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    pub mmsi: Mmsi,
    pub t: EpochMs,
    pub lat: f64,
    pub lon: f64,
    pub sog: f64,
    pub cog: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("mmsi out of range")]
    Mmsi,
    #[error("lat out of range")]
    Lat,
    #[error("lon out of range")]
    Lon,
    #[error("sog out of range")]
    Sog,
    #[error("cog out of range")]
    Cog,
    #[error("heading out of range")]
    Heading,
}

impl AisRecord {
    pub fn pos(&self) -> GeoPos {
        GeoPos::new(self.lat, self.lon)
    }

    /// Course used for the heading-consistency checks: true heading when
    /// reported, otherwise course over ground.
    pub fn course(&self) -> f64 {
        self.heading.unwrap_or(self.cog)
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.mmsi.0 > Mmsi::MAX {
            return Err(RecordError::Mmsi);
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(RecordError::Lat);
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(RecordError::Lon);
        }
        if !(self.sog.is_finite() && self.sog >= 0.0) {
            return Err(RecordError::Sog);
        }
        if !(0.0..360.0).contains(&self.cog) {
            return Err(RecordError::Cog);
        }
        if let Some(h) = self.heading {
            if !(0.0..360.0).contains(&h) {
                return Err(RecordError::Heading);
            }
        }
        Ok(())
    }

    /// The navigation tuple as raw bit patterns. Two rebroadcasts of the same
    /// payload parse to identical bits.
    pub fn nav_key(&self) -> [u64; 4] {
        [self.lat.to_bits(), self.lon.to_bits(), self.sog.to_bits(), self.cog.to_bits()]
    }

    fn identity_eq(&self, other: &AisRecord) -> bool {
        self.mmsi == other.mmsi && self.t == other.t && self.nav_key() == other.nav_key()
    }
}

fn cmp_heading(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y),
    }
}

/// Canonical global order: (t, mmsi, lat, lon, sog, cog), heading last.
pub fn canonical_cmp(a: &AisRecord, b: &AisRecord) -> Ordering {
    a.t.cmp(&b.t)
        .then(a.mmsi.cmp(&b.mmsi))
        .then_with(|| track_cmp(a, b))
}

/// Order inside one track: (t, lat, lon, sog, cog), heading last.
pub fn track_cmp(a: &AisRecord, b: &AisRecord) -> Ordering {
    a.t.cmp(&b.t)
        .then(a.lat.total_cmp(&b.lat))
        .then(a.lon.total_cmp(&b.lon))
        .then(a.sog.total_cmp(&b.sog))
        .then(a.cog.total_cmp(&b.cog))
        .then_with(|| cmp_heading(a.heading, b.heading))
}

/// Time-sorted reports of a single MMSI.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Track {
    pub mmsi: Mmsi,
    pub records: Vec<AisRecord>,
}

impl Track {
    /// Builds a track, sorting the records into track order.
    pub fn new(mmsi: Mmsi, mut records: Vec<AisRecord>) -> Self {
        records.sort_unstable_by(track_cmp);
        Track { mmsi, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn time_range(&self) -> Option<(EpochMs, EpochMs)> {
        Some((self.records.first()?.t, self.records.last()?.t))
    }
}

/// Removes records whose (mmsi, t, lat, lon, sog, cog) repeat an earlier one.
/// The output is in canonical order.
pub fn dedup_exact(mut records: Vec<AisRecord>) -> (Vec<AisRecord>, usize) {
    let before = records.len();
    records.sort_unstable_by(canonical_cmp);
    records.dedup_by(|later, kept| later.identity_eq(kept));
    let removed = before - records.len();
    (records, removed)
}

/// Resolves same-(mmsi, t) groups: groups whose positions spread further than
/// `d_scatter` metres are dropped entirely, other groups keep their first
/// record. Input must be sorted by (t, mmsi).
pub fn filter_position_scatter(records: Vec<AisRecord>, d_scatter: f64) -> (Vec<AisRecord>, usize) {
    let before = records.len();
    let mut out = Vec::with_capacity(records.len());
    let mut start = 0;
    while start < records.len() {
        let head = &records[start];
        let mut end = start + 1;
        while end < records.len() && records[end].t == head.t && records[end].mmsi == head.mmsi {
            end += 1;
        }
        let group = &records[start..end];
        if group.len() == 1 || max_pairwise_distance(group) <= d_scatter {
            out.push(group[0]);
        }
        start = end;
    }
    let removed = before - out.len();
    (out, removed)
}

fn max_pairwise_distance(group: &[AisRecord]) -> f64 {
    let mut max = 0.0f64;
    for (i, a) in group.iter().enumerate() {
        for b in &group[i + 1..] {
            max = max.max(geodesic_distance(a.pos(), b.pos()));
        }
    }
    max
}

/// Keeps records inside `bbox`, bounds inclusive.
pub fn filter_bbox(mut records: Vec<AisRecord>, bbox: &BoundingBox) -> (Vec<AisRecord>, usize) {
    let before = records.len();
    records.retain(|r| bbox.contains(r.lat, r.lon));
    let removed = before - records.len();
    (records, removed)
}

/// Splits records into per-MMSI tracks.
pub fn partition_by_mmsi(records: Vec<AisRecord>) -> BTreeMap<Mmsi, Track> {
    let mut map: BTreeMap<Mmsi, Vec<AisRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.mmsi).or_default().push(r);
    }
    map.into_iter().map(|(m, recs)| (m, Track::new(m, recs))).collect()
}
