//! Communication-integrity diagnostics run before any GNSS interpretation.
//!
//! Two artifacts are removed from each track:
//!
//! * stale retransmissions, where a navigation tuple already seen reappears
//!   under a later timestamp;
//! * MMSI duplication, where two physically plausible trajectories share one
//!   identity at the same time.
//!
//! Duplication is found from sub-tracks: density clusters of a track's
//! records that are mutually close in space, time, speed and course. Sub-tracks
//! that overlap in time form a group; each sub-track of a group is re-extracted
//! and checked for kinematic consistency with the IMM screener, and the
//! number of consistent ("normal") sub-tracks decides the labels.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::density::{dbscan, members, NeighborSearch};
use crate::geo::{chord_threshold, SpherePoint};
use crate::imm::CueScanner;
use crate::model::{AisRecord, EpochMs, Track};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommLabel {
    MmsiDuplication,
    StaleRetransmission,
    TrueTrack,
}

/// Indices of records whose navigation tuple was already seen at an earlier
/// timestamp. Each sighting moves the tuple's remembered time forward, so a
/// tuple repeated at t0 < t1 < t2 flags t1 and t2. Records must be time-sorted.
pub fn detect_stale_retransmission(records: &[AisRecord]) -> Vec<usize> {
    let mut seen: BTreeMap<[u64; 4], EpochMs> = BTreeMap::new();
    let mut flagged = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(prev) = seen.insert(r.nav_key(), r.t) {
            if prev < r.t {
                flagged.push(i);
            }
        }
    }
    flagged
}

/// A density cluster of one track's records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubTrack {
    /// Ascending indices into the records the sub-track was extracted from.
    pub indices: Vec<usize>,
    pub t_start: EpochMs,
    pub t_end: EpochMs,
}

impl SubTrack {
    pub fn duration(&self) -> f64 {
        self.t_end.seconds_since(self.t_start)
    }

    /// Closed-interval overlap; touching endpoints count.
    pub fn overlaps(&self, other: &SubTrack) -> bool {
        self.t_start <= other.t_end && other.t_start <= self.t_end
    }
}

/// Neighbour relation of the sub-track extractor over a time-sorted track.
struct TrackNeighbors {
    t: Vec<i64>,
    points: Vec<SpherePoint>,
    sog: Vec<f64>,
    course: Vec<(f64, f64)>,
    max_chord_sq: f64,
    max_dt_ms: i64,
    max_dsog: f64,
    min_course_cos: f64,
}

impl TrackNeighbors {
    fn new(records: &[AisRecord], cfg: &PipelineConfig) -> Self {
        TrackNeighbors {
            t: records.iter().map(|r| r.t.0).collect(),
            points: records.iter().map(|r| SpherePoint::from_pos(r.pos())).collect(),
            sog: records.iter().map(|r| r.sog).collect(),
            course: records
                .iter()
                .map(|r| (libm::sin(r.course().to_radians()), libm::cos(r.course().to_radians())))
                .collect(),
            max_chord_sq: chord_threshold(cfg.eps_space_dup),
            max_dt_ms: libm::round(cfg.eps_time_dup * 1000.0) as i64,
            max_dsog: cfg.eps_speed_dup,
            min_course_cos: libm::cos(cfg.eps_heading_dup.to_radians()),
        }
    }

    #[inline]
    fn related(&self, i: usize, j: usize) -> bool {
        let (a, b) = (self.course[i], self.course[j]);
        libm::fabs(self.sog[i] - self.sog[j]) < self.max_dsog
            && a.0 * b.0 + a.1 * b.1 > self.min_course_cos
            && self.points[i].chord_sq(&self.points[j]) < self.max_chord_sq
    }

    /// Calls `f` for every neighbour of `i` until it returns false.
    fn scan(&self, i: usize, mut f: impl FnMut(usize) -> bool) {
        let ti = self.t[i];
        for j in (0..i).rev() {
            if ti - self.t[j] >= self.max_dt_ms {
                break;
            }
            if self.related(i, j) && !f(j) {
                return;
            }
        }
        for j in i + 1..self.t.len() {
            if self.t[j] - ti >= self.max_dt_ms {
                break;
            }
            if self.related(i, j) && !f(j) {
                return;
            }
        }
    }
}

impl NeighborSearch for TrackNeighbors {
    fn len(&self) -> usize {
        self.t.len()
    }

    fn neighbors(&self, i: usize, out: &mut Vec<usize>) {
        self.scan(i, |j| {
            out.push(j);
            true
        });
    }

    fn count_neighbors(&self, i: usize, limit: usize) -> usize {
        let mut n = 0;
        self.scan(i, |_| {
            n += 1;
            n < limit
        });
        n
    }
}

/// Sub-tracks of a time-sorted record sequence, ordered by their first
/// record. Clusters shorter than the minimum duration are dropped.
pub fn extract_subtracks(records: &[AisRecord], cfg: &PipelineConfig) -> Vec<SubTrack> {
    let search = TrackNeighbors::new(records, cfg);
    let labels = dbscan(&search, cfg.min_pts);
    let mut subs: Vec<SubTrack> = members(&labels)
        .into_iter()
        .map(|indices| SubTrack {
            t_start: records[indices[0]].t,
            t_end: records[*indices.last().expect("clusters are non-empty")].t,
            indices,
        })
        .filter(|s| s.duration() >= cfg.subtrack_min_duration)
        .collect();
    subs.sort_by_key(|s| s.indices[0]);
    subs
}

/// A sub-track is normal when it has at least three records and the IMM
/// screener raises no kinematic cue on it.
pub fn validate_subtrack_normal(records: &[AisRecord], cfg: &PipelineConfig) -> bool {
    records.len() >= 3 && CueScanner::new(records, cfg).next().is_none()
}

/// Connected components of the temporal-overlap graph, as sorted index lists.
fn overlap_groups(subs: &[SubTrack]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..subs.len()).collect();
    order.sort_by_key(|&i| (subs[i].t_start, i));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut reach = EpochMs(i64::MIN);
    for i in order {
        match groups.last_mut() {
            Some(g) if subs[i].t_start <= reach => g.push(i),
            _ => groups.push(alloc::vec![i]),
        }
        reach = reach.max(subs[i].t_end);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups
}

/// Labels for the records of one track after stale removal.
pub fn label_duplication(records: &[AisRecord], cfg: &PipelineConfig) -> Vec<Option<CommLabel>> {
    let mut labels = alloc::vec![None; records.len()];
    let preliminary = extract_subtracks(records, cfg);
    for group in overlap_groups(&preliminary) {
        let mut idx: Vec<usize> = group.iter().flat_map(|&g| preliminary[g].indices.iter().copied()).collect();
        idx.sort_unstable();
        let group_records: Vec<AisRecord> = idx.iter().map(|&i| records[i]).collect();
        let subs: Vec<SubTrack> = extract_subtracks(&group_records, cfg)
            .into_iter()
            .map(|s| SubTrack { indices: s.indices.iter().map(|&k| idx[k]).collect(), ..s })
            .collect();
        let normal: Vec<bool> = subs
            .iter()
            .map(|s| {
                let recs: Vec<AisRecord> = s.indices.iter().map(|&i| records[i]).collect();
                validate_subtrack_normal(&recs, cfg)
            })
            .collect();
        for (s, kind) in subs.iter().zip(group_labels(&subs, &normal)) {
            if let Some(kind) = kind {
                for &i in &s.indices {
                    labels[i] = Some(kind);
                }
            }
        }
    }
    labels
}

/// Decision over one group of re-extracted sub-tracks:
/// * two normal sub-tracks overlapping in time: every sub-track is a duplicate;
/// * otherwise normal sub-tracks are true tracks, and abnormal sub-tracks
///   overlapping one of them are duplicates;
/// * sub-tracks not covered by either rule keep no label.
fn group_labels(subs: &[SubTrack], normal: &[bool]) -> Vec<Option<CommLabel>> {
    let normals: Vec<usize> = (0..subs.len()).filter(|&i| normal[i]).collect();
    let concurrent = normals
        .iter()
        .enumerate()
        .any(|(k, &a)| normals[k + 1..].iter().any(|&b| subs[a].overlaps(&subs[b])));
    if concurrent {
        return alloc::vec![Some(CommLabel::MmsiDuplication); subs.len()];
    }
    (0..subs.len())
        .map(|i| {
            if normal[i] {
                Some(CommLabel::TrueTrack)
            } else if normals.iter().any(|&n| subs[n].overlaps(&subs[i])) {
                Some(CommLabel::MmsiDuplication)
            } else {
                None
            }
        })
        .collect()
}

/// A track after stage 1.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CleanTrack {
    pub track: Track,
    /// `Some(TrueTrack)` for records confirmed as the identity's genuine track.
    pub labels: Vec<Option<CommLabel>>,
    /// Removed records with the artifact they belong to, in track order.
    pub removed: Vec<(AisRecord, CommLabel)>,
}

impl CleanTrack {
    pub fn removed_count(&self, kind: CommLabel) -> usize {
        self.removed.iter().filter(|(_, k)| *k == kind).count()
    }
}

/// Stale removal followed by duplication removal for one time-sorted track.
pub fn clean_track(track: Track, cfg: &PipelineConfig) -> CleanTrack {
    let mmsi = track.mmsi;
    let stale = detect_stale_retransmission(&track.records);
    let mut removed = Vec::new();
    let mut records = Vec::with_capacity(track.records.len());
    let mut next_stale = stale.iter().peekable();
    for (i, r) in track.records.into_iter().enumerate() {
        if next_stale.peek() == Some(&&i) {
            next_stale.next();
            removed.push((r, CommLabel::StaleRetransmission));
        } else {
            records.push(r);
        }
    }

    let dup_labels = label_duplication(&records, cfg);
    let mut kept = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (r, l) in records.into_iter().zip(dup_labels) {
        if l == Some(CommLabel::MmsiDuplication) {
            removed.push((r, CommLabel::MmsiDuplication));
        } else {
            kept.push(r);
            labels.push(l);
        }
    }
    removed.sort_by(|a, b| crate::model::track_cmp(&a.0, &b.0));
    CleanTrack { track: Track { mmsi, records: kept }, labels, removed }
}
