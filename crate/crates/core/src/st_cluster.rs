//! Spatiotemporal clustering of anomaly cues and event categorization.
//!
//! Kinematic cues and transmission-gap cues are clustered in separate passes
//! with ST-DBSCAN: two cues are neighbours when they are closer than `eps_s`
//! metres and `eps_t` seconds (both strict). Each cluster becomes an
//! [`StEvent`] and is categorized:
//!
//! * enough distinct vessels, with enough of the vessels present in the area
//!   affected: spoofing (kinematic cues) or jamming (gap cues);
//! * a single vessel: noise when too short, otherwise a sensor artifact,
//!   persistent when it recurs on most of the vessel's operational days;
//! * anything else: noise.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::coastline::Coastline;
use crate::config::PipelineConfig;
use crate::density::{dbscan, members, NeighborSearch};
use crate::geo::{centroid, chord_threshold, geodesic_distance, GeoPos, SpherePoint, EARTH_RADIUS_M};
use crate::imm::KinematicCue;
use crate::model::{EpochMs, Mmsi, Track};
use crate::tx_interval::GapCue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueKind {
    Kinematic,
    TxGap,
}

impl CueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CueKind::Kinematic => "kinematic",
            CueKind::TxGap => "tx_gap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CuePayload {
    Kinematic(KinematicCue),
    TxGap(GapCue),
}

/// A cue reduced to a point in space and time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyCue {
    pub mmsi: Mmsi,
    pub t: EpochMs,
    pub pos: GeoPos,
    pub payload: CuePayload,
}

impl AnomalyCue {
    pub fn kind(&self) -> CueKind {
        match self.payload {
            CuePayload::Kinematic(_) => CueKind::Kinematic,
            CuePayload::TxGap(_) => CueKind::TxGap,
        }
    }
}

impl From<KinematicCue> for AnomalyCue {
    fn from(c: KinematicCue) -> Self {
        AnomalyCue { mmsi: c.mmsi, t: c.t, pos: c.pos, payload: CuePayload::Kinematic(c) }
    }
}

impl From<GapCue> for AnomalyCue {
    fn from(c: GapCue) -> Self {
        AnomalyCue { mmsi: c.mmsi, t: c.midpoint_t, pos: c.pos, payload: CuePayload::TxGap(c) }
    }
}

/// Canonical processing order: time, MMSI, position, kind.
pub fn canonical_cue_cmp(a: &AnomalyCue, b: &AnomalyCue) -> Ordering {
    a.t.cmp(&b.t)
        .then(a.mmsi.cmp(&b.mmsi))
        .then(a.pos.lat.total_cmp(&b.pos.lat))
        .then(a.pos.lon.total_cmp(&b.pos.lon))
        .then(a.kind().cmp(&b.kind()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Noise,
    PersistentSensor,
    TransientSensor,
    Spoofing,
    Jamming,
    /// Clusters reported without screening (baseline runs).
    Unscreened,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Noise,
        Category::PersistentSensor,
        Category::TransientSensor,
        Category::Spoofing,
        Category::Jamming,
        Category::Unscreened,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Noise => "noise",
            Category::PersistentSensor => "persistent_sensor",
            Category::TransientSensor => "transient_sensor",
            Category::Spoofing => "spoofing",
            Category::Jamming => "jamming",
            Category::Unscreened => "unscreened",
        }
    }
}

/// Grid index over cues: cells of `eps_s` in latitude, at least `eps_s` in
/// longitude at the highest latitude present, and `eps_t` in time. Every
/// neighbour of a cue lies in the 27 cells around it.
pub struct CueIndex {
    points: Vec<SpherePoint>,
    t: Vec<i64>,
    cells: Vec<(i64, i64, i64)>,
    sorted: Vec<((i64, i64, i64), u32)>,
    n_lon: i64,
    max_chord_sq: f64,
    eps_t_ms: i64,
}

impl CueIndex {
    pub fn new(cues: &[AnomalyCue], eps_s: f64, eps_t: f64) -> Self {
        let eps_t_ms = libm::round(eps_t * 1000.0) as i64;
        let max_abs_lat = cues.iter().map(|c| libm::fabs(c.pos.lat)).fold(0.0f64, f64::max);
        let ratio = libm::sin(eps_s / (2.0 * EARTH_RADIUS_M)) / libm::cos(max_abs_lat.to_radians());
        let n_lon = if ratio.is_finite() && ratio < 1.0 {
            let width_deg = (2.0 * libm::asin(ratio)).to_degrees();
            (libm::floor(360.0 / width_deg) as i64).max(1)
        } else {
            1
        };
        let lat_cell_deg = (eps_s / EARTH_RADIUS_M).to_degrees();
        let lon_cell_deg = 360.0 / n_lon as f64;
        let cells: Vec<(i64, i64, i64)> = cues
            .iter()
            .map(|c| {
                let a = libm::floor(c.pos.lat / lat_cell_deg) as i64;
                let b = (libm::floor((c.pos.lon + 180.0) / lon_cell_deg) as i64).rem_euclid(n_lon);
                (a, b, c.t.0.div_euclid(eps_t_ms.max(1)))
            })
            .collect();
        let mut sorted: Vec<((i64, i64, i64), u32)> = cells.iter().enumerate().map(|(i, k)| (*k, i as u32)).collect();
        sorted.sort_unstable();
        CueIndex {
            points: cues.iter().map(|c| SpherePoint::from_pos(c.pos)).collect(),
            t: cues.iter().map(|c| c.t.0).collect(),
            cells,
            sorted,
            n_lon,
            max_chord_sq: chord_threshold(eps_s),
            eps_t_ms,
        }
    }

    #[inline]
    fn related(&self, i: usize, j: usize) -> bool {
        (self.t[i] - self.t[j]).abs() < self.eps_t_ms && self.points[i].chord_sq(&self.points[j]) < self.max_chord_sq
    }

    fn scan(&self, i: usize, mut f: impl FnMut(usize) -> bool) {
        let (a, b, c) = self.cells[i];
        let mut lon_cells = [b - 1, b, b + 1].map(|x| x.rem_euclid(self.n_lon));
        lon_cells.sort_unstable();
        for da in -1..=1 {
            for (k, &lb) in lon_cells.iter().enumerate() {
                if k > 0 && lon_cells[k - 1] == lb {
                    continue;
                }
                for dc in -1..=1 {
                    let key = (a + da, lb, c + dc);
                    let lo = self.sorted.partition_point(|e| e.0 < key);
                    for e in &self.sorted[lo..] {
                        if e.0 != key {
                            break;
                        }
                        let j = e.1 as usize;
                        if j != i && self.related(i, j) && !f(j) {
                            return;
                        }
                    }
                }
            }
        }
    }
}

impl NeighborSearch for CueIndex {
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

/// ST-DBSCAN over cues that are already in canonical order. Returns a cluster
/// id per cue, `None` for noise.
pub fn st_dbscan(cues: &[AnomalyCue], eps_s: f64, eps_t: f64, min_pts: usize) -> Vec<Option<u32>> {
    debug_assert!(cues.windows(2).all(|w| canonical_cue_cmp(&w[0], &w[1]) != Ordering::Greater));
    dbscan(&CueIndex::new(cues, eps_s, eps_t), min_pts)
}

/// Inclusive space-time query box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimeBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub t_min: EpochMs,
    pub t_max: EpochMs,
}

impl SpaceTimeBox {
    fn contains(&self, lat: f64, lon: f64, t: EpochMs) -> bool {
        t >= self.t_min
            && t <= self.t_max
            && lat >= self.lat_min
            && lat <= self.lat_max
            && lon >= self.lon_min
            && lon <= self.lon_max
    }

    /// Bounding box of points grown by `eps_s` metres and `eps_t` seconds.
    pub fn around(points: impl IntoIterator<Item = (GeoPos, EpochMs)>, eps_s: f64, eps_t: f64) -> Option<Self> {
        let mut it = points.into_iter();
        let (p, t) = it.next()?;
        let mut b = SpaceTimeBox { lat_min: p.lat, lat_max: p.lat, lon_min: p.lon, lon_max: p.lon, t_min: t, t_max: t };
        for (p, t) in it {
            b.lat_min = b.lat_min.min(p.lat);
            b.lat_max = b.lat_max.max(p.lat);
            b.lon_min = b.lon_min.min(p.lon);
            b.lon_max = b.lon_max.max(p.lon);
            b.t_min = b.t_min.min(t);
            b.t_max = b.t_max.max(t);
        }
        let dlat = (eps_s / EARTH_RADIUS_M).to_degrees();
        b.lat_min = (b.lat_min - dlat).max(-90.0);
        b.lat_max = (b.lat_max + dlat).min(90.0);
        let widest = libm::fabs(b.lat_min).max(libm::fabs(b.lat_max));
        let cos = libm::cos(widest.to_radians());
        let dlon = if cos > 1e-9 { (eps_s / (EARTH_RADIUS_M * cos)).to_degrees() } else { 360.0 };
        b.lon_min -= dlon;
        b.lon_max += dlon;
        b.t_min = b.t_min.plus_seconds(-eps_t);
        b.t_max = b.t_max.plus_seconds(eps_t);
        Some(b)
    }
}

const CHUNK_RECORDS: usize = 64;
const CHUNK_SPAN_MS: i64 = 3_600_000;

struct Chunk {
    track: u32,
    start: u32,
    end: u32,
    t0: EpochMs,
    t1: EpochMs,
    lat_min: f64,
    lat_max: f64,
    lon_min: f64,
    lon_max: f64,
}

/// Which vessels reported where and when: the denominator of the anomalous
/// ratio. Tracks are split into short chunks with bounding boxes.
pub struct TrafficIndex<'a> {
    tracks: &'a [Track],
    chunks: Vec<Chunk>,
}

impl<'a> TrafficIndex<'a> {
    pub fn new(tracks: &'a [Track]) -> Self {
        let mut chunks = Vec::new();
        for (ti, track) in tracks.iter().enumerate() {
            let recs = &track.records;
            let mut start = 0;
            while start < recs.len() {
                let mut end = start + 1;
                while end < recs.len() && end - start < CHUNK_RECORDS && recs[end].t.0 - recs[start].t.0 <= CHUNK_SPAN_MS {
                    end += 1;
                }
                let slice = &recs[start..end];
                let mut c = Chunk {
                    track: ti as u32,
                    start: start as u32,
                    end: end as u32,
                    t0: slice[0].t,
                    t1: slice[slice.len() - 1].t,
                    lat_min: f64::INFINITY,
                    lat_max: f64::NEG_INFINITY,
                    lon_min: f64::INFINITY,
                    lon_max: f64::NEG_INFINITY,
                };
                for r in slice {
                    c.lat_min = c.lat_min.min(r.lat);
                    c.lat_max = c.lat_max.max(r.lat);
                    c.lon_min = c.lon_min.min(r.lon);
                    c.lon_max = c.lon_max.max(r.lon);
                }
                chunks.push(c);
                start = end;
            }
        }
        chunks.sort_by_key(|c| (c.t0, c.track, c.start));
        TrafficIndex { tracks, chunks }
    }

    /// Distinct MMSIs with at least one report inside the box.
    pub fn present_mmsis(&self, q: &SpaceTimeBox) -> BTreeSet<Mmsi> {
        let mut out = BTreeSet::new();
        let lo = self.chunks.partition_point(|c| c.t0.0 < q.t_min.0 - CHUNK_SPAN_MS);
        for c in &self.chunks[lo..] {
            if c.t0 > q.t_max {
                break;
            }
            let mmsi = self.tracks[c.track as usize].mmsi;
            if c.t1 < q.t_min
                || c.lat_max < q.lat_min
                || c.lat_min > q.lat_max
                || c.lon_max < q.lon_min
                || c.lon_min > q.lon_max
                || out.contains(&mmsi)
            {
                continue;
            }
            let recs = &self.tracks[c.track as usize].records[c.start as usize..c.end as usize];
            if recs.iter().any(|r| q.contains(r.lat, r.lon, r.t)) {
                out.insert(mmsi);
            }
        }
        out
    }
}

/// One cluster of same-kind cues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StEvent {
    pub cluster_id: u32,
    pub kind: CueKind,
    pub category: Category,
    /// Indices into the canonical cue list of this kind.
    pub members: Vec<usize>,
    /// Distinct contributing vessels, ascending.
    pub mmsis: Vec<Mmsi>,
    pub t_start: EpochMs,
    pub t_end: EpochMs,
    pub centroid: GeoPos,
    /// Largest member distance from the centroid, m.
    pub radius_m: f64,
    /// Distinct vessels present around the event, contributors included.
    pub present_mmsis: usize,
    pub anomalous_ratio: f64,
    /// UTC days touched by member cues, ascending.
    pub days: Vec<i64>,
}

impl StEvent {
    pub fn distinct_mmsis(&self) -> usize {
        self.mmsis.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.t_end.seconds_since(self.t_start)
    }
}

/// Cues of one kind in canonical order with their cluster labels.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CueClusters {
    pub cues: Vec<AnomalyCue>,
    /// Index into [`Stage3::events`] per cue, `None` when unclustered.
    pub event: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Stage3 {
    pub kinematic: CueClusters,
    pub tx_gap: CueClusters,
    pub events: Vec<StEvent>,
}

impl Stage3 {
    pub fn cues(&self, kind: CueKind) -> &CueClusters {
        match kind {
            CueKind::Kinematic => &self.kinematic,
            CueKind::TxGap => &self.tx_gap,
        }
    }

    /// Category of a cue: that of its event, noise when unclustered.
    pub fn cue_category(&self, kind: CueKind, i: usize) -> Category {
        self.cues(kind).event[i].map_or(Category::Noise, |e| self.events[e].category)
    }
}

/// What classification needs besides the clusters.
pub struct ClassifyContext<'a> {
    pub traffic: &'a TrafficIndex<'a>,
    pub coastline: Option<&'a Coastline>,
    /// UTC days with at least one report, per vessel.
    pub operational_days: &'a BTreeMap<Mmsi, BTreeSet<i64>>,
}

/// UTC days with at least one report, per track.
pub fn operational_days(tracks: &[Track]) -> BTreeMap<Mmsi, BTreeSet<i64>> {
    tracks
        .iter()
        .filter(|t| !t.is_empty())
        .map(|t| (t.mmsi, t.records.iter().map(|r| r.t.utc_day()).collect()))
        .collect()
}

fn build_events(
    kind: CueKind,
    cues: &[AnomalyCue],
    labels: &[Option<u32>],
    traffic: &TrafficIndex,
    cfg: &PipelineConfig,
    first_id: u32,
) -> Vec<StEvent> {
    members(labels)
        .into_iter()
        .enumerate()
        .map(|(k, idx)| {
            let mmsis: BTreeSet<Mmsi> = idx.iter().map(|&i| cues[i].mmsi).collect();
            let days: BTreeSet<i64> = idx.iter().map(|&i| cues[i].t.utc_day()).collect();
            let c = centroid(idx.iter().map(|&i| cues[i].pos)).expect("clusters are non-empty");
            let radius_m = idx.iter().map(|&i| geodesic_distance(c, cues[i].pos)).fold(0.0, f64::max);
            let bbox = SpaceTimeBox::around(idx.iter().map(|&i| (cues[i].pos, cues[i].t)), cfg.eps_s, cfg.eps_t)
                .expect("clusters are non-empty");
            let mut present = traffic.present_mmsis(&bbox);
            present.extend(mmsis.iter().copied());
            StEvent {
                cluster_id: first_id + k as u32,
                kind,
                category: Category::Noise,
                t_start: idx.iter().map(|&i| cues[i].t).min().expect("clusters are non-empty"),
                t_end: idx.iter().map(|&i| cues[i].t).max().expect("clusters are non-empty"),
                members: idx,
                anomalous_ratio: mmsis.len() as f64 / present.len() as f64,
                present_mmsis: present.len(),
                mmsis: mmsis.into_iter().collect(),
                centroid: c,
                radius_m,
                days: days.into_iter().collect(),
            }
        })
        .collect()
}

enum Verdict {
    Final(Category),
    /// A single-vessel cluster long enough to be a sensor artifact.
    SensorCandidate,
}

fn first_pass(ev: &StEvent, ctx: &ClassifyContext, cfg: &PipelineConfig) -> Verdict {
    let n = ev.distinct_mmsis();
    if n >= cfg.min_event_mmsis && ev.anomalous_ratio >= cfg.th_group {
        return Verdict::Final(match ev.kind {
            CueKind::Kinematic => Category::Spoofing,
            CueKind::TxGap => Category::Jamming,
        });
    }
    if n != 1 || ev.kind == CueKind::TxGap {
        return Verdict::Final(Category::Noise);
    }
    let coastal = ctx.coastline.is_none_or(|c| c.distance_m(ev.centroid) <= cfg.coastal_distance_m);
    let min_duration = if coastal { cfg.t_single_coastal } else { cfg.t_single_offshore };
    if ev.duration_s() < min_duration {
        Verdict::Final(Category::Noise)
    } else {
        Verdict::SensorCandidate
    }
}

/// Assigns a category to every event.
pub fn classify_events(events: &mut [StEvent], ctx: &ClassifyContext, cfg: &PipelineConfig) {
    let verdicts: Vec<Verdict> = events.iter().map(|e| first_pass(e, ctx, cfg)).collect();
    let mut qualifying_days: BTreeMap<Mmsi, BTreeSet<i64>> = BTreeMap::new();
    for (e, v) in events.iter().zip(&verdicts) {
        if matches!(v, Verdict::SensorCandidate) {
            qualifying_days.entry(e.mmsis[0]).or_default().extend(e.days.iter().copied());
        }
    }
    for (e, v) in events.iter_mut().zip(verdicts) {
        e.category = match v {
            Verdict::Final(c) => c,
            Verdict::SensorCandidate => {
                let mmsi = e.mmsis[0];
                let qualifying = qualifying_days.get(&mmsi).map_or(0, BTreeSet::len);
                let operational = ctx.operational_days.get(&mmsi).map_or(0, BTreeSet::len).max(qualifying);
                if qualifying as f64 >= cfg.persistence_day_fraction * operational as f64 {
                    Category::PersistentSensor
                } else {
                    Category::TransientSensor
                }
            }
        };
        if matches!(e.category, Category::Spoofing | Category::Jamming) {
            assert!(e.distinct_mmsis() >= cfg.min_event_mmsis && e.anomalous_ratio >= cfg.th_group);
        }
    }
}

fn cluster_kind(
    kind: CueKind,
    mut cues: Vec<AnomalyCue>,
    traffic: &TrafficIndex,
    cfg: &PipelineConfig,
    events: &mut Vec<StEvent>,
) -> CueClusters {
    debug_assert!(cues.iter().all(|c| c.kind() == kind));
    cues.sort_by(canonical_cue_cmp);
    let labels = st_dbscan(&cues, cfg.eps_s, cfg.eps_t, cfg.min_pts);
    let offset = events.len();
    events.extend(build_events(kind, &cues, &labels, traffic, cfg, offset as u32));
    let event = labels.iter().map(|l| l.map(|c| offset + c as usize)).collect();
    CueClusters { cues, event }
}

/// Clusters both cue kinds and categorizes the clusters. With `screen` off
/// every cluster is reported as [`Category::Unscreened`].
pub fn categorize_all(
    kinematic: Vec<AnomalyCue>,
    tx_gap: Vec<AnomalyCue>,
    ctx: &ClassifyContext,
    cfg: &PipelineConfig,
    screen: bool,
) -> Stage3 {
    let mut events = Vec::new();
    let kinematic = cluster_kind(CueKind::Kinematic, kinematic, ctx.traffic, cfg, &mut events);
    let tx_gap = cluster_kind(CueKind::TxGap, tx_gap, ctx.traffic, cfg, &mut events);
    if screen {
        classify_events(&mut events, ctx, cfg);
    } else {
        for e in &mut events {
            e.category = Category::Unscreened;
        }
    }
    Stage3 { kinematic, tx_gap, events }
}

/// Point and vessel counts of one cell of the stage-3 report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CueTally {
    pub points: usize,
    pub mmsis: usize,
    pub clusters: usize,
}

/// Per-category tallies of one cue kind; unclustered cues count as noise.
pub fn tally(stage3: &Stage3, kind: CueKind) -> BTreeMap<Category, CueTally> {
    let cc = stage3.cues(kind);
    let mut points: BTreeMap<Category, (usize, BTreeSet<Mmsi>)> = BTreeMap::new();
    for (i, c) in cc.cues.iter().enumerate() {
        let e = points.entry(stage3.cue_category(kind, i)).or_default();
        e.0 += 1;
        e.1.insert(c.mmsi);
    }
    let mut out: BTreeMap<Category, CueTally> = Category::ALL.iter().map(|c| (*c, CueTally::default())).collect();
    for (cat, (n, m)) in points {
        let t = out.get_mut(&cat).expect("all categories present");
        t.points = n;
        t.mmsis = m.len();
    }
    for e in stage3.events.iter().filter(|e| e.kind == kind) {
        out.get_mut(&e.category).expect("all categories present").clusters += 1;
    }
    out
}

/// Brute-force neighbour relation, kept for testing the grid index.
pub fn st_neighbors_naive(cues: &[AnomalyCue], i: usize, eps_s: f64, eps_t: f64) -> Vec<usize> {
    let eps_t_ms = libm::round(eps_t * 1000.0) as i64;
    (0..cues.len())
        .filter(|&j| {
            j != i
                && (cues[i].t.0 - cues[j].t.0).abs() < eps_t_ms
                && geodesic_distance(cues[i].pos, cues[j].pos) < eps_s
        })
        .collect()
}
