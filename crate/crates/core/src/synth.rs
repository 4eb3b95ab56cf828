//! Seeded synthetic AIS traffic with planted anomalies, its ground truth, and
//! the event-level evaluator that scores detector output against it.
//!
//! Background vessels steer between random waypoints inside the scenario
//! region with bounded turn rate and acceleration. Fleet vessels loiter inside
//! a small disc and are the usual targets of area injections; background
//! vessels keep clear of fleet discs so that an area injection touches exactly
//! the fleet. Every record an injection creates, moves, relabels or deletes
//! carries one truth label.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::BoundingBox;
use crate::geo::{geodesic_distance, project_unchecked, unproject, GeoPos, PlanarPos};
use crate::imm::{ctrv_transition, wrap_angle, StateVec, PSI, PX, PY, V, YAW_RATE};
use crate::model::{canonical_cmp, AisRecord, EpochMs, Mmsi};
use crate::st_cluster::{Category, CueKind, StEvent};

/// 2024-11-01T00:00:00Z.
pub const DEFAULT_START_MS: i64 = 1_730_419_200_000;
pub const FIRST_MMSI: u32 = 440_000_001;
/// Re-emission delay of stale copies, s.
pub const DEFAULT_STALE_DELAY_S: f64 = 57.02;
/// Shortest duplication window; shorter windows would not form a sub-track
/// under the default detector parameters.
pub const MIN_DUPLICATION_S: f64 = 900.0;

const POS_NOISE_M: f64 = 5.0;
const SOG_NOISE_MPS: f64 = 0.05;
const COG_NOISE_DEG: f64 = 0.5;
const MAX_YAW_RATE: f64 = 0.02;
const MAX_ACCEL: f64 = 0.05;
const STEER_GAIN: f64 = 0.05;
const REGION_MARGIN_M: f64 = 5_000.0;
const WAYPOINT_TRIES: usize = 64;

fn default_region() -> BoundingBox {
    BoundingBox { lat_min: 33.0, lat_max: 34.5, lon_min: 125.0, lon_max: 127.5 }
}
fn default_start() -> i64 {
    DEFAULT_START_MS
}
fn default_interval() -> f64 {
    10.0
}
fn default_clearance() -> f64 {
    25_000.0
}
fn default_speed_range() -> [f64; 2] {
    [2.0, 12.0]
}
fn default_fleet_speed_range() -> [f64; 2] {
    [2.0, 6.0]
}
fn default_displacement() -> [f64; 2] {
    [2_000.0, 0.0]
}
fn default_stale_delay() -> f64 {
    DEFAULT_STALE_DELAY_S
}
fn default_episode() -> f64 {
    300.0
}
fn default_every_k() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default = "default_region")]
    pub region: BoundingBox,
    #[serde(default = "default_start")]
    pub start_ms: i64,
    pub duration_s: f64,
    /// Background vessels.
    pub n_vessels: usize,
    #[serde(default = "default_interval")]
    pub report_interval_s: f64,
    /// Background target speeds, m/s.
    #[serde(default = "default_speed_range")]
    pub speed_range: [f64; 2],
    #[serde(default)]
    pub fleets: Vec<Fleet>,
    /// Background vessels stay this far outside every fleet disc, m.
    #[serde(default = "default_clearance")]
    pub fleet_clearance_m: f64,
    #[serde(default)]
    pub injections: Vec<Injection>,
}

/// Vessels loitering inside a disc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fleet {
    pub center: GeoPos,
    pub radius_m: f64,
    pub n_vessels: usize,
    #[serde(default = "default_fleet_speed_range")]
    pub speed_range: [f64; 2],
}

/// A planted anomaly. Times are seconds after the scenario start. Injections
/// aimed at one vessel take it from `vessel` (index in MMSI order) or, when
/// absent, pick the vessel closest to `center` at the window start among
/// those no earlier injection has touched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Injection {
    /// Shifts every fix inside the disc and window by `displacement_m`
    /// (east, north).
    Spoofing {
        center: GeoPos,
        radius_m: f64,
        start_s: f64,
        duration_s: f64,
        #[serde(default = "default_displacement")]
        displacement_m: [f64; 2],
    },
    /// Deletes every fix inside the disc during `pulses` on-phases.
    Jamming { center: GeoPos, radius_m: f64, start_s: f64, on_s: f64, off_s: f64, pulses: u32 },
    /// Rewrites the in-window fixes of the untouched vessel farthest from the
    /// victim to the victim's MMSI.
    MmsiDuplication {
        center: GeoPos,
        start_s: f64,
        duration_s: f64,
        #[serde(default)]
        vessel: Option<usize>,
    },
    /// Re-emits `count` in-window fixes unchanged `delay_s` later.
    StaleRetransmission {
        center: GeoPos,
        start_s: f64,
        duration_s: f64,
        count: usize,
        #[serde(default = "default_stale_delay")]
        delay_s: f64,
        #[serde(default)]
        vessel: Option<usize>,
    },
    PersistentSensor(SensorArtifact),
    TransientSensor(SensorArtifact),
}

/// A receiver-side position fault: during one short episode per listed day,
/// every `every_k`-th fix of one vessel lands in the deviation disc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorArtifact {
    pub center: GeoPos,
    pub radius_m: f64,
    /// Day offsets from the scenario start.
    pub days: Vec<u32>,
    /// Episode start within each day, s.
    pub episode_start_s: f64,
    #[serde(default = "default_episode")]
    pub episode_s: f64,
    #[serde(default = "default_every_k")]
    pub every_k: usize,
    #[serde(default)]
    pub vessel: Option<usize>,
}

impl Injection {
    pub fn label(&self) -> TruthLabel {
        match self {
            Injection::Spoofing { .. } => TruthLabel::Spoofing,
            Injection::Jamming { .. } => TruthLabel::Jamming,
            Injection::MmsiDuplication { .. } => TruthLabel::MmsiDuplication,
            Injection::StaleRetransmission { .. } => TruthLabel::StaleRetransmission,
            Injection::PersistentSensor(_) => TruthLabel::PersistentSensor,
            Injection::TransientSensor(_) => TruthLabel::TransientSensor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthLabel {
    Spoofing,
    Jamming,
    MmsiDuplication,
    StaleRetransmission,
    PersistentSensor,
    TransientSensor,
}

impl TruthLabel {
    /// Labels scored at event level.
    pub const EVENTS: [TruthLabel; 4] =
        [TruthLabel::Spoofing, TruthLabel::Jamming, TruthLabel::PersistentSensor, TruthLabel::TransientSensor];

    pub fn as_str(self) -> &'static str {
        match self {
            TruthLabel::Spoofing => "spoofing",
            TruthLabel::Jamming => "jamming",
            TruthLabel::MmsiDuplication => "mmsi_duplication",
            TruthLabel::StaleRetransmission => "stale_retransmission",
            TruthLabel::PersistentSensor => "persistent_sensor",
            TruthLabel::TransientSensor => "transient_sensor",
        }
    }

    /// The label a detected category claims. Unscreened clusters claim the
    /// interference type their cue kind stands for.
    pub fn claimed(category: Category, kind: CueKind) -> Option<TruthLabel> {
        match category {
            Category::Noise => None,
            Category::PersistentSensor => Some(TruthLabel::PersistentSensor),
            Category::TransientSensor => Some(TruthLabel::TransientSensor),
            Category::Spoofing => Some(TruthLabel::Spoofing),
            Category::Jamming => Some(TruthLabel::Jamming),
            Category::Unscreened => Some(match kind {
                CueKind::Kinematic => TruthLabel::Spoofing,
                CueKind::TxGap => TruthLabel::Jamming,
            }),
        }
    }

    pub fn is_interference(self) -> bool {
        matches!(self, TruthLabel::Spoofing | TruthLabel::Jamming)
    }
}

/// Truth for one record, keyed by its final MMSI and timestamp. Deleted
/// records are absent from the generated stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub mmsi: Mmsi,
    pub t: EpochMs,
    pub label: TruthLabel,
    #[serde(default)]
    pub deleted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub id: usize,
    /// Index of the injection that produced it.
    pub injection: usize,
    pub label: TruthLabel,
    pub center: GeoPos,
    /// Largest distance of an affected fix from `center`, m.
    pub radius_m: f64,
    pub t_start: EpochMs,
    pub t_end: EpochMs,
    /// Affected vessels, ascending.
    pub mmsis: Vec<Mmsi>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub events: Vec<TruthEvent>,
    /// Sorted by (mmsi, t). Unlisted records are normal traffic.
    pub records: Vec<LabeledRecord>,
}

impl GroundTruth {
    /// Records carrying `label` that are present in the stream.
    pub fn present_count(&self, label: TruthLabel) -> usize {
        self.records.iter().filter(|r| r.label == label && !r.deleted).count()
    }

    pub fn deleted_count(&self) -> usize {
        self.records.iter().filter(|r| r.deleted).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutput {
    /// Canonical order.
    pub records: Vec<AisRecord>,
    pub truth: GroundTruth,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("injection {0} affects no records")]
    EmptyInjection(usize),
    #[error("injection {0} touches records already claimed by an earlier injection")]
    OverlappingInjection(usize),
}

fn invalid(what: &str) -> SynthError {
    SynthError::Invalid(what.into())
}

impl Scenario {
    /// Background vessels first, then fleets in order.
    pub fn total_vessels(&self) -> usize {
        self.n_vessels + self.fleets.iter().map(|f| f.n_vessels).sum::<usize>()
    }

    pub fn vessel_mmsi(i: usize) -> Mmsi {
        Mmsi(FIRST_MMSI + i as u32)
    }

    pub fn end_ms(&self) -> i64 {
        self.start_ms + libm::round(self.duration_s * 1000.0) as i64
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.region.validate().map_err(|_| invalid("region"))?;
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid("duration_s must be positive"));
        }
        if !(self.report_interval_s.is_finite() && self.report_interval_s >= 1.0) {
            return Err(invalid("report_interval_s must be at least 1"));
        }
        check_speed_range(self.speed_range, "speed_range")?;
        non_negative(self.fleet_clearance_m, "fleet_clearance_m")?;
        if FIRST_MMSI as u64 + self.total_vessels() as u64 > Mmsi::MAX as u64 {
            return Err(invalid("too many vessels"));
        }
        for f in &self.fleets {
            if !self.region.contains(f.center.lat, f.center.lon) {
                return Err(invalid("fleet center outside region"));
            }
            positive(f.radius_m, "fleet radius_m must be positive")?;
            check_speed_range(f.speed_range, "fleet speed_range")?;
        }
        for inj in &self.injections {
            self.validate_injection(inj)?;
        }
        Ok(())
    }

    fn validate_injection(&self, inj: &Injection) -> Result<(), SynthError> {
        let window = |start: f64, dur: f64| {
            if start >= 0.0 && dur > 0.0 && start + dur <= self.duration_s {
                Ok(())
            } else {
                Err(invalid("injection window outside the scenario"))
            }
        };
        let vessel = |v: &Option<usize>| match v {
            Some(i) if *i >= self.total_vessels() => Err(invalid("injection vessel index out of range")),
            _ => Ok(()),
        };
        match inj {
            Injection::Spoofing { radius_m, start_s, duration_s, displacement_m, .. } => {
                window(*start_s, *duration_s)?;
                positive(*radius_m, "spoofing radius_m")?;
                if !displacement_m.iter().all(|d| d.is_finite()) {
                    return Err(invalid("spoofing displacement_m"));
                }
            }
            Injection::Jamming { radius_m, start_s, on_s, off_s, pulses, .. } => {
                positive(*radius_m, "jamming radius_m")?;
                positive(*on_s, "jamming on_s")?;
                non_negative(*off_s, "jamming off_s")?;
                if *pulses == 0 {
                    return Err(invalid("jamming pulses"));
                }
                window(*start_s, (*pulses - 1) as f64 * (on_s + off_s) + on_s)?;
            }
            Injection::MmsiDuplication { start_s, duration_s, vessel: v, .. } => {
                window(*start_s, *duration_s)?;
                if *duration_s < MIN_DUPLICATION_S {
                    return Err(invalid("duplication window shorter than 900 s"));
                }
                vessel(v)?;
            }
            Injection::StaleRetransmission { start_s, duration_s, count, delay_s, vessel: v, .. } => {
                window(*start_s, *duration_s)?;
                if *count == 0 {
                    return Err(invalid("stale count must be positive"));
                }
                positive(*delay_s, "stale delay_s")?;
                vessel(v)?;
            }
            Injection::PersistentSensor(s) | Injection::TransientSensor(s) => {
                positive(s.radius_m, "sensor radius_m")?;
                if s.days.is_empty() || s.every_k == 0 {
                    return Err(invalid("sensor days/every_k"));
                }
                for d in &s.days {
                    window(*d as f64 * 86_400.0 + s.episode_start_s, s.episode_s)?;
                }
                vessel(&s.vessel)?;
            }
        }
        Ok(())
    }
}

fn positive(v: f64, what: &str) -> Result<(), SynthError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(what))
    }
}

fn non_negative(v: f64, what: &str) -> Result<(), SynthError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(what))
    }
}

fn check_speed_range(r: [f64; 2], what: &str) -> Result<(), SynthError> {
    if r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite() {
        Ok(())
    } else {
        Err(invalid(what))
    }
}

/// Where a vessel may pick its next waypoint, in the region plane.
enum Zone {
    Region { half_w: f64, half_h: f64, keep_out: Vec<(f64, f64, f64)> },
    Disc { cx: f64, cy: f64, r: f64 },
}

impl Zone {
    fn sample(&self, rng: &mut ChaCha8Rng, from: (f64, f64)) -> (f64, f64) {
        match self {
            Zone::Disc { cx, cy, r } => {
                let (dx, dy) = uniform_disc(rng, *r);
                (cx + dx, cy + dy)
            }
            Zone::Region { half_w, half_h, keep_out } => {
                let mut fallback = None;
                for _ in 0..WAYPOINT_TRIES {
                    let p = (rng.random_range(-half_w..=*half_w), rng.random_range(-half_h..=*half_h));
                    if keep_out.iter().all(|&(x, y, r)| libm::hypot(p.0 - x, p.1 - y) > r) {
                        if keep_out.iter().all(|&(x, y, r)| segment_point_distance(from, p, (x, y)) > r) {
                            return p;
                        }
                        fallback.get_or_insert(p);
                    }
                }
                fallback.unwrap_or(from)
            }
        }
    }
}

fn uniform_disc(rng: &mut ChaCha8Rng, r: f64) -> (f64, f64) {
    let rho = r * libm::sqrt(rng.random::<f64>());
    let th = rng.random_range(0.0..2.0 * PI);
    (rho * libm::cos(th), rho * libm::sin(th))
}

fn segment_point_distance(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    libm::hypot(a.0 + s * dx - p.0, a.1 + s * dy - p.1)
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    sigma * rng.sample::<f64, _>(StandardNormal)
}

fn round_to(v: f64, scale: f64) -> f64 {
    libm::round(v * scale) / scale
}

fn round_pos(p: GeoPos) -> GeoPos {
    GeoPos::new(round_to(p.lat, 1e6), round_to(p.lon, 1e6))
}

struct VesselSpec {
    start: (f64, f64),
    zone: Zone,
    speed_range: [f64; 2],
}

/// Simulates one vessel and emits its reports from `t_first` to `t_end`.
fn simulate_vessel(
    spec: &VesselSpec,
    origin: GeoPos,
    mmsi: Mmsi,
    t_first: i64,
    t_end: i64,
    interval_ms: i64,
    rng: &mut ChaCha8Rng,
) -> Vec<AisRecord> {
    let pick_speed = |rng: &mut ChaCha8Rng| rng.random_range(spec.speed_range[0]..=spec.speed_range[1]);
    let mut x = StateVec::zeros();
    x[PX] = spec.start.0;
    x[PY] = spec.start.1;
    x[V] = pick_speed(rng);
    x[PSI] = rng.random_range(-PI..PI);
    let mut target = spec.zone.sample(rng, spec.start);
    let mut target_speed = x[V];

    let interval = interval_ms as f64 / 1000.0;
    let n_sub = libm::ceil(interval / 2.0).max(1.0) as usize;
    let h = interval / n_sub as f64;

    let mut out = Vec::with_capacity(((t_end - t_first).max(0) / interval_ms + 1) as usize);
    let mut t = t_first;
    while t <= t_end {
        let p = unproject(&PlanarPos {
            x: x[PX] + gauss(rng, POS_NOISE_M),
            y: x[PY] + gauss(rng, POS_NOISE_M),
            origin,
        });
        let p = round_pos(p);
        let sog = round_to((x[V] + gauss(rng, SOG_NOISE_MPS)).max(0.0), 100.0);
        let cog_true = libm::fmod(90.0 - x[PSI].to_degrees() + 720.0, 360.0);
        let mut cog = round_to(libm::fmod(cog_true + gauss(rng, COG_NOISE_DEG) + 360.0, 360.0), 10.0);
        if cog >= 360.0 {
            cog = 0.0;
        }
        out.push(AisRecord { mmsi, t: EpochMs(t), lat: p.lat, lon: p.lon, sog, cog, heading: None });

        for _ in 0..n_sub {
            let (dx, dy) = (target.0 - x[PX], target.1 - x[PY]);
            let reach = (2.0 * x[V] / MAX_YAW_RATE).max(300.0);
            if libm::hypot(dx, dy) < reach {
                target = spec.zone.sample(rng, (x[PX], x[PY]));
                target_speed = pick_speed(rng);
            }
            let err = wrap_angle(libm::atan2(target.1 - x[PY], target.0 - x[PX]) - x[PSI]);
            x[YAW_RATE] = (STEER_GAIN * err).clamp(-MAX_YAW_RATE, MAX_YAW_RATE);
            x = ctrv_transition(&x, h, 1e-4);
            x[PSI] = wrap_angle(x[PSI]);
            x[V] += (target_speed - x[V]).clamp(-MAX_ACCEL * h, MAX_ACCEL * h);
        }
        t += interval_ms;
    }
    out
}

/// One vessel's reports with a parallel truth label per report.
struct VesselLog {
    records: Vec<AisRecord>,
    labels: Vec<Option<TruthLabel>>,
}

impl VesselLog {
    /// Position at the report closest in time to `t`.
    fn position_near(&self, t: i64) -> Option<GeoPos> {
        self.records.iter().min_by_key(|r| (r.t.0 - t).abs()).map(AisRecord::pos)
    }

    fn indices_in(&self, t0: i64, t1: i64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.records.len()).filter(|&i| (t0..=t1).contains(&self.records[i].t.0)).collect();
        idx.sort_by_key(|&i| self.records[i].t);
        idx
    }
}

struct World {
    logs: Vec<VesselLog>,
    deleted: Vec<LabeledRecord>,
    events: Vec<TruthEvent>,
    start_ms: i64,
}

impl World {
    fn at(&self, s: f64) -> i64 {
        self.start_ms + libm::round(s * 1000.0) as i64
    }

    fn claim(&mut self, inj: usize, vessel: usize, i: usize, label: TruthLabel) -> Result<(), SynthError> {
        let slot = &mut self.logs[vessel].labels[i];
        if slot.is_some() {
            return Err(SynthError::OverlappingInjection(inj));
        }
        *slot = Some(label);
        Ok(())
    }

    fn untouched(&self, v: usize) -> bool {
        self.logs[v].labels.iter().all(Option::is_none)
    }

    /// Nearest vessel no earlier injection has touched.
    fn nearest_vessel(&self, center: GeoPos, t: i64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (v, log) in self.logs.iter().enumerate().filter(|(v, _)| self.untouched(*v)) {
            if let Some(p) = log.position_near(t) {
                let d = geodesic_distance(center, p);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, v));
                }
            }
        }
        best.map(|(_, v)| v)
    }

    fn pick_vessel(&self, explicit: Option<usize>, center: GeoPos, t: i64, inj: usize) -> Result<usize, SynthError> {
        explicit.or_else(|| self.nearest_vessel(center, t)).ok_or(SynthError::EmptyInjection(inj))
    }

    fn push_event(&mut self, inj: usize, label: TruthLabel, center: GeoPos, hits: &[(Mmsi, EpochMs, GeoPos)]) {
        let mmsis: BTreeSet<Mmsi> = hits.iter().map(|h| h.0).collect();
        let t_start = hits.iter().map(|h| h.1).min().unwrap_or(EpochMs(self.start_ms));
        let t_end = hits.iter().map(|h| h.1).max().unwrap_or(t_start);
        let radius_m = hits.iter().map(|h| geodesic_distance(center, h.2)).fold(0.0, f64::max);
        self.events.push(TruthEvent {
            id: self.events.len(),
            injection: inj,
            label,
            center,
            radius_m,
            t_start,
            t_end,
            mmsis: mmsis.into_iter().collect(),
        });
    }

    fn apply(&mut self, inj_idx: usize, inj: &Injection, rng: &mut ChaCha8Rng) -> Result<(), SynthError> {
        let label = inj.label();
        let mut hits: Vec<(Mmsi, EpochMs, GeoPos)> = Vec::new();
        match inj {
            Injection::Spoofing { center, radius_m, start_s, duration_s, displacement_m } => {
                let (t0, t1) = (self.at(*start_s), self.at(start_s + duration_s));
                for v in 0..self.logs.len() {
                    for i in self.logs[v].indices_in(t0, t1) {
                        let r = self.logs[v].records[i];
                        if geodesic_distance(*center, r.pos()) > *radius_m {
                            continue;
                        }
                        self.claim(inj_idx, v, i, label)?;
                        let moved = round_pos(unproject(&PlanarPos {
                            x: displacement_m[0],
                            y: displacement_m[1],
                            origin: r.pos(),
                        }));
                        let rec = &mut self.logs[v].records[i];
                        rec.lat = moved.lat;
                        rec.lon = moved.lon;
                        hits.push((r.mmsi, r.t, r.pos()));
                    }
                }
                self.finish(inj_idx, label, *center, hits)
            }
            Injection::Jamming { center, radius_m, start_s, on_s, off_s, pulses } => {
                for p in 0..*pulses {
                    let s0 = start_s + p as f64 * (on_s + off_s);
                    let (t0, t1) = (self.at(s0), self.at(s0 + on_s));
                    for v in 0..self.logs.len() {
                        let log = &mut self.logs[v];
                        let mut k = 0;
                        while k < log.records.len() {
                            let r = log.records[k];
                            if r.t.0 >= t0 && r.t.0 < t1 && geodesic_distance(*center, r.pos()) <= *radius_m {
                                if log.labels[k].is_some() {
                                    return Err(SynthError::OverlappingInjection(inj_idx));
                                }
                                log.records.remove(k);
                                log.labels.remove(k);
                                self.deleted.push(LabeledRecord { mmsi: r.mmsi, t: r.t, label, deleted: true });
                                hits.push((r.mmsi, r.t, r.pos()));
                            } else {
                                k += 1;
                            }
                        }
                    }
                }
                self.finish(inj_idx, label, *center, hits)
            }
            Injection::MmsiDuplication { center, start_s, duration_s, vessel } => {
                let (t0, t1) = (self.at(*start_s), self.at(start_s + duration_s));
                let victim = self.pick_vessel(*vessel, *center, t0, inj_idx)?;
                let victim_pos = self.logs[victim].position_near(t0).ok_or(SynthError::EmptyInjection(inj_idx))?;
                let donor = (0..self.logs.len())
                    .filter(|&v| v != victim && self.untouched(v))
                    .filter_map(|v| self.logs[v].position_near(t0).map(|p| (geodesic_distance(victim_pos, p), v)))
                    .fold(None, |best: Option<(f64, usize)>, c| if best.is_none_or(|b| c.0 > b.0) { Some(c) } else { best })
                    .map(|(_, v)| v)
                    .ok_or(SynthError::EmptyInjection(inj_idx))?;
                let victim_mmsi = Scenario::vessel_mmsi(victim);
                let moved = self.logs[donor].indices_in(t0, t1);
                if moved.is_empty() || self.logs[victim].records.is_empty() {
                    return Err(SynthError::EmptyInjection(inj_idx));
                }
                for i in 0..self.logs[victim].records.len() {
                    self.claim(inj_idx, victim, i, label)?;
                    let r = self.logs[victim].records[i];
                    hits.push((r.mmsi, r.t, r.pos()));
                }
                for i in moved {
                    self.claim(inj_idx, donor, i, label)?;
                    let rec = &mut self.logs[donor].records[i];
                    rec.mmsi = victim_mmsi;
                    hits.push((rec.mmsi, rec.t, rec.pos()));
                }
                self.finish(inj_idx, label, victim_pos, hits)
            }
            Injection::StaleRetransmission { center, start_s, duration_s, count, delay_s, vessel } => {
                let (t0, t1) = (self.at(*start_s), self.at(start_s + duration_s));
                let v = self.pick_vessel(*vessel, *center, t0, inj_idx)?;
                let idx = self.logs[v].indices_in(t0, t1);
                if idx.is_empty() {
                    return Err(SynthError::EmptyInjection(inj_idx));
                }
                let n = (*count).min(idx.len());
                let delay_ms = libm::round(delay_s * 1000.0) as i64;
                for k in 0..n {
                    let i = idx[k * idx.len() / n];
                    if self.logs[v].labels[i].is_some() {
                        return Err(SynthError::OverlappingInjection(inj_idx));
                    }
                    let mut copy = self.logs[v].records[i];
                    copy.t = EpochMs(copy.t.0 + delay_ms);
                    self.logs[v].records.push(copy);
                    self.logs[v].labels.push(Some(label));
                    hits.push((copy.mmsi, copy.t, copy.pos()));
                }
                let pos = self.logs[v].records[idx[0]].pos();
                self.finish(inj_idx, label, pos, hits)
            }
            Injection::PersistentSensor(s) | Injection::TransientSensor(s) => {
                let first = self.at(s.days[0] as f64 * 86_400.0 + s.episode_start_s);
                let v = self.pick_vessel(s.vessel, s.center, first, inj_idx)?;
                for day in &s.days {
                    let s0 = *day as f64 * 86_400.0 + s.episode_start_s;
                    let (t0, t1) = (self.at(s0), self.at(s0 + s.episode_s));
                    let mut day_hits = Vec::new();
                    for (k, i) in self.logs[v].indices_in(t0, t1).into_iter().enumerate() {
                        if k % s.every_k != 0 {
                            continue;
                        }
                        self.claim(inj_idx, v, i, label)?;
                        let (dx, dy) = uniform_disc(rng, s.radius_m);
                        let moved = round_pos(unproject(&PlanarPos { x: dx, y: dy, origin: s.center }));
                        let rec = &mut self.logs[v].records[i];
                        day_hits.push((rec.mmsi, rec.t, rec.pos()));
                        rec.lat = moved.lat;
                        rec.lon = moved.lon;
                    }
                    if day_hits.is_empty() {
                        return Err(SynthError::EmptyInjection(inj_idx));
                    }
                    self.push_event(inj_idx, label, s.center, &day_hits);
                }
                Ok(())
            }
        }
    }

    fn finish(
        &mut self,
        inj: usize,
        label: TruthLabel,
        center: GeoPos,
        hits: Vec<(Mmsi, EpochMs, GeoPos)>,
    ) -> Result<(), SynthError> {
        if hits.is_empty() {
            return Err(SynthError::EmptyInjection(inj));
        }
        self.push_event(inj, label, center, &hits);
        Ok(())
    }
}

fn vessel_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn generate_world(sc: &Scenario) -> World {
    let r = &sc.region;
    let origin = GeoPos::new((r.lat_min + r.lat_max) / 2.0, (r.lon_min + r.lon_max) / 2.0);
    let corner = project_unchecked(origin, GeoPos::new(r.lat_max, r.lon_max));
    let half_w = (corner.x - REGION_MARGIN_M).max(0.0);
    let half_h = (corner.y - REGION_MARGIN_M).max(0.0);

    let fleet_planar: Vec<(f64, f64, f64)> = sc
        .fleets
        .iter()
        .map(|f| {
            let c = project_unchecked(origin, f.center);
            (c.x, c.y, f.radius_m)
        })
        .collect();
    let keep_out: Vec<(f64, f64, f64)> =
        fleet_planar.iter().map(|&(x, y, r)| (x, y, r + sc.fleet_clearance_m)).collect();

    let interval_ms = libm::round(sc.report_interval_s * 1000.0) as i64;
    let end = sc.end_ms();
    let mut logs = Vec::with_capacity(sc.total_vessels());
    let mut specs: Vec<(VesselSpec, ChaCha8Rng)> = Vec::with_capacity(sc.total_vessels());
    for i in 0..sc.n_vessels {
        let mut rng = vessel_rng(sc.seed, i as u64 + 1);
        let zone = Zone::Region { half_w, half_h, keep_out: keep_out.clone() };
        let start = zone.sample(&mut rng, (half_w, half_h));
        specs.push((VesselSpec { start, zone, speed_range: sc.speed_range }, rng));
    }
    for (f, &(cx, cy, r)) in sc.fleets.iter().zip(&fleet_planar) {
        for _ in 0..f.n_vessels {
            let zone = Zone::Disc { cx, cy, r };
            let mut rng = vessel_rng(sc.seed, specs.len() as u64 + 1);
            let start = zone.sample(&mut rng, (cx, cy));
            specs.push((VesselSpec { start, zone, speed_range: f.speed_range }, rng));
        }
    }
    for (i, (spec, mut rng)) in specs.into_iter().enumerate() {
        let phase = (i as i64 * 997) % interval_ms;
        let records =
            simulate_vessel(&spec, origin, Scenario::vessel_mmsi(i), sc.start_ms + phase, end, interval_ms, &mut rng);
        let labels = alloc::vec![None; records.len()];
        logs.push(VesselLog { records, labels });
    }
    World { logs, deleted: Vec::new(), events: Vec::new(), start_ms: sc.start_ms }
}

/// Generates the scenario's record stream and its ground truth.
pub fn generate(sc: &Scenario) -> Result<SynthOutput, SynthError> {
    sc.validate()?;
    let mut world = generate_world(sc);
    let mut rng = vessel_rng(sc.seed, 0);
    for (k, inj) in sc.injections.iter().enumerate() {
        world.apply(k, inj, &mut rng)?;
    }

    let mut truth_records = world.deleted;
    let mut records = Vec::with_capacity(world.logs.iter().map(|l| l.records.len()).sum());
    for log in world.logs {
        for (r, l) in log.records.into_iter().zip(log.labels) {
            if let Some(label) = l {
                truth_records.push(LabeledRecord { mmsi: r.mmsi, t: r.t, label, deleted: false });
            }
            records.push(r);
        }
    }
    records.sort_by(canonical_cmp);
    truth_records.sort_by_key(|r| (r.mmsi, r.t, r.deleted));
    Ok(SynthOutput { records, truth: GroundTruth { events: world.events, records: truth_records } })
}

/// A detector event reduced to what the evaluator needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedEvent {
    pub category: Category,
    pub kind: CueKind,
    pub centroid: GeoPos,
    pub t_start: EpochMs,
    pub t_end: EpochMs,
    pub mmsis: Vec<Mmsi>,
}

impl From<&StEvent> for DetectedEvent {
    fn from(e: &StEvent) -> Self {
        DetectedEvent {
            category: e.category,
            kind: e.kind,
            centroid: e.centroid,
            t_start: e.t_start,
            t_end: e.t_end,
            mmsis: e.mmsis.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    /// Slack added to the truth radius, m.
    pub radius_m: f64,
    /// Slack on both ends of the truth window, s.
    pub window_s: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams { radius_m: 10_000.0, window_s: 1_800.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `None` when nothing was detected.
    pub precision: Option<f64>,
    /// `None` when nothing was planted.
    pub recall: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventMatch {
    pub detected: usize,
    pub truth_id: usize,
    /// Share of the truth event's vessels present in the detected event.
    pub mmsi_recall: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_label: BTreeMap<TruthLabel, LabelMetrics>,
    /// Unmatched detections claiming spoofing or jamming.
    pub false_alarms: usize,
    pub matches: Vec<EventMatch>,
}

fn matches_truth(d: &DetectedEvent, t: &TruthEvent, params: &MatchParams) -> bool {
    let slack = libm::round(params.window_s * 1000.0) as i64;
    d.t_start.0 <= t.t_end.0 + slack
        && t.t_start.0 <= d.t_end.0 + slack
        && geodesic_distance(d.centroid, t.center) <= t.radius_m + params.radius_m
        && d.mmsis.iter().any(|m| t.mmsis.binary_search(m).is_ok())
}

fn shared_mmsis(d: &DetectedEvent, t: &TruthEvent) -> usize {
    t.mmsis.iter().filter(|m| d.mmsis.contains(m)).count()
}

/// Greedy one-to-one matching in detection order. A detection matches an
/// unmatched truth event of the label it claims when their windows overlap
/// within the slack, the centroid lies inside the widened truth disc, and they
/// share a vessel. Among candidates the largest vessel overlap wins, then the
/// lowest truth id.
pub fn evaluate(detected: &[DetectedEvent], truth: &[TruthEvent], params: &MatchParams) -> Evaluation {
    let mut used = alloc::vec![false; truth.len()];
    let mut per_label: BTreeMap<TruthLabel, LabelMetrics> =
        TruthLabel::EVENTS.iter().map(|l| (*l, LabelMetrics::default())).collect();
    let mut matches = Vec::new();
    let mut false_alarms = 0;

    for (di, d) in detected.iter().enumerate() {
        let Some(claim) = TruthLabel::claimed(d.category, d.kind) else { continue };
        let best = truth
            .iter()
            .enumerate()
            .filter(|(ti, t)| !used[*ti] && t.label == claim && matches_truth(d, t, params))
            .max_by(|(ai, a), (bi, b)| shared_mmsis(d, a).cmp(&shared_mmsis(d, b)).then(bi.cmp(ai)));
        let m = per_label.entry(claim).or_default();
        match best {
            Some((ti, t)) => {
                used[ti] = true;
                m.true_positives += 1;
                let recall = if t.mmsis.is_empty() { 1.0 } else { shared_mmsis(d, t) as f64 / t.mmsis.len() as f64 };
                matches.push(EventMatch { detected: di, truth_id: t.id, mmsi_recall: recall });
            }
            None => {
                m.false_positives += 1;
                if claim.is_interference() {
                    false_alarms += 1;
                }
            }
        }
    }
    for (ti, t) in truth.iter().enumerate() {
        if !used[ti] {
            if let Some(m) = per_label.get_mut(&t.label) {
                m.false_negatives += 1;
            }
        }
    }
    for m in per_label.values_mut() {
        let claimed = m.true_positives + m.false_positives;
        let planted = m.true_positives + m.false_negatives;
        m.precision = (claimed > 0).then(|| m.true_positives as f64 / claimed as f64);
        m.recall = (planted > 0).then(|| m.true_positives as f64 / planted as f64);
    }
    Evaluation { per_label, false_alarms, matches }
}

/// Relative drop in false alarms against a baseline; `None` when the baseline
/// raised none.
pub fn false_alarm_reduction(full: usize, baseline: usize) -> Option<f64> {
    (baseline > 0).then(|| 1.0 - full as f64 / baseline as f64)
}
