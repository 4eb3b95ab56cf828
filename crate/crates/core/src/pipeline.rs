//! End-to-end orchestration over in-memory records and the stage-reduction
//! report.
//!
//! Order: preprocessing (exact duplicates, position scatter, bounding box),
//! stage 1 (stale retransmission then MMSI duplication), stage 2 (kinematic
//! and transmission-gap cues), stage 3 (clustering and categorization).
//! Per-vessel work goes through an [`Executor`]; results are merged in MMSI
//! order so the output does not depend on the executor.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::mem;

use serde::{Deserialize, Serialize};

use crate::coastline::Coastline;
use crate::comm_integrity::{clean_track, CleanTrack, CommLabel};
use crate::config::PipelineConfig;
use crate::exec::Executor;
use crate::imm::extract_kinematic_cues;
use crate::model::{dedup_exact, filter_bbox, filter_position_scatter, partition_by_mmsi, AisRecord, Mmsi, Track};
use crate::st_cluster::{
    categorize_all, operational_days, tally, AnomalyCue, Category, ClassifyContext, CueKind, Stage3, TrafficIndex,
};
use crate::tx_interval::{extract_gap_cues, profile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// All stages with the full event criteria.
    #[default]
    Full,
    /// Naive comparator: no stage 1, every cluster reported.
    Baseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Preprocess,
    Stage1,
    Stage2,
    Stage3,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Stage1 => "stage1",
            Stage::Stage2 => "stage2",
            Stage::Stage3 => "stage3",
        }
    }
}

/// One line of the stage-reduction table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub stage: Stage,
    pub process: String,
    /// `None` for rows that are not tied to a cue kind.
    pub cue_kind: Option<CueKind>,
    pub points: usize,
    pub mmsis: usize,
    /// Percentage (0-100) rounded to two decimals.
    pub pct: f64,
}

/// Stage-by-stage counts. Percentages are vessel shares: `mmsis` over the
/// distinct MMSIs of the input, except for the final-cluster rows, which give
/// the share of clusters of that cue kind that survive categorization.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct StageReport {
    pub input_mmsis: usize,
    pub rows: Vec<ReportRow>,
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        libm::round(part as f64 / whole as f64 * 10_000.0) / 100.0
    }
}

impl StageReport {
    fn push(&mut self, stage: Stage, process: &str, cue_kind: Option<CueKind>, points: usize, mmsis: usize) {
        let p = pct(mmsis, self.input_mmsis);
        self.rows.push(ReportRow { stage, process: process.into(), cue_kind, points, mmsis, pct: p });
    }

    pub fn row(&self, process: &str, cue_kind: Option<CueKind>) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.process == process && r.cue_kind == cue_kind)
    }
}

fn distinct_mmsis<'a>(records: impl IntoIterator<Item = &'a AisRecord>) -> usize {
    records.into_iter().map(|r| r.mmsi).collect::<BTreeSet<Mmsi>>().len()
}

/// Everything a run produces besides timing.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PipelineOutput {
    pub report: StageReport,
    pub stage3: Stage3,
    /// Records removed in stage 1 with their artifact label, MMSI-major.
    pub removed: Vec<(AisRecord, CommLabel)>,
    /// Vessels without a transmission profile.
    pub unprofiled: Vec<Mmsi>,
}

struct TrackCues {
    kinematic: Vec<AnomalyCue>,
    gaps: Vec<AnomalyCue>,
    profiled: bool,
}

fn stage2_track(track: &Track, cfg: &PipelineConfig) -> TrackCues {
    let kinematic = extract_kinematic_cues(&track.records, cfg).into_iter().map(AnomalyCue::from).collect();
    let prof = profile(track.mmsi, &track.records, cfg);
    let gaps = prof
        .as_ref()
        .map(|p| extract_gap_cues(&track.records, p).into_iter().map(AnomalyCue::from).collect())
        .unwrap_or_default();
    TrackCues { kinematic, gaps, profiled: prof.is_some() }
}

/// Runs every stage. `on_stage` is called as each stage completes, which lets
/// callers time stages without the core needing a clock.
pub fn run_pipeline<E: Executor>(
    records: Vec<AisRecord>,
    cfg: &PipelineConfig,
    coastline: Option<&Coastline>,
    mode: Mode,
    exec: &E,
    on_stage: &mut dyn FnMut(Stage),
) -> PipelineOutput {
    let mut report = StageReport { input_mmsis: distinct_mmsis(&records), rows: Vec::new() };

    // Preprocessing.
    let n_input = records.len();
    report.push(Stage::Preprocess, "input_records", None, n_input, report.input_mmsis);
    let (records, dups) = dedup_and_count(records);
    report.push(Stage::Preprocess, "exact_duplicates_removed", None, dups.0, dups.1);
    let (records, scatter) = scatter_and_count(records, cfg.d_scatter);
    report.push(Stage::Preprocess, "position_scatter_removed", None, scatter.0, scatter.1);
    let (records, outside) = bbox_and_count(records, cfg);
    report.push(Stage::Preprocess, "outside_bbox_removed", None, outside.0, outside.1);
    let retained_mmsis = distinct_mmsis(&records);
    report.push(Stage::Preprocess, "records_retained", None, records.len(), retained_mmsis);
    let mut tracks: Vec<Track> = partition_by_mmsi(records).into_values().collect();
    on_stage(Stage::Preprocess);

    // Stage 1.
    let mut removed = Vec::new();
    if mode == Mode::Full {
        let cleaned: Vec<CleanTrack> = exec.map_mut(&mut tracks, |t| clean_track(mem::take(t), cfg));
        tracks = Vec::with_capacity(cleaned.len());
        for c in cleaned {
            removed.extend(c.removed);
            if !c.track.is_empty() {
                tracks.push(c.track);
            }
        }
    }
    for (process, kind) in [
        ("mmsi_duplication_removed", CommLabel::MmsiDuplication),
        ("stale_retransmission_removed", CommLabel::StaleRetransmission),
    ] {
        let recs: Vec<&AisRecord> = removed.iter().filter(|(_, k)| *k == kind).map(|(r, _)| r).collect();
        report.push(Stage::Stage1, process, None, recs.len(), distinct_mmsis(recs.iter().copied()));
    }
    on_stage(Stage::Stage1);

    // Stage 2.
    let per_track: Vec<TrackCues> = exec.map(&tracks, |t| stage2_track(t, cfg));
    let mut kinematic = Vec::new();
    let mut gaps = Vec::new();
    let mut unprofiled = Vec::new();
    let mut unprofiled_points = 0;
    for (t, c) in tracks.iter().zip(per_track) {
        kinematic.extend(c.kinematic);
        gaps.extend(c.gaps);
        if !c.profiled {
            unprofiled.push(t.mmsi);
            unprofiled_points += t.len();
        }
    }
    let cue_mmsis = |cues: &[AnomalyCue]| cues.iter().map(|c| c.mmsi).collect::<BTreeSet<Mmsi>>().len();
    report.push(Stage::Stage2, "kinematic_cues", Some(CueKind::Kinematic), kinematic.len(), cue_mmsis(&kinematic));
    report.push(Stage::Stage2, "tx_gap_cues", Some(CueKind::TxGap), gaps.len(), cue_mmsis(&gaps));
    report.push(Stage::Stage2, "unprofiled_vessels", None, unprofiled_points, unprofiled.len());
    on_stage(Stage::Stage2);

    // Stage 3.
    let traffic = TrafficIndex::new(&tracks);
    let days = operational_days(&tracks);
    let ctx = ClassifyContext { traffic: &traffic, coastline, operational_days: &days };
    let stage3 = categorize_all(kinematic, gaps, &ctx, cfg, mode == Mode::Full);
    for kind in [CueKind::Kinematic, CueKind::TxGap] {
        let t = tally(&stage3, kind);
        let mut categories: Vec<Category> = Category::ALL.iter().copied().filter(|c| *c != Category::Unscreened).collect();
        if mode == Mode::Baseline {
            categories.push(Category::Unscreened);
        }
        for cat in categories {
            report.push(Stage::Stage3, cat.as_str(), Some(kind), t[&cat].points, t[&cat].mmsis);
        }
        let finals: Vec<_> = stage3.events.iter().filter(|e| e.kind == kind && is_final(e.category)).collect();
        let all_clusters = stage3.events.iter().filter(|e| e.kind == kind).count();
        let mmsis: BTreeSet<Mmsi> = finals.iter().flat_map(|e| e.mmsis.iter().copied()).collect();
        report.rows.push(ReportRow {
            stage: Stage::Stage3,
            process: "final_clusters".into(),
            cue_kind: Some(kind),
            points: finals.len(),
            mmsis: mmsis.len(),
            pct: pct(finals.len(), all_clusters),
        });
    }
    on_stage(Stage::Stage3);

    removed.sort_by(|a, b| a.0.mmsi.cmp(&b.0.mmsi).then_with(|| crate::model::track_cmp(&a.0, &b.0)));
    PipelineOutput { report, stage3, removed, unprofiled }
}

/// Categories that count as detected interference events.
pub fn is_final(c: Category) -> bool {
    matches!(c, Category::Spoofing | Category::Jamming | Category::Unscreened)
}

type Removed = (usize, usize);

fn dedup_and_count(records: Vec<AisRecord>) -> (Vec<AisRecord>, Removed) {
    let mut sorted = records;
    sorted.sort_unstable_by(crate::model::canonical_cmp);
    let mut mmsis = BTreeSet::new();
    for w in sorted.windows(2) {
        if w[0].mmsi == w[1].mmsi && w[0].t == w[1].t && w[0].nav_key() == w[1].nav_key() {
            mmsis.insert(w[1].mmsi);
        }
    }
    let (out, n) = dedup_exact(sorted);
    (out, (n, mmsis.len()))
}

fn scatter_and_count(records: Vec<AisRecord>, d: f64) -> (Vec<AisRecord>, Removed) {
    // every (t, mmsi) group of two or more loses at least one record
    let mut mmsis = BTreeSet::new();
    for w in records.windows(2) {
        if w[0].mmsi == w[1].mmsi && w[0].t == w[1].t {
            mmsis.insert(w[0].mmsi);
        }
    }
    let (out, n) = filter_position_scatter(records, d);
    (out, (n, mmsis.len()))
}

fn bbox_and_count(records: Vec<AisRecord>, cfg: &PipelineConfig) -> (Vec<AisRecord>, Removed) {
    let mmsis: BTreeSet<Mmsi> = records.iter().filter(|r| !cfg.bbox.contains(r.lat, r.lon)).map(|r| r.mmsi).collect();
    let (out, n) = filter_bbox(records, &cfg.bbox);
    (out, (n, mmsis.len()))
}
