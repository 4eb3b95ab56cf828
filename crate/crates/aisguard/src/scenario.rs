//! Scenario documents, the truth sidecar, and the evaluation report.

use std::io::{self, BufRead, Write};
use std::path::Path;

use aisguard_core::synth::{
    evaluate, false_alarm_reduction, DetectedEvent, Evaluation, GroundTruth, LabeledRecord, MatchParams, Scenario,
    SynthOutput, TruthEvent,
};
use serde::{Deserialize, Serialize};

use crate::config::{read_text, LoadError};
use crate::ingest::write_ndjson;
use crate::run::{write_atomic, FileDigest, RunError};

pub const RECORDS_FILE: &str = "records.ndjson";
pub const TRUTH_FILE: &str = "truth.ndjson";

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let sc: Scenario = serde_json::from_str(&read_text(path)?)
        .map_err(|source| LoadError::Json { path: path.to_path_buf(), source })?;
    sc.validate().map_err(|e| LoadError::Invalid { path: path.to_path_buf(), reason: e.to_string() })?;
    Ok(sc)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TruthLine {
    Event(TruthEvent),
    Record(LabeledRecord),
}

/// Events first, then labeled records, one JSON object per line.
pub fn write_truth<W: Write>(mut w: W, truth: &GroundTruth) -> io::Result<()> {
    for e in &truth.events {
        serde_json::to_writer(&mut w, &TruthLine::Event(e.clone()))?;
        w.write_all(b"\n")?;
    }
    for r in &truth.records {
        serde_json::to_writer(&mut w, &TruthLine::Record(*r))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_truth<R: BufRead>(r: R) -> io::Result<GroundTruth> {
    let mut truth = GroundTruth::default();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TruthLine = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
        match parsed {
            TruthLine::Event(e) => truth.events.push(e),
            TruthLine::Record(r) => truth.records.push(r),
        }
    }
    Ok(truth)
}

/// Writes the generated stream and its truth sidecar into `dir`.
pub fn write_synth(dir: &Path, out: &SynthOutput) -> Result<Vec<FileDigest>, RunError> {
    std::fs::create_dir_all(dir).map_err(|source| RunError::Write { path: dir.to_path_buf(), source })?;
    Ok(vec![
        write_atomic(dir, RECORDS_FILE, |w| write_ndjson(w, &out.records))?,
        write_atomic(dir, TRUTH_FILE, |w| write_truth(w, &out.truth))?,
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub params: MatchParams,
    pub detected: usize,
    pub truth_events: usize,
    pub evaluation: Evaluation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Evaluation>,
    /// `1 - full / baseline` false alarms; absent without a baseline or when
    /// the baseline raised none.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_alarm_reduction: Option<f64>,
}

pub fn eval_report(
    detected: &[DetectedEvent],
    baseline: Option<&[DetectedEvent]>,
    truth: &[TruthEvent],
    params: MatchParams,
) -> EvalReport {
    let evaluation = evaluate(detected, truth, &params);
    let baseline = baseline.map(|b| evaluate(b, truth, &params));
    let reduction = baseline.as_ref().and_then(|b| false_alarm_reduction(evaluation.false_alarms, b.false_alarms));
    EvalReport {
        params,
        detected: detected.len(),
        truth_events: truth.len(),
        evaluation,
        baseline,
        false_alarm_reduction: reduction,
    }
}
