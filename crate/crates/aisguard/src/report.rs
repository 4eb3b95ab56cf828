//! The stage-reduction table as CSV and JSON.
//!
//! Both forms carry the same values: `pct` is already rounded to two decimals
//! in the report and is printed with exactly two decimals in the CSV.

use std::io::{self, Write};

use aisguard_core::pipeline::ReportRow;
use aisguard_core::StageReport;
use serde::Serialize;

pub const CSV_HEADER: [&str; 6] = ["stage", "process", "cue_kind", "points", "mmsis", "pct"];

/// How `pct` is computed, repeated in the JSON form.
pub const PCT_BASE: &str = "percent of distinct input MMSIs; final_clusters rows: percent of clusters of that cue kind";

fn cue_kind_str(row: &ReportRow) -> &'static str {
    row.cue_kind.map_or("n/a", |k| k.as_str())
}

pub fn write_csv<W: Write>(w: W, report: &StageReport) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in &report.rows {
        out.write_record([
            r.stage.as_str(),
            &r.process,
            cue_kind_str(r),
            &r.points.to_string(),
            &r.mmsis.to_string(),
            &format!("{:.2}", r.pct),
        ])?;
    }
    out.flush()
}

#[derive(Serialize)]
struct JsonRow<'a> {
    stage: &'static str,
    process: &'a str,
    cue_kind: &'static str,
    points: usize,
    mmsis: usize,
    pct: f64,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    input_mmsis: usize,
    pct_base: &'static str,
    rows: Vec<JsonRow<'a>>,
}

pub fn write_json<W: Write>(w: W, report: &StageReport) -> io::Result<()> {
    let doc = JsonReport {
        input_mmsis: report.input_mmsis,
        pct_base: PCT_BASE,
        rows: report
            .rows
            .iter()
            .map(|r| JsonRow {
                stage: r.stage.as_str(),
                process: &r.process,
                cue_kind: cue_kind_str(r),
                points: r.points,
                mmsis: r.mmsis,
                pct: r.pct,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(w, &doc)?;
    Ok(())
}
