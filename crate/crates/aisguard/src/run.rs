//! A complete detector run over files: ingest, pipeline, outputs, manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use aisguard_core::comm_integrity::CommLabel;
use aisguard_core::pipeline::{run_pipeline, Stage};
use aisguard_core::{AisRecord, Mode, PipelineConfig, PipelineOutput};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;
use thiserror::Error;

use crate::config::{load_coastline, LoadError};
use crate::events::{events_collection, members_collection, write_collection};
use crate::ingest::{format_time, read_file, IngestError, ParseError};
use crate::parallel::RayonExecutor;
use crate::report;

pub const EVENTS_FILE: &str = "events.geojson";
pub const MEMBERS_FILE: &str = "event_members.geojson";
pub const REPORT_CSV: &str = "stage_report.csv";
pub const REPORT_JSON: &str = "stage_report.json";
pub const REMOVED_FILE: &str = "removed.ndjson";
pub const PARSE_ERRORS_FILE: &str = "parse_errors.ndjson";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug)]
pub struct RunRequest {
    pub inputs: Vec<PathBuf>,
    pub config: PipelineConfig,
    pub coastline: Option<PathBuf>,
    pub mode: Mode,
    pub workers: usize,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to reproduce a run, plus how long it took.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub mode: Mode,
    pub workers: usize,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub coastline: Option<FileDigest>,
    pub records_parsed: usize,
    pub parse_errors: usize,
    pub parse_error_ratio: f64,
    /// Seconds per phase: ingest, preprocess, stage1, stage2, stage3, write.
    pub wall_clock_s: BTreeMap<String, f64>,
    /// Peak resident set size of the process, when the OS reports it.
    pub peak_rss_bytes: Option<u64>,
    /// Digests of the files written next to the manifest.
    pub outputs: Vec<FileDigest>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub output: PipelineOutput,
    pub parse_errors: Vec<(PathBuf, ParseError)>,
    /// Per-record errors exceeded `max_parse_error_ratio`.
    pub too_many_errors: bool,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Peak resident memory from `/proc/self/status`.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<FileDigest, RunError> {
    let path = dir.join(name);
    let err = |source| RunError::Write { path: path.clone(), source };
    let tmp = NamedTempFile::new_in(dir).map_err(err)?;
    // Temporary files are created owner-only; outputs should look like any other file.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644)).map_err(err)?;
    }
    let mut w = HashingWriter { inner: BufWriter::new(tmp), hasher: Sha256::new(), bytes: 0 };
    body(&mut w).map_err(err)?;
    w.flush().map_err(err)?;
    let HashingWriter { inner, hasher, bytes } = w;
    let tmp = inner.into_inner().map_err(|e| err(e.into_error()))?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(&path).map_err(|e| err(e.error))?;
    Ok(FileDigest { path: name.to_owned(), sha256: hex::encode(hasher.finalize()), bytes })
}

#[derive(Serialize)]
struct RemovedLine {
    label: CommLabel,
    mmsi: u32,
    t: String,
    lat: f64,
    lon: f64,
    sog: f64,
    cog: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    heading: Option<f64>,
}

fn write_removed(w: &mut dyn Write, removed: &[(AisRecord, CommLabel)]) -> io::Result<()> {
    for (r, label) in removed {
        let line = RemovedLine {
            label: *label,
            mmsi: r.mmsi.0,
            t: format_time(r.t),
            lat: r.lat,
            lon: r.lon,
            sog: r.sog,
            cog: r.cog,
            heading: r.heading,
        };
        serde_json::to_writer(&mut *w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ParseErrorLine<'a> {
    file: String,
    line: u64,
    reason: &'a str,
}

fn digest_file(path: &Path) -> Result<FileDigest, RunError> {
    let bytes = fs::read(path).map_err(|source| RunError::Write { path: path.to_path_buf(), source })?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

pub fn run(req: &RunRequest) -> Result<RunOutcome, RunError> {
    let mut clock: BTreeMap<String, f64> = BTreeMap::new();
    let t0 = Instant::now();

    let coastline = req.coastline.as_deref().map(load_coastline).transpose()?;
    let coastline_digest = req.coastline.as_deref().map(digest_file).transpose()?;

    let mut records = Vec::new();
    let mut digests = Vec::new();
    let mut parse_errors = Vec::new();
    for path in &req.inputs {
        let parsed = read_file(path, req.config.sog_unit)?;
        info!("{}: {} records, {} rejected lines", path.display(), parsed.records.len(), parsed.errors.len());
        records.extend(parsed.records);
        parse_errors.extend(parsed.errors.into_iter().map(|e| (path.clone(), e)));
        digests.push(FileDigest { path: path.display().to_string(), sha256: parsed.sha256, bytes: parsed.bytes });
    }
    let records_parsed = records.len();
    let seen = records_parsed + parse_errors.len();
    let ratio = if seen == 0 { 0.0 } else { parse_errors.len() as f64 / seen as f64 };
    let too_many_errors = ratio > req.config.max_parse_error_ratio;
    if too_many_errors {
        warn!("{} of {} input lines rejected", parse_errors.len(), seen);
    }
    clock.insert("ingest".into(), t0.elapsed().as_secs_f64());

    let exec = RayonExecutor::new(req.workers)?;
    let mut last = Instant::now();
    let mut on_stage = |stage: Stage| {
        let now = Instant::now();
        let dt = (now - last).as_secs_f64();
        info!("{} done in {:.2} s", stage.as_str(), dt);
        clock.insert(stage.as_str().into(), dt);
        last = now;
    };
    let output = run_pipeline(records, &req.config, coastline.as_ref(), req.mode, &exec, &mut on_stage);

    let t_write = Instant::now();
    fs::create_dir_all(&req.out_dir).map_err(|source| RunError::Write { path: req.out_dir.clone(), source })?;
    let dir = req.out_dir.as_path();
    let mut outputs = vec![
        write_atomic(dir, EVENTS_FILE, |w| write_collection(w, &events_collection(&output.stage3)))?,
        write_atomic(dir, MEMBERS_FILE, |w| write_collection(w, &members_collection(&output.stage3)))?,
        write_atomic(dir, REPORT_CSV, |w| report::write_csv(w, &output.report))?,
        write_atomic(dir, REPORT_JSON, |w| report::write_json(w, &output.report))?,
        write_atomic(dir, REMOVED_FILE, |w| write_removed(w, &output.removed))?,
    ];
    if !parse_errors.is_empty() {
        outputs.push(write_atomic(dir, PARSE_ERRORS_FILE, |w| {
            for (file, e) in &parse_errors {
                let line = ParseErrorLine { file: file.display().to_string(), line: e.line, reason: &e.reason };
                serde_json::to_writer(&mut *w, &line)?;
                w.write_all(b"\n")?;
            }
            Ok(())
        })?);
    } else if dir.join(PARSE_ERRORS_FILE).exists() {
        let _ = fs::remove_file(dir.join(PARSE_ERRORS_FILE));
    }
    clock.insert("write".into(), t_write.elapsed().as_secs_f64());

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        mode: req.mode,
        workers: exec.workers(),
        config: req.config.clone(),
        inputs: digests,
        coastline: coastline_digest,
        records_parsed,
        parse_errors: parse_errors.len(),
        parse_error_ratio: ratio,
        wall_clock_s: clock,
        peak_rss_bytes: peak_rss_bytes(),
        outputs,
    };
    write_atomic(dir, MANIFEST_FILE, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        w.write_all(b"\n")
    })?;
    Ok(RunOutcome { manifest, output, parse_errors, too_many_errors })
}

/// Opens a file for buffered writing, creating parent directories.
pub fn create_file(path: &Path) -> Result<BufWriter<File>, RunError> {
    let err = |source| RunError::Write { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(err)?;
    }
    File::create(path).map(BufWriter::new).map_err(err)
}
