//! Decoded AIS records from NDJSON and CSV, and the canonical NDJSON writer.
//!
//! Both formats use the keys `mmsi,t,lat,lon,sog,cog[,heading]`. `t` is either
//! an ISO-8601 / RFC 3339 instant or integer epoch milliseconds. Malformed
//! lines become [`ParseError`]s with their line number; they never stop a
//! parse and never disappear silently.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use aisguard_core::{AisRecord, EpochMs, Mmsi, SogUnit};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Ndjson,
    Csv,
}

impl Format {
    /// `.csv` is CSV; `.ndjson`, `.jsonl` and `.json` are NDJSON.
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "ndjson" | "jsonl" | "json" => Some(Format::Ndjson),
            _ => None,
        }
    }
}

/// A rejected input line. Line numbers are 1-based and count the CSV header.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParseError {
    pub line: u64,
    pub reason: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}: unknown input format (expected .csv, .ndjson, .jsonl or .json)")]
    UnknownFormat(PathBuf),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTime {
    Millis(i64),
    Text(String),
}

#[derive(Deserialize)]
struct RawRecord {
    mmsi: u64,
    t: RawTime,
    lat: f64,
    lon: f64,
    sog: f64,
    cog: f64,
    #[serde(default)]
    heading: Option<f64>,
}

fn parse_time(t: RawTime) -> Result<EpochMs, String> {
    match t {
        RawTime::Millis(ms) => Ok(EpochMs(ms)),
        RawTime::Text(s) => {
            if let Ok(ms) = s.parse::<i64>() {
                return Ok(EpochMs(ms));
            }
            DateTime::parse_from_rfc3339(&s)
                .map(|dt| EpochMs(dt.timestamp_millis()))
                .map_err(|e| format!("bad timestamp {s:?}: {e}"))
        }
    }
}

fn to_record(raw: RawRecord, unit: SogUnit) -> Result<AisRecord, String> {
    let mmsi = u32::try_from(raw.mmsi).ok().filter(|m| *m <= Mmsi::MAX).ok_or("mmsi out of range")?;
    let rec = AisRecord {
        mmsi: Mmsi(mmsi),
        t: parse_time(raw.t)?,
        lat: raw.lat,
        lon: raw.lon,
        sog: unit.to_mps(raw.sog),
        cog: raw.cog,
        heading: raw.heading,
    };
    rec.validate().map_err(|e| e.to_string())?;
    Ok(rec)
}

/// Parses one source in order. Only I/O failures are fatal.
pub fn parse_records<R: Read>(
    src: R,
    format: Format,
    unit: SogUnit,
) -> io::Result<(Vec<AisRecord>, Vec<ParseError>)> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    match format {
        Format::Ndjson => {
            let mut reader = BufReader::with_capacity(1 << 20, src);
            let mut line = String::new();
            let mut n = 0u64;
            loop {
                line.clear();
                if reader.read_line(&mut line)? == 0 {
                    break;
                }
                n += 1;
                let text = line.trim();
                if text.is_empty() {
                    continue;
                }
                match serde_json::from_str::<RawRecord>(text)
                    .map_err(|e| e.to_string())
                    .and_then(|raw| to_record(raw, unit))
                {
                    Ok(r) => records.push(r),
                    Err(reason) => errors.push(ParseError { line: n, reason }),
                }
            }
        }
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(src);
            let headers = reader.headers().map_err(io::Error::from)?.clone();
            let mut row = csv::StringRecord::new();
            loop {
                match reader.read_record(&mut row) {
                    Ok(false) => break,
                    Ok(true) => {
                        let line = row.position().map_or(0, |p| p.line());
                        match row
                            .deserialize::<RawRecord>(Some(&headers))
                            .map_err(|e| csv_reason(&e))
                            .and_then(|raw| to_record(raw, unit))
                        {
                            Ok(r) => records.push(r),
                            Err(reason) => errors.push(ParseError { line, reason }),
                        }
                    }
                    Err(e) if e.is_io_error() => return Err(e.into()),
                    Err(e) => {
                        let line = e.position().map_or(0, |p| p.line());
                        errors.push(ParseError { line, reason: csv_reason(&e) });
                    }
                }
            }
        }
    }
    Ok((records, errors))
}

fn csv_reason(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    }
}

/// SHA-256 of everything read through it.
pub struct HashingReader<R> {
    inner: R,
    hasher: Sha256,
    bytes: u64,
}

impl<R: Read> HashingReader<R> {
    pub fn new(inner: R) -> Self {
        HashingReader { inner, hasher: Sha256::new(), bytes: 0 }
    }

    /// Hex digest and byte count.
    pub fn finish(self) -> (String, u64) {
        (hex::encode(self.hasher.finalize()), self.bytes)
    }
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }
}

/// One parsed input file.
#[derive(Debug)]
pub struct ParsedFile {
    pub path: PathBuf,
    pub records: Vec<AisRecord>,
    pub errors: Vec<ParseError>,
    pub sha256: String,
    pub bytes: u64,
}

pub fn read_file(path: &Path, unit: SogUnit) -> Result<ParsedFile, IngestError> {
    let format = Format::from_path(path).ok_or_else(|| IngestError::UnknownFormat(path.to_path_buf()))?;
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let mut hashing = HashingReader::new(file);
    let io_err = |source| IngestError::Io { path: path.to_path_buf(), source };
    let (records, errors) = parse_records(&mut hashing, format, unit).map_err(io_err)?;
    // Drain anything after the last line so the digest covers the whole file.
    io::copy(&mut hashing, &mut io::sink()).map_err(io_err)?;
    let (sha256, bytes) = hashing.finish();
    Ok(ParsedFile { path: path.to_path_buf(), records, errors, sha256, bytes })
}

/// `2024-11-01T16:55:17.570Z`.
pub fn format_time(t: EpochMs) -> String {
    match DateTime::<Utc>::from_timestamp_millis(t.0) {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
        None => t.0.to_string(),
    }
}

pub fn parse_time_str(s: &str) -> Result<EpochMs, String> {
    parse_time(RawTime::Text(s.to_owned()))
}

#[derive(Serialize)]
struct CanonicalRecord {
    mmsi: u32,
    t: String,
    lat: f64,
    lon: f64,
    sog: f64,
    cog: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    heading: Option<f64>,
}

/// Canonical NDJSON: one object per line, ISO time with milliseconds, SOG in
/// m/s, shortest round-trip float formatting.
pub fn write_ndjson<W: Write>(mut w: W, records: &[AisRecord]) -> io::Result<()> {
    for r in records {
        let c = CanonicalRecord {
            mmsi: r.mmsi.0,
            t: format_time(r.t),
            lat: r.lat,
            lon: r.lon,
            sog: r.sog,
            cog: r.cog,
            heading: r.heading,
        };
        serde_json::to_writer(&mut w, &c)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
