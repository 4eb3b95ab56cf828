//! Detected events as GeoJSON.
//!
//! `events.geojson` holds one Point feature per non-noise event at its
//! centroid. The sidecar holds the member cues of each event as a MultiPoint.

use std::io::{self, Write};

use aisguard_core::st_cluster::Stage3;
use aisguard_core::synth::DetectedEvent;
use aisguard_core::{Category, CueKind, EpochMs, GeoPos, Mmsi, StEvent};
use geojson::{Feature, FeatureCollection, GeoJson, Geometry, GeometryValue, JsonObject};
use serde_json::{json, Value};
use thiserror::Error;

use crate::ingest::{format_time, parse_time_str};

/// Events written to the output; noise clusters are not events.
pub fn reported(stage3: &Stage3) -> impl Iterator<Item = (usize, &StEvent)> {
    stage3.events.iter().enumerate().filter(|(_, e)| e.category != Category::Noise)
}

fn utc_date(day: i64) -> String {
    format_time(EpochMs(day * EpochMs::MS_PER_DAY))[..10].to_owned()
}

fn properties(id: usize, e: &StEvent) -> JsonObject {
    let value = json!({
        "id": id,
        "cluster_id": e.cluster_id,
        "category": e.category.as_str(),
        "cue_kind": e.kind.as_str(),
        "mmsi_count": e.mmsis.len(),
        "mmsis": e.mmsis.iter().map(|m| m.0).collect::<Vec<_>>(),
        "t_start": format_time(e.t_start),
        "t_end": format_time(e.t_end),
        "duration_s": e.duration_s(),
        "radius_m": e.radius_m,
        "anomalous_ratio": e.anomalous_ratio,
        "present_mmsis": e.present_mmsis,
        "member_cues": e.members.len(),
        "days": e.days.iter().map(|d| utc_date(*d)).collect::<Vec<_>>(),
    });
    match value {
        Value::Object(map) => map,
        _ => unreachable!(),
    }
}

fn feature(geometry: Geometry, properties: JsonObject) -> Feature {
    Feature { bbox: None, geometry: Some(geometry), id: None, properties: Some(properties), foreign_members: None }
}

fn collection(features: impl Iterator<Item = Feature>) -> FeatureCollection {
    // `FeatureCollection::new` computes a bbox, which is empty for no features.
    FeatureCollection { bbox: None, features: features.collect(), foreign_members: None }
}

pub fn events_collection(stage3: &Stage3) -> FeatureCollection {
    collection(
        reported(stage3)
            .map(|(id, e)| feature(Geometry::new_point([e.centroid.lon, e.centroid.lat]), properties(id, e))),
    )
}

pub fn members_collection(stage3: &Stage3) -> FeatureCollection {
    collection(reported(stage3).map(|(id, e)| {
        let cues = &stage3.cues(e.kind).cues;
        let points: Vec<[f64; 2]> = e.members.iter().map(|&i| [cues[i].pos.lon, cues[i].pos.lat]).collect();
        let props = json!({ "id": id, "cluster_id": e.cluster_id, "cue_kind": e.kind.as_str(), "category": e.category.as_str() });
        let Value::Object(props) = props else { unreachable!() };
        feature(Geometry::new_multi_point(points), props)
    }))
}

pub fn write_collection<W: Write>(w: W, fc: &FeatureCollection) -> io::Result<()> {
    serde_json::to_writer(w, fc)?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum EventsError {
    #[error("not GeoJSON: {0}")]
    GeoJson(Box<geojson::Error>),
    #[error("expected a FeatureCollection")]
    NotCollection,
    #[error("feature {index}: {reason}")]
    Feature { index: usize, reason: String },
}

fn parse_category(s: &str) -> Option<Category> {
    Category::ALL.into_iter().find(|c| c.as_str() == s)
}

fn parse_kind(s: &str) -> Option<CueKind> {
    [CueKind::Kinematic, CueKind::TxGap].into_iter().find(|k| k.as_str() == s)
}

fn detected(f: &Feature) -> Result<DetectedEvent, String> {
    let props = f.properties.as_ref().ok_or("no properties")?;
    let text = |k: &str| props.get(k).and_then(Value::as_str).ok_or(format!("missing {k}"));
    let centroid = match f.geometry.as_ref().map(|g| &g.value) {
        Some(GeometryValue::Point { coordinates }) if coordinates.len() >= 2 => {
            GeoPos::new(coordinates[1], coordinates[0])
        }
        _ => return Err("geometry is not a Point".into()),
    };
    let mmsis = props
        .get("mmsis")
        .and_then(Value::as_array)
        .ok_or("missing mmsis")?
        .iter()
        .map(|v| v.as_u64().and_then(|m| u32::try_from(m).ok()).map(Mmsi).ok_or("bad mmsi"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DetectedEvent {
        category: parse_category(text("category")?).ok_or("unknown category")?,
        kind: parse_kind(text("cue_kind")?).ok_or("unknown cue_kind")?,
        centroid,
        t_start: parse_time_str(text("t_start")?)?,
        t_end: parse_time_str(text("t_end")?)?,
        mmsis,
    })
}

/// Reads an `events.geojson` back into evaluator input.
pub fn read_detected(text: &str) -> Result<Vec<DetectedEvent>, EventsError> {
    let gj: GeoJson = text.parse().map_err(|e| EventsError::GeoJson(Box::new(e)))?;
    let GeoJson::FeatureCollection(fc) = gj else { return Err(EventsError::NotCollection) };
    fc.features
        .iter()
        .enumerate()
        .map(|(index, f)| detected(f).map_err(|reason| EventsError::Feature { index, reason }))
        .collect()
}
