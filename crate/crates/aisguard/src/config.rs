//! Loading the pipeline configuration and the optional coastline.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use aisguard_core::coastline::{Coastline, Polygon};
use aisguard_core::{ConfigError, GeoPos, PipelineConfig};
use geojson::{GeoJson, Geometry, GeometryValue, Position};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    GeoJson { path: PathBuf, source: Box<geojson::Error> },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

pub(crate) fn read_text(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })
}

/// Parses a JSON config. Missing fields take their defaults; unknown keys and
/// out-of-range values are errors.
pub fn load_config(path: &Path) -> Result<PipelineConfig, LoadError> {
    parse_config(&read_text(path)?).map_err(|e| match e {
        ConfigParse::Json(source) => LoadError::Json { path: path.to_path_buf(), source },
        ConfigParse::Invalid(source) => LoadError::Config { path: path.to_path_buf(), source },
    })
}

#[derive(Debug)]
pub enum ConfigParse {
    Json(serde_json::Error),
    Invalid(ConfigError),
}

pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigParse> {
    let cfg: PipelineConfig = serde_json::from_str(text).map_err(ConfigParse::Json)?;
    cfg.validate().map_err(ConfigParse::Invalid)?;
    Ok(cfg)
}

fn ring(positions: &[Position]) -> Vec<GeoPos> {
    let mut ring: Vec<GeoPos> = positions.iter().map(|p| GeoPos::new(p[1], p[0])).collect();
    // GeoJSON rings repeat the first vertex at the end.
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring
}

fn polygon(rings: &[Vec<Position>]) -> Option<Polygon> {
    let (exterior, holes) = rings.split_first()?;
    Some(Polygon { exterior: ring(exterior), holes: holes.iter().map(|h| ring(h)).collect() })
}

fn collect_polygons(g: &Geometry, out: &mut Vec<Polygon>) {
    match &g.value {
        GeometryValue::Polygon { coordinates } => out.extend(polygon(coordinates)),
        GeometryValue::MultiPolygon { coordinates } => out.extend(coordinates.iter().filter_map(|p| polygon(p))),
        GeometryValue::GeometryCollection { geometries } => {
            for g in geometries {
                collect_polygons(g, out);
            }
        }
        _ => {}
    }
}

/// Land polygons from a GeoJSON document. Polygon and MultiPolygon geometries
/// are used; every other geometry type is ignored.
pub fn load_coastline(path: &Path) -> Result<Coastline, LoadError> {
    let text = read_text(path)?;
    let gj: GeoJson =
        text.parse().map_err(|e| LoadError::GeoJson { path: path.to_path_buf(), source: Box::new(e) })?;
    let mut polygons = Vec::new();
    match &gj {
        GeoJson::FeatureCollection(fc) => {
            for g in fc.features.iter().filter_map(|f| f.geometry.as_ref()) {
                collect_polygons(g, &mut polygons);
            }
        }
        GeoJson::Feature(f) => {
            if let Some(g) = &f.geometry {
                collect_polygons(g, &mut polygons);
            }
        }
        GeoJson::Geometry(g) => collect_polygons(g, &mut polygons),
    }
    if polygons.is_empty() {
        return Err(LoadError::Invalid { path: path.to_path_buf(), reason: "no polygons".into() });
    }
    Ok(Coastline::new(polygons))
}
