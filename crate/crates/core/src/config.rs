//! Pipeline parameters. Defaults reproduce the published parameter table;
//! filter noise values are engineering defaults.

use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    /// Korean coastal study area, 32-37 N / 123-133 E.
    pub const KOREA: BoundingBox = BoundingBox { lat_min: 32.0, lat_max: 37.0, lon_min: 123.0, lon_max: 133.0 };

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = self.lat_min < self.lat_max
            && self.lon_min < self.lon_max
            && self.lat_min >= -90.0
            && self.lat_max <= 90.0
            && self.lon_min >= -180.0
            && self.lon_max <= 180.0;
        if ok {
            Ok(())
        } else {
            Err(ConfigError::Invalid("bbox".into()))
        }
    }
}

impl Default for BoundingBox {
    fn default() -> Self {
        Self::KOREA
    }
}

/// Unit of the SOG field in input files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SogUnit {
    #[default]
    Mps,
    Knots,
}

impl SogUnit {
    pub const KNOT_IN_MPS: f64 = 0.514444;

    pub fn to_mps(self, v: f64) -> f64 {
        match self {
            SogUnit::Mps => v,
            SogUnit::Knots => v * Self::KNOT_IN_MPS,
        }
    }
}

/// Process noise of one motion model, as white acceleration densities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessNoise {
    /// Longitudinal acceleration, m/s^2.
    pub sigma_acc: f64,
    /// Yaw acceleration, rad/s^2.
    pub sigma_yaw_acc: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImmConfig {
    pub cv_noise: ProcessNoise,
    pub ctrv_noise: ProcessNoise,
    /// Measurement noise: position (m), SOG (m/s), COG (degrees).
    pub sigma_pos_m: f64,
    pub sigma_sog_mps: f64,
    pub sigma_cog_deg: f64,
    /// Row-stochastic mode transition matrix, order (CV, CTRV).
    pub transition: [[f64; 2]; 2],
    pub initial_mode_probs: [f64; 2],
    /// Below this |yaw rate| (rad/s) CTRV propagates position like CV.
    pub ctrv_yaw_epsilon: f64,
    /// Initial standard deviations for speed (m/s), heading (deg), yaw rate (rad/s).
    pub init_sigma_speed_mps: f64,
    pub init_sigma_heading_deg: f64,
    pub init_sigma_yaw_rate: f64,
    /// Gaps longer than this (s) restart the filter instead of predicting.
    pub max_predict_gap_s: f64,
    /// Distance (m) from the projection origin that triggers re-anchoring.
    pub reanchor_distance_m: f64,
}

impl Default for ImmConfig {
    fn default() -> Self {
        ImmConfig {
            cv_noise: ProcessNoise { sigma_acc: 0.5, sigma_yaw_acc: 0.01 },
            ctrv_noise: ProcessNoise { sigma_acc: 0.5, sigma_yaw_acc: 0.05 },
            sigma_pos_m: 10.0,
            sigma_sog_mps: 0.5,
            sigma_cog_deg: 5.0,
            transition: [[0.95, 0.05], [0.05, 0.95]],
            initial_mode_probs: [0.5, 0.5],
            ctrv_yaw_epsilon: 1e-4,
            init_sigma_speed_mps: 2.0,
            init_sigma_heading_deg: 10.0,
            init_sigma_yaw_rate: 0.05,
            max_predict_gap_s: 600.0,
            reanchor_distance_m: 200_000.0,
        }
    }
}

impl ImmConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("imm.cv_noise.sigma_acc", self.cv_noise.sigma_acc),
            ("imm.cv_noise.sigma_yaw_acc", self.cv_noise.sigma_yaw_acc),
            ("imm.ctrv_noise.sigma_acc", self.ctrv_noise.sigma_acc),
            ("imm.ctrv_noise.sigma_yaw_acc", self.ctrv_noise.sigma_yaw_acc),
            ("imm.sigma_pos_m", self.sigma_pos_m),
            ("imm.sigma_sog_mps", self.sigma_sog_mps),
            ("imm.sigma_cog_deg", self.sigma_cog_deg),
            ("imm.ctrv_yaw_epsilon", self.ctrv_yaw_epsilon),
            ("imm.init_sigma_speed_mps", self.init_sigma_speed_mps),
            ("imm.init_sigma_heading_deg", self.init_sigma_heading_deg),
            ("imm.init_sigma_yaw_rate", self.init_sigma_yaw_rate),
            ("imm.max_predict_gap_s", self.max_predict_gap_s),
            ("imm.reanchor_distance_m", self.reanchor_distance_m),
        ];
        for (name, v) in positive {
            check_positive(name, v)?;
        }
        for row in &self.transition {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || libm::fabs(row[0] + row[1] - 1.0) > 1e-9 {
                return Err(ConfigError::Invalid("imm.transition".into()));
            }
        }
        let mu = self.initial_mode_probs;
        if mu.iter().any(|p| !(0.0..=1.0).contains(p)) || libm::fabs(mu[0] + mu[1] - 1.0) > 1e-9 {
            return Err(ConfigError::Invalid("imm.initial_mode_probs".into()));
        }
        if self.reanchor_distance_m > crate::geo::MAX_PROJECTION_RANGE_M {
            return Err(ConfigError::Invalid("imm.reanchor_distance_m".into()));
        }
        Ok(())
    }
}

/// Every threshold of the detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Same-timestamp position scatter limit, m.
    pub d_scatter: f64,
    /// Sub-track neighbourhood: distance (m), time (s), SOG (m/s), heading (deg).
    pub eps_space_dup: f64,
    pub eps_time_dup: f64,
    pub eps_speed_dup: f64,
    pub eps_heading_dup: f64,
    /// Sub-tracks shorter than this (s) are discarded.
    pub subtrack_min_duration: f64,
    /// Physical speed limit for kinematic cues, m/s.
    pub v_th: f64,
    /// Median-gap multiplier and floor (s) of the jamming threshold.
    pub kappa: f64,
    pub t_min: f64,
    /// Intervals count as normal navigation only above this SOG, m/s.
    pub sog_normal_min: f64,
    /// ST-DBSCAN radii: space (m) and time (s).
    pub eps_s: f64,
    pub eps_t: f64,
    pub min_pts: usize,
    /// Required fraction of anomalous vessels in a multi-vessel event.
    pub th_group: f64,
    pub min_event_mmsis: usize,
    /// Minimum single-vessel cluster duration near the coast / offshore, s.
    pub t_single_coastal: f64,
    pub t_single_offshore: f64,
    /// Fraction of operational days that makes a sensor artifact persistent.
    pub persistence_day_fraction: f64,
    /// Distance to the coastline under which a cluster counts as coastal, m.
    pub coastal_distance_m: f64,
    pub imm: ImmConfig,
    pub bbox: BoundingBox,
    pub sog_unit: SogUnit,
    /// Per-record parse error ratio above which a run exits with code 2.
    pub max_parse_error_ratio: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            d_scatter: 116.9,
            eps_space_dup: 3600.0,
            eps_time_dup: 900.0,
            eps_speed_dup: 2.0,
            eps_heading_dup: 30.0,
            subtrack_min_duration: 600.0,
            v_th: 30.0,
            kappa: 3.0,
            t_min: 60.0,
            sog_normal_min: 1.0,
            eps_s: 10_000.0,
            eps_t: 1800.0,
            min_pts: 5,
            th_group: 0.60,
            min_event_mmsis: 5,
            t_single_coastal: 120.0,
            t_single_offshore: 900.0,
            persistence_day_fraction: 0.8,
            coastal_distance_m: 10_000.0,
            imm: ImmConfig::default(),
            bbox: BoundingBox::KOREA,
            sog_unit: SogUnit::Mps,
            max_parse_error_ratio: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0} must be strictly positive")]
    NotPositive(String),
    #[error("invalid value for {0}")]
    Invalid(String),
}

fn check_positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::NotPositive(name.into()))
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("d_scatter", self.d_scatter),
            ("eps_space_dup", self.eps_space_dup),
            ("eps_time_dup", self.eps_time_dup),
            ("eps_speed_dup", self.eps_speed_dup),
            ("eps_heading_dup", self.eps_heading_dup),
            ("subtrack_min_duration", self.subtrack_min_duration),
            ("v_th", self.v_th),
            ("kappa", self.kappa),
            ("t_min", self.t_min),
            ("sog_normal_min", self.sog_normal_min),
            ("eps_s", self.eps_s),
            ("eps_t", self.eps_t),
            ("th_group", self.th_group),
            ("t_single_coastal", self.t_single_coastal),
            ("t_single_offshore", self.t_single_offshore),
            ("persistence_day_fraction", self.persistence_day_fraction),
            ("coastal_distance_m", self.coastal_distance_m),
        ];
        for (name, v) in positive {
            check_positive(name, v)?;
        }
        if self.min_pts < 1 {
            return Err(ConfigError::Invalid("min_pts".into()));
        }
        if self.min_event_mmsis < 1 {
            return Err(ConfigError::Invalid("min_event_mmsis".into()));
        }
        if self.th_group > 1.0 {
            return Err(ConfigError::Invalid("th_group".into()));
        }
        if self.persistence_day_fraction > 1.0 {
            return Err(ConfigError::Invalid("persistence_day_fraction".into()));
        }
        if !(0.0..=1.0).contains(&self.max_parse_error_ratio) {
            return Err(ConfigError::Invalid("max_parse_error_ratio".into()));
        }
        self.bbox.validate()?;
        self.imm.validate()
    }
}
