//! Spherical distance and the local tangent-plane projection.
//!
//! Distances use the haversine formula on a sphere with the WGS-84 mean
//! radius. Track filtering works in an equirectangular plane anchored at a
//! per-track origin.

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// WGS-84 mean earth radius in metres.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Largest separation from the origin accepted by [`project_local`].
pub const MAX_PROJECTION_RANGE_M: f64 = 500_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct GeoPos {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPos {
    pub const fn new(lat: f64, lon: f64) -> Self {
        GeoPos { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Position in metres east (`x`) and north (`y`) of `origin`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarPos {
    pub x: f64,
    pub y: f64,
    pub origin: GeoPos,
}

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum GeoError {
    #[error("point is {0:.0} m from the projection origin, beyond the 500 km limit")]
    OutOfRange(f64),
}

#[inline]
fn to_rad(deg: f64) -> f64 {
    deg * (PI / 180.0)
}

/// Wraps a longitude difference (degrees) to (-180, 180].
fn wrap_lon_delta(mut d: f64) -> f64 {
    d = libm::fmod(d, 360.0);
    if d > 180.0 {
        d -= 360.0;
    } else if d <= -180.0 {
        d += 360.0;
    }
    d
}

/// Great-circle distance in metres.
pub fn geodesic_distance(a: GeoPos, b: GeoPos) -> f64 {
    let p1 = to_rad(a.lat);
    let p2 = to_rad(b.lat);
    let dp = p2 - p1;
    let dl = to_rad(b.lon - a.lon);
    let s1 = libm::sin(dp / 2.0);
    let s2 = libm::sin(dl / 2.0);
    let h = s1 * s1 + libm::cos(p1) * libm::cos(p2) * s2 * s2;
    2.0 * EARTH_RADIUS_M * libm::asin(libm::sqrt(h.min(1.0)))
}

/// Equirectangular projection about `origin`.
pub fn project_local(origin: GeoPos, p: GeoPos) -> Result<PlanarPos, GeoError> {
    let d = geodesic_distance(origin, p);
    if d > MAX_PROJECTION_RANGE_M {
        return Err(GeoError::OutOfRange(d));
    }
    Ok(project_unchecked(origin, p))
}

pub(crate) fn project_unchecked(origin: GeoPos, p: GeoPos) -> PlanarPos {
    let x = EARTH_RADIUS_M * to_rad(wrap_lon_delta(p.lon - origin.lon)) * libm::cos(to_rad(origin.lat));
    let y = EARTH_RADIUS_M * to_rad(p.lat - origin.lat);
    PlanarPos { x, y, origin }
}

/// Inverse of [`project_local`].
pub fn unproject(p: &PlanarPos) -> GeoPos {
    let lat = p.origin.lat + (p.y / EARTH_RADIUS_M) * (180.0 / PI);
    let lon = p.origin.lon + (p.x / (EARTH_RADIUS_M * libm::cos(to_rad(p.origin.lat)))) * (180.0 / PI);
    GeoPos::new(lat, wrap_lon_delta(lon))
}

/// Smallest absolute separation of two angles on the circle, in [0, 180].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = libm::fmod(libm::fabs(a - b), 360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Point on the unit sphere. Chord comparisons against
/// [`chord_threshold`] are equivalent to great-circle comparisons and avoid
/// trigonometry in neighbour searches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePoint {
    x: f64,
    y: f64,
    z: f64,
}

impl SpherePoint {
    pub fn from_pos(p: GeoPos) -> Self {
        let (sp, cp) = (libm::sin(to_rad(p.lat)), libm::cos(to_rad(p.lat)));
        let (sl, cl) = (libm::sin(to_rad(p.lon)), libm::cos(to_rad(p.lon)));
        SpherePoint { x: cp * cl, y: cp * sl, z: sp }
    }

    #[inline]
    pub fn chord_sq(&self, o: &SpherePoint) -> f64 {
        let (dx, dy, dz) = (self.x - o.x, self.y - o.y, self.z - o.z);
        dx * dx + dy * dy + dz * dz
    }

    pub fn to_pos(&self) -> GeoPos {
        let n = libm::sqrt(self.x * self.x + self.y * self.y + self.z * self.z);
        GeoPos::new(
            libm::asin((self.z / n).clamp(-1.0, 1.0)) * 180.0 / PI,
            libm::atan2(self.y, self.x) * 180.0 / PI,
        )
    }
}

/// Squared unit-sphere chord length matching a great-circle distance of
/// `dist_m` metres.
pub fn chord_threshold(dist_m: f64) -> f64 {
    let half = (dist_m / (2.0 * EARTH_RADIUS_M)).min(PI / 2.0);
    let c = 2.0 * libm::sin(half);
    c * c
}

/// Normalized mean of unit vectors, robust across the antimeridian.
pub fn centroid(points: impl IntoIterator<Item = GeoPos>) -> Option<GeoPos> {
    let mut acc = SpherePoint { x: 0.0, y: 0.0, z: 0.0 };
    let mut n = 0usize;
    for p in points {
        let s = SpherePoint::from_pos(p);
        acc.x += s.x;
        acc.y += s.y;
        acc.z += s.z;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    Some(acc.to_pos())
}
