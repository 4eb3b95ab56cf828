//! Coastline polygons and the distance-to-coast query used to pick the
//! single-vessel duration threshold.

use alloc::vec::Vec;

use crate::geo::{geodesic_distance, project_unchecked, GeoPos};

/// Beyond this distance a segment is not projected; a triangle-inequality
/// lower bound is used instead.
const LOCAL_RANGE_M: f64 = 500_000.0;

/// A land polygon: one exterior ring and optional holes, vertices in order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polygon {
    pub exterior: Vec<GeoPos>,
    pub holes: Vec<Vec<GeoPos>>,
}

impl Polygon {
    pub fn contains(&self, p: GeoPos) -> bool {
        ring_contains(&self.exterior, p) && !self.holes.iter().any(|h| ring_contains(h, p))
    }

    fn rings(&self) -> impl Iterator<Item = &Vec<GeoPos>> {
        core::iter::once(&self.exterior).chain(self.holes.iter())
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Coastline {
    pub polygons: Vec<Polygon>,
}

impl Coastline {
    pub fn new(polygons: Vec<Polygon>) -> Self {
        Coastline { polygons }
    }

    /// Distance in metres from `p` to the nearest land; zero on land.
    pub fn distance_m(&self, p: GeoPos) -> f64 {
        if self.polygons.iter().any(|poly| poly.contains(p)) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for ring in self.polygons.iter().flat_map(Polygon::rings) {
            for (a, b) in ring_edges(ring) {
                best = best.min(segment_distance(p, a, b));
            }
        }
        best
    }
}

fn ring_edges(ring: &[GeoPos]) -> impl Iterator<Item = (GeoPos, GeoPos)> + '_ {
    let n = ring.len();
    (0..n).filter(move |_| n > 1).map(move |i| (ring[i], ring[(i + 1) % n]))
}

/// Even-odd ray cast in longitude/latitude degrees.
fn ring_contains(ring: &[GeoPos], p: GeoPos) -> bool {
    let mut inside = false;
    for (a, b) in ring_edges(ring) {
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let lon_at = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
            if p.lon < lon_at {
                inside = !inside;
            }
        }
    }
    inside
}

fn segment_distance(p: GeoPos, a: GeoPos, b: GeoPos) -> f64 {
    let da = geodesic_distance(p, a);
    let len = geodesic_distance(a, b);
    if da - len > LOCAL_RANGE_M {
        return da - len;
    }
    let pa = project_unchecked(p, a);
    let pb = project_unchecked(p, b);
    let (dx, dy) = (pb.x - pa.x, pb.y - pa.y);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 { (-(pa.x * dx + pa.y * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    libm::hypot(pa.x + s * dx, pa.y + s * dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn square() -> Coastline {
        let ring = vec![
            GeoPos::new(33.0, 126.0),
            GeoPos::new(33.0, 126.5),
            GeoPos::new(33.5, 126.5),
            GeoPos::new(33.5, 126.0),
        ];
        Coastline::new(vec![Polygon { exterior: ring, holes: vec![] }])
    }

    #[test]
    fn inside_is_zero() {
        assert_eq!(square().distance_m(GeoPos::new(33.2, 126.2)), 0.0);
    }

    #[test]
    fn distance_south_of_edge() {
        let d = square().distance_m(GeoPos::new(32.9, 126.25));
        let expected = geodesic_distance(GeoPos::new(32.9, 126.25), GeoPos::new(33.0, 126.25));
        assert!((d - expected).abs() < 5.0, "{d} vs {expected}");
    }

    #[test]
    fn distance_to_corner() {
        let p = GeoPos::new(32.9, 125.9);
        let d = square().distance_m(p);
        let expected = geodesic_distance(p, GeoPos::new(33.0, 126.0));
        assert!((d - expected).abs() / expected < 0.005);
    }

    #[test]
    fn hole_is_water() {
        let mut c = square();
        c.polygons[0].holes.push(vec![
            GeoPos::new(33.2, 126.2),
            GeoPos::new(33.2, 126.3),
            GeoPos::new(33.3, 126.3),
            GeoPos::new(33.3, 126.2),
        ]);
        let d = c.distance_m(GeoPos::new(33.25, 126.25));
        assert!(d > 4000.0 && d < 6000.0, "{d}");
    }

    #[test]
    fn empty_coastline_is_infinitely_far() {
        assert_eq!(Coastline::default().distance_m(GeoPos::new(33.0, 126.0)), f64::INFINITY);
    }
}
