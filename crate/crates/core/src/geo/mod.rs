//! Geometry and raster primitives.
//!
//! Coordinates are WGS84 degrees. Planar computations (areas, overlay grids)
//! use a local equirectangular projection with a fixed metres-per-degree
//! scale, which keeps errors well under half a percent at flood scales.

pub mod geojson;
mod overlay;
mod raster;

pub use overlay::{
    affected_population, drape_layer_stats, drape_stats, flood_extent, river_rise, AnalysisGrid, ElevationStats,
    FloodExtent, FloodExtentSummary, HydroLayer, RiverRise,
};
pub use raster::RasterGrid;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Metres per degree of latitude (and of longitude at the equator).
pub const METERS_PER_DEGREE: f64 = 111_319.490_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("coordinate out of range: lat={lat}, lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("ring has fewer than 3 distinct vertices")]
    DegeneratePolygon,
    #[error("exterior ring is self-intersecting")]
    SelfIntersecting,
    #[error("hole lies outside the exterior ring")]
    HoleOutsideExterior,
    #[error("hydrography layer `{0}` is empty")]
    EmptyLayer(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("polygon covers no non-nodata elevation cell")]
    NoElevationCoverage,
    #[error("population raster does not overlap the analysis grid")]
    NoPopulationCoverage,
    #[error("convex hull needs at least 3 non-collinear points")]
    DegenerateHull,
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("invalid GeoJSON: {0}")]
    GeoJson(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..180.0).contains(&lon) {
            // NaN fails both range checks
            return Err(GeoError::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }
}

/// Axis-aligned box in degrees, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self, GeoError> {
        GeoPoint::new(min_lat, min_lon)?;
        GeoPoint::new(max_lat, max_lon)?;
        if min_lat > max_lat || min_lon > max_lon {
            return Err(GeoError::InvalidParameter(format!(
                "inverted bounding box [{min_lat}, {min_lon}, {max_lat}, {max_lon}]"
            )));
        }
        Ok(Self {
            min_lat,
            min_lon,
            max_lat,
            max_lon,
        })
    }

    /// Smallest box containing all points; `None` for an empty slice.
    pub fn from_points(points: &[GeoPoint]) -> Option<Self> {
        let first = points.first()?;
        let mut bb = Self {
            min_lat: first.lat,
            min_lon: first.lon,
            max_lat: first.lat,
            max_lon: first.lon,
        };
        for p in &points[1..] {
            bb.min_lat = bb.min_lat.min(p.lat);
            bb.max_lat = bb.max_lat.max(p.lat);
            bb.min_lon = bb.min_lon.min(p.lon);
            bb.max_lon = bb.max_lon.max(p.lon);
        }
        Some(bb)
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            min_lat: self.min_lat.min(other.min_lat),
            min_lon: self.min_lon.min(other.min_lon),
            max_lat: self.max_lat.max(other.max_lat),
            max_lon: self.max_lon.max(other.max_lon),
        }
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lat: 0.5 * (self.min_lat + self.max_lat),
            lon: 0.5 * (self.min_lon + self.max_lon),
        }
    }

    /// Counterclockwise ring of the four corners.
    pub fn corners(&self) -> Vec<GeoPoint> {
        vec![
            GeoPoint {
                lat: self.min_lat,
                lon: self.min_lon,
            },
            GeoPoint {
                lat: self.min_lat,
                lon: self.max_lon,
            },
            GeoPoint {
                lat: self.max_lat,
                lon: self.max_lon,
            },
            GeoPoint {
                lat: self.max_lat,
                lon: self.min_lon,
            },
        ]
    }
}

/// Field of view for regional filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    BoundingBox(BoundingBox),
    Polygon(RingPolygon),
}

impl Region {
    pub fn contains(&self, p: GeoPoint) -> bool {
        match self {
            Region::BoundingBox(b) => b.contains(p),
            Region::Polygon(poly) => poly.contains(p),
        }
    }

    pub fn bbox(&self) -> BoundingBox {
        match self {
            Region::BoundingBox(b) => *b,
            Region::Polygon(poly) => poly.bbox(),
        }
    }
}

/// Polygon with one exterior ring and optional holes. Rings are stored
/// open (the closing vertex is implicit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingPolygon {
    exterior: Vec<GeoPoint>,
    holes: Vec<Vec<GeoPoint>>,
}

impl RingPolygon {
    pub fn new(exterior: Vec<GeoPoint>, holes: Vec<Vec<GeoPoint>>) -> Result<Self, GeoError> {
        let exterior = open_ring(exterior)?;
        if ring_self_intersects(&exterior) {
            return Err(GeoError::SelfIntersecting);
        }
        let mut open_holes = Vec::with_capacity(holes.len());
        for hole in holes {
            let hole = open_ring(hole)?;
            if !hole.iter().all(|p| ring_contains(&exterior, *p)) {
                return Err(GeoError::HoleOutsideExterior);
            }
            open_holes.push(hole);
        }
        Ok(Self {
            exterior,
            holes: open_holes,
        })
    }

    pub fn simple(exterior: Vec<GeoPoint>) -> Result<Self, GeoError> {
        Self::new(exterior, Vec::new())
    }

    pub fn exterior(&self) -> &[GeoPoint] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<GeoPoint>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[GeoPoint]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_points(&self.exterior).expect("validated ring is non-empty")
    }

    /// Even-odd point-in-polygon test over all rings.
    pub fn contains(&self, p: GeoPoint) -> bool {
        let mut inside = false;
        for ring in self.rings() {
            if ring_contains(ring, p) {
                inside = !inside;
            }
        }
        inside
    }

    /// `contains`, or within `tol` degrees of any ring edge.
    pub fn contains_with_tolerance(&self, p: GeoPoint, tol: f64) -> bool {
        if self.contains(p) {
            return true;
        }
        self.rings().any(|ring| {
            (0..ring.len()).any(|i| {
                let a = ring[i];
                let b = ring[(i + 1) % ring.len()];
                segment_distance((p.lon, p.lat), (a.lon, a.lat), (b.lon, b.lat)) <= tol
            })
        })
    }

    fn vertex_centroid(&self) -> GeoPoint {
        let n = self.exterior.len() as f64;
        let (lat, lon) = self
            .exterior
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p.lat, b + p.lon));
        GeoPoint {
            lat: lat / n,
            lon: lon / n,
        }
    }
}

fn open_ring(mut ring: Vec<GeoPoint>) -> Result<Vec<GeoPoint>, GeoError> {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring.dedup();
    let mut distinct: Vec<GeoPoint> = Vec::new();
    for p in &ring {
        if !distinct.contains(p) {
            distinct.push(*p);
            if distinct.len() >= 3 {
                return Ok(ring);
            }
        }
    }
    Err(GeoError::DegeneratePolygon)
}

fn ring_contains(ring: &[GeoPoint], p: GeoPoint) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if x > p.lon {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_intersect(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn ring_self_intersects(ring: &[GeoPoint]) -> bool {
    let n = ring.len();
    if n < 4 {
        return false;
    }
    let pt = |i: usize| (ring[i % n].lon, ring[i % n].lat);
    for i in 0..n {
        for j in (i + 2)..n {
            // edges sharing a vertex
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(pt(i), pt(i + 1), pt(j), pt(j + 1)) {
                return true;
            }
        }
    }
    false
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Equirectangular projection around a reference point, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    pub reference: GeoPoint,
}

impl LocalProjection {
    pub fn new(reference: GeoPoint) -> Self {
        Self { reference }
    }

    fn cos_ref(&self) -> f64 {
        self.reference.lat.to_radians().cos()
    }

    pub fn project(&self, p: GeoPoint) -> (f64, f64) {
        (
            (p.lon - self.reference.lon) * self.cos_ref() * METERS_PER_DEGREE,
            (p.lat - self.reference.lat) * METERS_PER_DEGREE,
        )
    }

    pub fn unproject(&self, x: f64, y: f64) -> GeoPoint {
        GeoPoint {
            lat: self.reference.lat + y / METERS_PER_DEGREE,
            lon: self.reference.lon + x / (self.cos_ref() * METERS_PER_DEGREE),
        }
    }
}

fn shoelace(ring: &[(f64, f64)]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (x1, y1) = ring[i];
        let (x2, y2) = ring[(i + 1) % n];
        acc += x1 * y2 - x2 * y1;
    }
    0.5 * acc
}

/// Planar area in square metres, holes subtracted.
pub fn polygon_area(poly: &RingPolygon) -> f64 {
    let proj = LocalProjection::new(poly.vertex_centroid());
    let ring_area = |ring: &[GeoPoint]| {
        let pts: Vec<_> = ring.iter().map(|p| proj.project(*p)).collect();
        shoelace(&pts).abs()
    };
    let holes: f64 = poly.holes.iter().map(|h| ring_area(h)).sum();
    (ring_area(&poly.exterior) - holes).max(0.0)
}

/// Convex hull (Andrew's monotone chain), counterclockwise in the lon/lat plane.
pub fn convex_hull(points: &[GeoPoint]) -> Result<RingPolygon, GeoError> {
    let mut pts: Vec<GeoPoint> = points.to_vec();
    pts.sort_by(|a, b| a.lon.total_cmp(&b.lon).then(a.lat.total_cmp(&b.lat)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeoError::DegenerateHull);
    }
    let xy = |p: &GeoPoint| (p.lon, p.lat);
    let mut hull: Vec<GeoPoint> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &GeoPoint>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && orient(xy(&hull[hull.len() - 2]), xy(&hull[hull.len() - 1]), xy(p)) <= 0.0
            {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return Err(GeoError::DegenerateHull);
    }
    RingPolygon::simple(hull)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn square(lat: f64, lon: f64, side: f64) -> RingPolygon {
        let h = side / 2.0;
        RingPolygon::simple(vec![
            pt(lat - h, lon - h),
            pt(lat - h, lon + h),
            pt(lat + h, lon + h),
            pt(lat + h, lon - h),
        ])
        .unwrap()
    }

    /// Spherical polygon area on the sphere whose degree length matches
    /// `METERS_PER_DEGREE`; independent of the planar projection.
    fn spherical_area(ring: &[GeoPoint]) -> f64 {
        let r = METERS_PER_DEGREE * 180.0 / std::f64::consts::PI;
        let n = ring.len();
        let mut acc = 0.0;
        for i in 0..n {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            acc += (b.lon - a.lon).to_radians() * (2.0 + a.lat.to_radians().sin() + b.lat.to_radians().sin());
        }
        (acc * r * r / 2.0).abs()
    }

    #[test]
    fn rejects_bad_coordinates() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 180.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(-90.0, -180.0).is_ok());
    }

    #[test]
    fn two_vertex_ring_is_degenerate() {
        let err = RingPolygon::simple(vec![pt(0.0, 0.0), pt(1.0, 1.0)]).unwrap_err();
        assert_eq!(err, GeoError::DegeneratePolygon);
        // closing vertex does not count as distinct
        let err = RingPolygon::simple(vec![pt(0.0, 0.0), pt(1.0, 1.0), pt(0.0, 0.0)]).unwrap_err();
        assert_eq!(err, GeoError::DegeneratePolygon);
    }

    #[test]
    fn bowtie_is_rejected() {
        let err = RingPolygon::simple(vec![pt(0.0, 0.0), pt(1.0, 1.0), pt(0.0, 1.0), pt(1.0, 0.0)]).unwrap_err();
        assert_eq!(err, GeoError::SelfIntersecting);
    }

    #[test]
    fn hole_must_be_inside() {
        let outer = square(0.0, 0.0, 1.0).exterior().to_vec();
        let hole = square(5.0, 5.0, 0.1).exterior().to_vec();
        assert_eq!(
            RingPolygon::new(outer, vec![hole]).unwrap_err(),
            GeoError::HoleOutsideExterior
        );
    }

    #[test]
    fn small_square_area_at_equator_and_sixty() {
        let eq = square(0.0, 0.0, 0.001);
        let a = polygon_area(&eq);
        assert!((a - 1.2392e4).abs() / 1.2392e4 < 0.005, "{a}");
        let oracle = spherical_area(eq.exterior());
        assert!((a - oracle).abs() / oracle < 0.005);

        let north = square(60.0, 10.0, 0.001);
        let b = polygon_area(&north);
        assert!((b - 6.196e3).abs() / 6.196e3 < 0.005, "{b}");
        let oracle = spherical_area(north.exterior());
        assert!((b - oracle).abs() / oracle < 0.005);
        assert!((b / a - 0.5).abs() < 1e-4);
    }

    #[test]
    fn holes_are_subtracted() {
        let outer = square(0.0, 0.0, 0.002).exterior().to_vec();
        let hole = square(0.0, 0.0, 0.001).exterior().to_vec();
        let poly = RingPolygon::new(outer, vec![hole]).unwrap();
        let full = polygon_area(&square(0.0, 0.0, 0.002));
        let inner = polygon_area(&square(0.0, 0.0, 0.001));
        assert!((polygon_area(&poly) - (full - inner)).abs() < 1e-6);
        assert!(!poly.contains(pt(0.0, 0.0)));
        assert!(poly.contains(pt(0.0007, 0.0)));
    }

    #[test]
    fn hull_of_triangle_and_square() {
        let tri = [pt(0.0, 0.0), pt(0.0, 1.0), pt(1.0, 0.0)];
        let hull = convex_hull(&tri).unwrap();
        assert_eq!(hull.exterior().len(), 3);
        for p in tri {
            assert!(hull.exterior().contains(&p));
        }

        let pts = [pt(0.0, 0.0), pt(0.0, 1.0), pt(1.0, 1.0), pt(1.0, 0.0), pt(0.5, 0.5)];
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.exterior().len(), 4);
        assert!(!hull.exterior().contains(&pt(0.5, 0.5)));
        // counterclockwise in (lon, lat)
        let xy: Vec<_> = hull.exterior().iter().map(|p| (p.lon, p.lat)).collect();
        assert!(shoelace(&xy) > 0.0);
    }

    #[test]
    fn hull_degenerate_cases() {
        assert_eq!(
            convex_hull(&[pt(0.0, 0.0), pt(1.0, 1.0)]).unwrap_err(),
            GeoError::DegenerateHull
        );
        assert_eq!(
            convex_hull(&[pt(0.0, 0.0), pt(1.0, 1.0), pt(2.0, 2.0)]).unwrap_err(),
            GeoError::DegenerateHull
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_points() -> impl Strategy<Value = Vec<GeoPoint>> {
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..40)
                .prop_map(|v| v.into_iter().map(|(a, b)| pt(a, b)).collect())
        }

        proptest! {
            #[test]
            fn hull_contains_inputs(points in arb_points()) {
                if let Ok(hull) = convex_hull(&points) {
                    for p in &points {
                        prop_assert!(hull.contains_with_tolerance(*p, 1e-9));
                    }
                }
            }

            #[test]
            fn area_invariant_under_reversal_and_rotation(points in arb_points(), rot in 0usize..40) {
                if let Ok(hull) = convex_hull(&points) {
                    let base = polygon_area(&hull);
                    let mut ring = hull.exterior().to_vec();
                    ring.reverse();
                    let rev = polygon_area(&RingPolygon::simple(ring.clone()).unwrap());
                    let n = ring.len();
                    ring.rotate_left(rot % n);
                    let rotated = polygon_area(&RingPolygon::simple(ring).unwrap());
                    let tol = 1e-9 * base.max(1.0);
                    prop_assert!((base - rev).abs() <= tol);
                    prop_assert!((base - rotated).abs() <= tol);
                }
            }
        }
    }
}
