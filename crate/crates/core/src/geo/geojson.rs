//! Minimal RFC 7946 reading and writing over `serde_json::Value`.

use serde_json::{json, Map, Value};

use super::{BoundingBox, GeoError, GeoPoint, RingPolygon};

fn err(msg: impl Into<String>) -> GeoError {
    GeoError::GeoJson(msg.into())
}

/// Read every Polygon / MultiPolygon in a FeatureCollection, Feature or bare
/// geometry. Non-areal geometries are skipped.
pub fn parse_polygons(text: &str) -> Result<Vec<RingPolygon>, GeoError> {
    let value: Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::new();
    collect(&value, &mut out)?;
    Ok(out)
}

fn collect(value: &Value, out: &mut Vec<RingPolygon>) -> Result<(), GeoError> {
    let kind = value
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| err("object without `type`"))?;
    match kind {
        "FeatureCollection" => {
            let features = value
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| err("FeatureCollection without `features`"))?;
            for f in features {
                collect(f, out)?;
            }
        }
        "Feature" => match value.get("geometry") {
            Some(Value::Null) | None => {}
            Some(g) => collect(g, out)?,
        },
        "Polygon" => out.push(polygon(coords(value)?)?),
        "MultiPolygon" => {
            let parts = coords(value)?
                .as_array()
                .ok_or_else(|| err("MultiPolygon coordinates must be an array"))?;
            for p in parts {
                out.push(polygon(p)?);
            }
        }
        "Point" | "MultiPoint" | "LineString" | "MultiLineString" | "GeometryCollection" => {}
        other => return Err(err(format!("unsupported geometry `{other}`"))),
    }
    Ok(())
}

fn coords(value: &Value) -> Result<&Value, GeoError> {
    value
        .get("coordinates")
        .ok_or_else(|| err("geometry without `coordinates`"))
}

fn polygon(value: &Value) -> Result<RingPolygon, GeoError> {
    let rings = value
        .as_array()
        .ok_or_else(|| err("polygon coordinates must be an array of rings"))?;
    let mut rings = rings.iter().map(ring);
    let exterior = rings.next().ok_or_else(|| err("polygon without rings"))??;
    let holes = rings.collect::<Result<Vec<_>, _>>()?;
    RingPolygon::new(exterior, holes)
}

fn ring(value: &Value) -> Result<Vec<GeoPoint>, GeoError> {
    value
        .as_array()
        .ok_or_else(|| err("ring must be an array of positions"))?
        .iter()
        .map(|pos| {
            let lon = pos.get(0).and_then(Value::as_f64);
            let lat = pos.get(1).and_then(Value::as_f64);
            match (lat, lon) {
                (Some(lat), Some(lon)) => GeoPoint::new(lat, lon),
                _ => Err(err("position must be [lon, lat]")),
            }
        })
        .collect()
}

fn closed_ring(points: &[GeoPoint]) -> Value {
    let mut coords: Vec<Value> = points.iter().map(|p| json!([p.lon, p.lat])).collect();
    if let Some(first) = points.first() {
        coords.push(json!([first.lon, first.lat]));
    }
    Value::Array(coords)
}

pub fn polygon_geometry(poly: &RingPolygon) -> Value {
    let rings: Vec<Value> = poly.rings().map(closed_ring).collect();
    json!({ "type": "Polygon", "coordinates": rings })
}

pub fn ring_geometry(points: &[GeoPoint]) -> Value {
    json!({ "type": "Polygon", "coordinates": [closed_ring(points)] })
}

pub fn bbox_geometry(bbox: &BoundingBox) -> Value {
    ring_geometry(&bbox.corners())
}

pub fn point_geometry(p: GeoPoint) -> Value {
    json!({ "type": "Point", "coordinates": [p.lon, p.lat] })
}

pub fn feature(geometry: Value, properties: Map<String, Value>) -> Value {
    json!({ "type": "Feature", "geometry": geometry, "properties": properties })
}

pub fn feature_collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

/// Structural RFC 7946 check of a FeatureCollection: feature and geometry
/// types, position arity and closed linear rings.
pub fn check_feature_collection(value: &Value) -> Result<usize, GeoError> {
    if value.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(err("top level is not a FeatureCollection"));
    }
    let features = value
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| err("missing `features` array"))?;
    for f in features {
        if f.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(err("member is not a Feature"));
        }
        if !f.get("properties").is_some_and(|p| p.is_object() || p.is_null()) {
            return Err(err("feature without `properties`"));
        }
        let g = f.get("geometry").ok_or_else(|| err("feature without `geometry`"))?;
        if !g.is_null() {
            check_geometry(g)?;
        }
    }
    Ok(features.len())
}

fn check_position(p: &Value) -> Result<(), GeoError> {
    let arr = p.as_array().ok_or_else(|| err("position is not an array"))?;
    if arr.len() < 2 || !arr.iter().all(Value::is_number) {
        return Err(err("position needs at least two numbers"));
    }
    Ok(())
}

fn check_linear_ring(r: &Value) -> Result<(), GeoError> {
    let arr = r.as_array().ok_or_else(|| err("ring is not an array"))?;
    if arr.len() < 4 {
        return Err(err("linear ring needs at least 4 positions"));
    }
    arr.iter().try_for_each(check_position)?;
    if arr.first() != arr.last() {
        return Err(err("linear ring is not closed"));
    }
    Ok(())
}

fn check_geometry(g: &Value) -> Result<(), GeoError> {
    let c = coords(g)?;
    let as_arr = |v: &Value| v.as_array().cloned().ok_or_else(|| err("coordinates not an array"));
    match g.get("type").and_then(Value::as_str) {
        Some("Point") => check_position(c),
        Some("Polygon") => as_arr(c)?.iter().try_for_each(check_linear_ring),
        Some("MultiPolygon") => as_arr(c)?
            .iter()
            .try_for_each(|p| as_arr(p)?.iter().try_for_each(check_linear_ring)),
        other => Err(err(format!("unexpected geometry type {other:?}"))),
    }
}
