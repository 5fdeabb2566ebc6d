use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{BoundingBox, GeoError, GeoPoint, LocalProjection, RasterGrid, RingPolygon};

/// A digitized water layer at one acquisition date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroLayer {
    pub id: String,
    pub date: NaiveDate,
    pub polygons: Vec<RingPolygon>,
}

/// Metric grid laid over a local projection. Row 0 is the northern edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisGrid {
    pub projection: LocalProjection,
    pub x_min: f64,
    pub y_max: f64,
    pub cell_size: f64,
    pub nrows: usize,
    pub ncols: usize,
}

impl AnalysisGrid {
    pub fn len(&self) -> usize {
        self.nrows * self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn center_xy(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.x_min + (col as f64 + 0.5) * self.cell_size,
            self.y_max - (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn cell_center(&self, index: usize) -> GeoPoint {
        let (x, y) = self.center_xy(index / self.ncols, index % self.ncols);
        self.projection.unproject(x, y)
    }

    /// Corner ring of a cell, counterclockwise.
    pub fn cell_ring(&self, index: usize) -> Vec<GeoPoint> {
        let (row, col) = (index / self.ncols, index % self.ncols);
        let x0 = self.x_min + col as f64 * self.cell_size;
        let y1 = self.y_max - row as f64 * self.cell_size;
        let (x1, y0) = (x0 + self.cell_size, y1 - self.cell_size);
        [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
            .into_iter()
            .map(|(x, y)| self.projection.unproject(x, y))
            .collect()
    }

    /// Center-in-polygon occupancy of the union of `polys`.
    fn rasterize(&self, polys: &[RingPolygon]) -> Vec<bool> {
        let mut out = vec![false; self.len()];
        let projected: Vec<Vec<Vec<(f64, f64)>>> = polys
            .iter()
            .map(|p| {
                p.rings()
                    .map(|r| r.iter().map(|v| self.projection.project(*v)).collect())
                    .collect()
            })
            .collect();
        let mut crossings = Vec::new();
        for row in 0..self.nrows {
            let (_, y) = self.center_xy(row, 0);
            for rings in &projected {
                crossings.clear();
                for ring in rings {
                    let n = ring.len();
                    for i in 0..n {
                        let (xa, ya) = ring[i];
                        let (xb, yb) = ring[(i + 1) % n];
                        if (ya > y) != (yb > y) {
                            crossings.push(xa + (y - ya) * (xb - xa) / (yb - ya));
                        }
                    }
                }
                crossings.sort_by(f64::total_cmp);
                // inside on [x_{2k}, x_{2k+1}) under the even-odd rule
                for span in crossings.chunks_exact(2) {
                    let lo = ((span[0] - self.x_min) / self.cell_size - 0.5).ceil().max(0.0);
                    let hi = ((span[1] - self.x_min) / self.cell_size - 0.5).ceil();
                    let hi = hi.min(self.ncols as f64);
                    if hi <= lo {
                        continue;
                    }
                    for col in lo as usize..hi as usize {
                        out[row * self.ncols + col] = true;
                    }
                }
            }
        }
        out
    }
}

/// Cells wet after the event but not before.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodExtent {
    pub grid: AnalysisGrid,
    /// Sorted row-major cell indices into `grid`.
    pub mask: Vec<usize>,
    pub analysis_cell_size: f64,
    pub area_m2: f64,
    pub pre_layer_id: String,
    pub post_layer_id: String,
    pub pre_date: NaiveDate,
    pub post_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodExtentSummary {
    pub area_m2: f64,
    pub cells: usize,
    pub analysis_cell_size: f64,
    pub pre_layer_id: String,
    pub post_layer_id: String,
    pub pre_date: NaiveDate,
    pub post_date: NaiveDate,
}

impl FloodExtent {
    pub fn summary(&self) -> FloodExtentSummary {
        FloodExtentSummary {
            area_m2: self.area_m2,
            cells: self.mask.len(),
            analysis_cell_size: self.analysis_cell_size,
            pre_layer_id: self.pre_layer_id.clone(),
            post_layer_id: self.post_layer_id.clone(),
            pre_date: self.pre_date,
            post_date: self.post_date,
        }
    }
}

/// Overlay two hydrography layers on a common grid spanning their union.
pub fn flood_extent(pre: &HydroLayer, post: &HydroLayer, analysis_cell_size: f64) -> Result<FloodExtent, GeoError> {
    if pre.polygons.is_empty() {
        return Err(GeoError::EmptyLayer(pre.id.clone()));
    }
    if post.polygons.is_empty() {
        return Err(GeoError::EmptyLayer(post.id.clone()));
    }
    if !(analysis_cell_size.is_finite() && analysis_cell_size > 0.0) {
        return Err(GeoError::InvalidParameter(format!(
            "analysis cell size {analysis_cell_size}"
        )));
    }
    if pre.date >= post.date {
        return Err(GeoError::InvalidParameter(format!(
            "pre date {} is not before post date {}",
            pre.date, post.date
        )));
    }
    let bbox = pre
        .polygons
        .iter()
        .chain(&post.polygons)
        .map(RingPolygon::bbox)
        .reduce(|a, b| a.union(&b))
        .expect("layers are non-empty");
    let grid = grid_over(&bbox, analysis_cell_size);
    let wet_before = grid.rasterize(&pre.polygons);
    let wet_after = grid.rasterize(&post.polygons);
    let mask: Vec<usize> = (0..grid.len()).filter(|&i| wet_after[i] && !wet_before[i]).collect();
    let area_m2 = mask.len() as f64 * analysis_cell_size * analysis_cell_size;
    Ok(FloodExtent {
        grid,
        mask,
        analysis_cell_size,
        area_m2,
        pre_layer_id: pre.id.clone(),
        post_layer_id: post.id.clone(),
        pre_date: pre.date,
        post_date: post.date,
    })
}

fn grid_over(bbox: &BoundingBox, cell_size: f64) -> AnalysisGrid {
    let projection = LocalProjection::new(bbox.center());
    let corners: Vec<(f64, f64)> = bbox.corners().into_iter().map(|p| projection.project(p)).collect();
    let x_min = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let x_max = corners.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let y_min = corners.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let y_max = corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    // tolerate round-off so exact multiples do not gain a spill-over column
    let ncols = (((x_max - x_min) / cell_size - 1e-9).ceil() as usize).max(1);
    let nrows = (((y_max - y_min) / cell_size - 1e-9).ceil() as usize).max(1);
    AnalysisGrid {
        projection,
        x_min,
        y_max,
        cell_size,
        nrows,
        ncols,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElevationStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n_cells: usize,
}

/// Elevation statistics over DEM cells whose centers fall inside `poly`.
pub fn drape_stats(poly: &RingPolygon, dem: &RasterGrid) -> Result<ElevationStats, GeoError> {
    drape_layer_stats(std::slice::from_ref(poly), dem)
}

/// As [`drape_stats`] over the union of several polygons; each cell counts once.
pub fn drape_layer_stats(polys: &[RingPolygon], dem: &RasterGrid) -> Result<ElevationStats, GeoError> {
    let Some(bbox) = polys.iter().map(RingPolygon::bbox).reduce(|a, b| a.union(&b)) else {
        return Err(GeoError::NoElevationCoverage);
    };
    let Some((rows, cols)) = dem.window(bbox.min_lat, bbox.min_lon, bbox.max_lat, bbox.max_lon) else {
        return Err(GeoError::NoElevationCoverage);
    };
    let (mut sum, mut min, mut max, mut n) = (0.0, f64::INFINITY, f64::NEG_INFINITY, 0usize);
    for r in rows {
        for c in cols.clone() {
            let center = dem.cell_center(r, c);
            if !polys.iter().any(|p| p.contains(center)) {
                continue;
            }
            if let Some(z) = dem.data(r, c) {
                sum += z;
                min = min.min(z);
                max = max.max(z);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(GeoError::NoElevationCoverage);
    }
    let mean = (sum / n as f64).clamp(min, max);
    Ok(ElevationStats {
        mean,
        min,
        max,
        n_cells: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiverRise {
    pub d_mean: f64,
    pub d_min: f64,
    pub d_max: f64,
}

pub fn river_rise(pre: &ElevationStats, post: &ElevationStats) -> RiverRise {
    RiverRise {
        d_mean: post.mean - pre.mean,
        d_min: post.min - pre.min,
        d_max: post.max - pre.max,
    }
}

/// Persons inside the flood mask. Each population cell is split evenly over
/// the analysis cells whose centers it contains; nodata counts as zero.
pub fn affected_population(extent: &FloodExtent, pop: &RasterGrid) -> Result<f64, GeoError> {
    let grid = &extent.grid;
    let mut shares: HashMap<(usize, usize), u32> = HashMap::new();
    for i in 0..grid.len() {
        if let Some(cell) = pop.cell_at(grid.cell_center(i)) {
            *shares.entry(cell).or_default() += 1;
        }
    }
    if shares.is_empty() {
        return Err(GeoError::NoPopulationCoverage);
    }
    let mut total = 0.0;
    for &i in &extent.mask {
        let Some(cell) = pop.cell_at(grid.cell_center(i)) else {
            continue;
        };
        if let Some(v) = pop.data(cell.0, cell.1) {
            total += v / f64::from(shares[&cell]);
        }
    }
    Ok(total.max(0.0))
}
