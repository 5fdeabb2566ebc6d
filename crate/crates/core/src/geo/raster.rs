use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{GeoError, GeoPoint};

/// Regular lat/lon raster. Row 0 is the northern edge; `origin` is the
/// upper-left corner of cell (0, 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterGrid {
    pub origin: GeoPoint,
    pub cell_size: f64,
    pub nrows: usize,
    pub ncols: usize,
    pub nodata: f64,
    values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(
        origin: GeoPoint,
        cell_size: f64,
        nrows: usize,
        ncols: usize,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self, GeoError> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(GeoError::InvalidRaster(format!("cell size {cell_size}")));
        }
        if nrows == 0 || ncols == 0 {
            return Err(GeoError::InvalidRaster("empty grid".into()));
        }
        if values.len() != nrows * ncols {
            return Err(GeoError::InvalidRaster(format!(
                "{} values for a {nrows}x{ncols} grid",
                values.len()
            )));
        }
        Ok(Self {
            origin,
            cell_size,
            nrows,
            ncols,
            nodata,
            values,
        })
    }

    /// Grid filled with `f(row, col)`.
    pub fn from_fn(
        origin: GeoPoint,
        cell_size: f64,
        nrows: usize,
        ncols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, GeoError> {
        let mut values = Vec::with_capacity(nrows * ncols);
        for r in 0..nrows {
            for c in 0..ncols {
                values.push(f(r, c));
            }
        }
        Self::new(origin, cell_size, nrows, ncols, -9999.0, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    /// `None` for nodata or non-finite cells.
    pub fn data(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.get(row, col);
        (v != self.nodata && v.is_finite()).then_some(v)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> GeoPoint {
        GeoPoint {
            lat: self.origin.lat - (row as f64 + 0.5) * self.cell_size,
            lon: self.origin.lon + (col as f64 + 0.5) * self.cell_size,
        }
    }

    pub fn cell_at(&self, p: GeoPoint) -> Option<(usize, usize)> {
        let col = ((p.lon - self.origin.lon) / self.cell_size).floor();
        let row = ((self.origin.lat - p.lat) / self.cell_size).floor();
        if col < 0.0 || row < 0.0 {
            return None;
        }
        let (row, col) = (row as usize, col as usize);
        (row < self.nrows && col < self.ncols).then_some((row, col))
    }

    /// Inclusive row/col ranges of cells whose centers may fall in the box.
    pub(crate) fn window(
        &self,
        min_lat: f64,
        min_lon: f64,
        max_lat: f64,
        max_lon: f64,
    ) -> Option<(std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>)> {
        let cs = self.cell_size;
        let c0 = ((min_lon - self.origin.lon) / cs - 0.5).ceil().max(0.0);
        let c1 = ((max_lon - self.origin.lon) / cs - 0.5).floor();
        let r0 = ((self.origin.lat - max_lat) / cs - 0.5).ceil().max(0.0);
        let r1 = ((self.origin.lat - min_lat) / cs - 0.5).floor();
        if c1 < c0 || r1 < r0 || c0 >= self.ncols as f64 || r0 >= self.nrows as f64 {
            return None;
        }
        let c1 = (c1 as usize).min(self.ncols - 1);
        let r1 = (r1 as usize).min(self.nrows - 1);
        Some((r0 as usize..=r1, c0 as usize..=c1))
    }

    /// Parse an ESRI ASCII grid.
    pub fn from_ascii_grid(text: &str) -> Result<Self, GeoError> {
        let bad = |m: String| GeoError::InvalidRaster(m);
        let mut header = std::collections::HashMap::new();
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.peek() {
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else {
                lines.next();
                continue;
            };
            if key.parse::<f64>().is_ok() {
                break;
            }
            let value = parts
                .next()
                .ok_or_else(|| bad(format!("header `{key}` has no value")))?
                .parse::<f64>()
                .map_err(|e| bad(format!("header `{key}`: {e}")))?;
            header.insert(key.to_ascii_lowercase(), value);
            lines.next();
        }
        let get = |k: &str| header.get(k).copied();
        let need = |k: &str| get(k).ok_or_else(|| bad(format!("missing header `{k}`")));
        let ncols = need("ncols")? as usize;
        let nrows = need("nrows")? as usize;
        let cell_size = need("cellsize")?;
        let half = cell_size / 2.0;
        let xll = get("xllcorner")
            .or_else(|| get("xllcenter").map(|v| v - half))
            .ok_or_else(|| bad("missing header `xllcorner`".into()))?;
        let yll = get("yllcorner")
            .or_else(|| get("yllcenter").map(|v| v - half))
            .ok_or_else(|| bad("missing header `yllcorner`".into()))?;
        let nodata = get("nodata_value").unwrap_or(-9999.0);
        let mut values = Vec::with_capacity(nrows * ncols);
        for line in lines {
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|e| bad(format!("value `{tok}`: {e}")))?);
            }
        }
        let origin = GeoPoint::new(yll + nrows as f64 * cell_size, xll)?;
        Self::new(origin, cell_size, nrows, ncols, nodata, values)
    }

    pub fn to_ascii_grid(&self) -> String {
        let mut out = String::new();
        let yll = self.origin.lat - self.nrows as f64 * self.cell_size;
        writeln!(out, "ncols {}", self.ncols).unwrap();
        writeln!(out, "nrows {}", self.nrows).unwrap();
        writeln!(out, "xllcorner {}", self.origin.lon).unwrap();
        writeln!(out, "yllcorner {yll}").unwrap();
        writeln!(out, "cellsize {}", self.cell_size).unwrap();
        writeln!(out, "NODATA_value {}", self.nodata).unwrap();
        for row in self.values.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }
}
