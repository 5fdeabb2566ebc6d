//! Shared row-level bookkeeping for file loaders.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRejection {
    /// 1-based line number in the source file (header is line 1 for CSV).
    pub line: usize,
    pub reason: String,
}

/// Parsed data plus per-row accounting; `rows` counts data rows only.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub data: T,
    pub rows: usize,
    pub rejected: Vec<RowRejection>,
}

impl<T> Loaded<T> {
    pub fn accepted(&self) -> usize {
        self.rows - self.rejected.len()
    }
}

pub(crate) type Records = Vec<(usize, Result<csv::StringRecord, String>)>;

/// Iterate data records of a headered CSV, yielding (line, record) pairs.
/// Returns an error string when the header does not match `expected`.
pub(crate) fn csv_records(text: &str, expected: &[&str]) -> Result<Records, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(format!(
            "expected header {:?}, found {:?}",
            expected.join(","),
            got.join(",")
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = rec
            .as_ref()
            .ok()
            .and_then(|r| r.position())
            .map_or(i + 2, |p| p.line() as usize);
        let rec = rec.map_err(|e| e.to_string()).and_then(|r| {
            if r.len() == expected.len() {
                Ok(r)
            } else {
                Err(format!("expected {} fields, found {}", expected.len(), r.len()))
            }
        });
        out.push((line, rec));
    }
    Ok(out)
}

pub(crate) fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).unwrap_or("");
    raw.parse::<T>().map_err(|e| format!("bad {name} `{raw}`: {e}"))
}
