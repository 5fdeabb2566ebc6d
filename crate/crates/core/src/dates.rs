use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

/// Inclusive calendar range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("inverted date range {start}..{end}")]
pub struct InvertedRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, InvertedRange> {
        if start > end {
            return Err(InvertedRange { start, end });
        }
        Ok(Self { start, end })
    }

    /// `center ± span` days.
    pub fn around(center: NaiveDate, span: u64) -> Self {
        Self {
            start: center - Days::new(span),
            end: center + Days::new(span),
        }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }

    pub fn num_days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    /// Zero-based offset of `d` from the start, if inside.
    pub fn offset(&self, d: NaiveDate) -> Option<usize> {
        self.contains(d).then(|| (d - self.start).num_days() as usize)
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let end = self.end;
        self.start.iter_days().take_while(move |d| *d <= end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_basics() {
        let a = NaiveDate::from_ymd_opt(2014, 9, 28).unwrap();
        let b = NaiveDate::from_ymd_opt(2014, 10, 2).unwrap();
        let r = DateRange::new(a, b).unwrap();
        assert_eq!(r.num_days(), 5);
        assert_eq!(r.days().count(), 5);
        assert_eq!(r.offset(b), Some(4));
        assert!(DateRange::new(b, a).is_err());
        assert_eq!(DateRange::around(a, 3).num_days(), 7);
    }
}
