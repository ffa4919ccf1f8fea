use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ISO-8601 week label such as `2015-W07`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IsoWeek {
    pub year: i32,
    pub week: u32,
}

impl IsoWeek {
    pub fn new(year: i32, week: u32) -> Result<Self> {
        NaiveDate::from_isoywd_opt(year, week, Weekday::Mon)
            .map(|_| Self { year, week })
            .ok_or_else(|| Error::InvalidParams(format!("no ISO week {year}-W{week:02}")))
    }

    pub fn monday(self) -> NaiveDate {
        NaiveDate::from_isoywd_opt(self.year, self.week, Weekday::Mon).expect("validated on construction")
    }

    pub fn succ(self) -> Self {
        let d = self.monday() + chrono::Duration::days(7);
        let iw = d.iso_week();
        Self {
            year: iw.year(),
            week: iw.week(),
        }
    }

    /// Meteorological season of the week's Thursday (the day that fixes ISO
    /// week membership).
    pub fn season(self) -> Season {
        let thursday = self.monday() + chrono::Duration::days(3);
        match thursday.month() {
            12 | 1 | 2 => Season::Winter,
            3..=5 => Season::Spring,
            6..=8 => Season::Summer,
            _ => Season::Fall,
        }
    }
}

impl fmt::Display for IsoWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-W{:02}", self.year, self.week)
    }
}

impl FromStr for IsoWeek {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("`{s}` is not an ISO week label (YYYY-Www)"));
        let (y, w) = s.trim().split_once("-W").ok_or_else(bad)?;
        let year = y.parse().map_err(|_| bad())?;
        let week = w.parse().map_err(|_| bad())?;
        IsoWeek::new(year, week)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Fall,
}

/// Time axis of a series: integer epoch seconds (traffic) or ISO weeks (ILI).
///
/// Epoch seconds are read as local wall-clock time; no timezone is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Timestamps {
    Epoch(Vec<i64>),
    IsoWeek(Vec<IsoWeek>),
}

pub const SECONDS_PER_DAY: i64 = 86_400;

impl Timestamps {
    pub fn len(&self) -> usize {
        match self {
            Timestamps::Epoch(v) => v.len(),
            Timestamps::IsoWeek(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, t: usize) -> String {
        match self {
            Timestamps::Epoch(v) => v[t].to_string(),
            Timestamps::IsoWeek(v) => v[t].to_string(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Timestamps::Epoch(v) => {
                if v.len() >= 2 {
                    let step = v[1] - v[0];
                    if step <= 0 {
                        return Err(Error::InvalidParams("timestamps must be strictly increasing".into()));
                    }
                    if let Some(k) = v.windows(2).position(|w| w[1] - w[0] != step) {
                        return Err(Error::InvalidParams(format!(
                            "timestamps not uniformly spaced at row {}",
                            k + 1
                        )));
                    }
                }
            }
            Timestamps::IsoWeek(v) => {
                if let Some(k) = v.windows(2).position(|w| w[0].succ() != w[1]) {
                    return Err(Error::InvalidParams(format!(
                        "ISO weeks not consecutive at row {}",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Day index since the epoch and Monday-based weekday (0 = Monday).
pub fn epoch_day_and_weekday(secs: i64) -> (i64, u32) {
    let day = secs.div_euclid(SECONDS_PER_DAY);
    // 1970-01-01 was a Thursday.
    (day, (day + 3).rem_euclid(7) as u32)
}

/// Seconds since local midnight.
pub fn epoch_second_of_day(secs: i64) -> i64 {
    secs.rem_euclid(SECONDS_PER_DAY)
}

/// A time-by-vertex feature matrix with an observation mask (true = observed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesTable {
    timestamps: Timestamps,
    values: Vec<Vec<f64>>,
    mask: Vec<Vec<bool>>,
}

impl TimeSeriesTable {
    pub fn new(timestamps: Timestamps, values: Vec<Vec<f64>>, mask: Vec<Vec<bool>>) -> Result<Self> {
        timestamps.validate()?;
        if values.len() != timestamps.len() || mask.len() != timestamps.len() {
            return Err(Error::Dimension {
                what: "time rows",
                expected: timestamps.len(),
                got: values.len().min(mask.len()),
            });
        }
        let n = values.first().map_or(0, Vec::len);
        for (t, (row, m)) in values.iter().zip(&mask).enumerate() {
            if row.len() != n || m.len() != n {
                return Err(Error::InvalidParams(format!("ragged row {t}")));
            }
            if let Some(i) = row.iter().zip(m).position(|(v, &ok)| ok && !v.is_finite()) {
                return Err(Error::InvalidParams(format!("non-finite observed value at ({t},{i})")));
            }
        }
        Ok(Self {
            timestamps,
            values,
            mask,
        })
    }

    /// Builds a table where exact zeros are treated as missing observations.
    pub fn with_zero_missing(timestamps: Timestamps, values: Vec<Vec<f64>>) -> Result<Self> {
        let mask = values
            .iter()
            .map(|row| row.iter().map(|&v| v != 0.0).collect())
            .collect();
        Self::new(timestamps, values, mask)
    }

    pub fn fully_observed(timestamps: Timestamps, values: Vec<Vec<f64>>) -> Result<Self> {
        let mask = values.iter().map(|row| vec![true; row.len()]).collect();
        Self::new(timestamps, values, mask)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn timestamps(&self) -> &Timestamps {
        &self.timestamps
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn mask(&self) -> &[Vec<bool>] {
        &self.mask
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t]
    }

    pub fn row_mask(&self, t: usize) -> &[bool] {
        &self.mask[t]
    }

    /// The one-step pair `(x_t, x_{t+1})`.
    pub fn pair(&self, t: usize) -> Pair {
        Pair {
            t,
            input: self.values[t].clone(),
            input_mask: self.mask[t].clone(),
            target: self.values[t + 1].clone(),
            target_mask: self.mask[t + 1].clone(),
        }
    }

    /// Every one-step pair with at least one usable entry.
    pub fn pairs(&self) -> Vec<Pair> {
        (0..self.len().saturating_sub(1))
            .map(|t| self.pair(t))
            .filter(|p| p.usable_count() > 0)
            .collect()
    }
}

/// A one-step training example `(x_t, x_{t+1})` with observation masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    /// Row index of `x_t` in the source table.
    pub t: usize,
    pub input: Vec<f64>,
    pub input_mask: Vec<bool>,
    pub target: Vec<f64>,
    pub target_mask: Vec<bool>,
}

impl Pair {
    pub fn fully_observed(t: usize, input: Vec<f64>, target: Vec<f64>) -> Self {
        let n = input.len();
        Self {
            t,
            input,
            input_mask: vec![true; n],
            target,
            target_mask: vec![true; n],
        }
    }

    /// A prediction at `i` is scored only when both `x_i(t)` and `x_i(t+1)`
    /// were observed.
    pub fn usable(&self, i: usize) -> bool {
        self.input_mask[i] && self.target_mask[i]
    }

    pub fn usable_count(&self) -> usize {
        (0..self.input.len()).filter(|&i| self.usable(i)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_week_parse_and_succ() {
        let w: IsoWeek = "2015-W52".parse().unwrap();
        assert_eq!(w.succ(), IsoWeek::new(2015, 53).unwrap());
        assert_eq!(IsoWeek::new(2015, 53).unwrap().succ().to_string(), "2016-W01");
        assert!("2016-W53".parse::<IsoWeek>().is_err());
        assert!("2016W01".parse::<IsoWeek>().is_err());
    }

    #[test]
    fn seasons() {
        assert_eq!(IsoWeek::new(2019, 2).unwrap().season(), Season::Winter);
        assert_eq!(IsoWeek::new(2019, 15).unwrap().season(), Season::Spring);
        assert_eq!(IsoWeek::new(2019, 28).unwrap().season(), Season::Summer);
        assert_eq!(IsoWeek::new(2019, 40).unwrap().season(), Season::Fall);
        assert_eq!(IsoWeek::new(2019, 50).unwrap().season(), Season::Winter);
    }

    #[test]
    fn weekday_of_epoch() {
        assert_eq!(epoch_day_and_weekday(0), (0, 3));
        // 1970-01-05 00:00 was a Monday.
        assert_eq!(epoch_day_and_weekday(4 * SECONDS_PER_DAY).1, 0);
        assert_eq!(epoch_second_of_day(4 * SECONDS_PER_DAY + 3600), 3600);
    }

    #[test]
    fn table_validation() {
        let ts = Timestamps::Epoch(vec![0, 300, 600]);
        assert!(TimeSeriesTable::fully_observed(ts.clone(), vec![vec![1.0]; 3]).is_ok());
        assert!(TimeSeriesTable::fully_observed(Timestamps::Epoch(vec![0, 300, 900]), vec![vec![1.0]; 3]).is_err());
        assert!(TimeSeriesTable::fully_observed(Timestamps::Epoch(vec![0, 0, 0]), vec![vec![1.0]; 3]).is_err());
        assert!(TimeSeriesTable::fully_observed(ts.clone(), vec![vec![1.0], vec![1.0, 2.0], vec![1.0]]).is_err());
        let t = TimeSeriesTable::with_zero_missing(ts, vec![vec![1.0, 0.0]; 3]).unwrap();
        assert_eq!(t.row_mask(1), &[true, false]);
    }

    #[test]
    fn pairs_drop_unusable() {
        let ts = Timestamps::Epoch(vec![0, 300, 600]);
        let t = TimeSeriesTable::with_zero_missing(ts, vec![vec![1.0, 2.0], vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert!(t.pairs().is_empty());
    }
}
