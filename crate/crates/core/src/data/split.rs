//! Mismatched train/validation/test splits.
//!
//! Traffic: train and validate on a clock window of weekdays, test on a
//! (possibly different) clock window of weekend days. ILI: train and validate
//! on Winter and Summer weeks, test on Spring and Fall weeks. A pair
//! `(x_t, x_{t+1})` belongs to a regime only when both of its time points do,
//! so no pair can land in two regimes.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::table::{epoch_day_and_weekday, epoch_second_of_day, Pair, Season, TimeSeriesTable, Timestamps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    TrafficWeekdayWeekend,
    IliSeason,
    /// Time-ordered pairs: the last `test_fraction` is the test regime, the
    /// rest is split by `ratio`. Meant for synthetic series without a calendar.
    Chronological,
}

/// Half-open clock window `[start_hour, end_hour)` in local time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourWindow {
    pub start_hour: f64,
    pub end_hour: f64,
}

impl HourWindow {
    pub fn new(start_hour: f64, end_hour: f64) -> Self {
        Self { start_hour, end_hour }
    }

    fn contains(&self, second_of_day: i64) -> bool {
        let h = second_of_day as f64 / 3600.0;
        h >= self.start_hour && h < self.end_hour
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_window: HourWindow,
    pub test_window: HourWindow,
    /// Number of consecutive weekdays to train on; `None` (written `"all"`)
    /// uses every weekday.
    #[serde(with = "count_or_all")]
    pub train_days: Option<usize>,
    /// Which seeded consecutive-weekday block to use.
    pub block: usize,
    /// `(train, validation)` proportions.
    pub ratio: (usize, usize),
    /// Share of pairs held out for testing in chronological mode.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self::traffic()
    }
}

impl SplitSpec {
    /// Weekday 8:00-12:00 training, weekend 13:00-14:00 testing, 12 weekdays, 3:1.
    pub fn traffic() -> Self {
        Self {
            mode: SplitMode::TrafficWeekdayWeekend,
            train_window: HourWindow::new(8.0, 12.0),
            test_window: HourWindow::new(13.0, 14.0),
            train_days: Some(12),
            block: 0,
            ratio: (3, 1),
            test_fraction: 0.2,
            seed: 0,
        }
    }

    /// Winter+Summer training, Spring+Fall testing, 5:2.
    pub fn ili() -> Self {
        Self {
            mode: SplitMode::IliSeason,
            train_days: None,
            ratio: (5, 2),
            ..Self::traffic()
        }
    }

    /// Last 20% of pairs for testing, the rest split 3:1.
    pub fn chronological() -> Self {
        Self {
            mode: SplitMode::Chronological,
            train_days: None,
            ..Self::traffic()
        }
    }
}

mod count_or_all {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Count(usize),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(k) => Repr::Count(*k),
            None => Repr::Word("all".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Count(k) => Ok(Some(k)),
            Repr::Word(w) if w == "all" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("train_days must be a count or \"all\", got `{w}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Vec<Pair>,
    pub val: Vec<Pair>,
    pub test: Vec<Pair>,
}

/// Splits `total` items chronologically in proportion `ratio`.
pub fn ratio_split(total: usize, ratio: (usize, usize)) -> usize {
    total * ratio.0 / (ratio.0 + ratio.1)
}

pub fn build_split(table: &TimeSeriesTable, spec: &SplitSpec) -> Result<Split> {
    if spec.ratio.0 == 0 || spec.ratio.1 == 0 {
        return Err(Error::InfeasibleSplit("ratio parts must be positive".into()));
    }
    let (train_idx, test_idx) = match (spec.mode, table.timestamps()) {
        (SplitMode::TrafficWeekdayWeekend, Timestamps::Epoch(ts)) => traffic_indices(ts, spec)?,
        (SplitMode::IliSeason, Timestamps::IsoWeek(weeks)) => {
            let regime = |t: usize, seasons: &[Season]| {
                seasons.contains(&weeks[t].season()) && seasons.contains(&weeks[t + 1].season())
            };
            let train_seasons = [Season::Winter, Season::Summer];
            let test_seasons = [Season::Spring, Season::Fall];
            (
                (0..table.len().saturating_sub(1)).filter(|&t| regime(t, &train_seasons)).collect(),
                (0..table.len().saturating_sub(1)).filter(|&t| regime(t, &test_seasons)).collect(),
            )
        }
        (SplitMode::Chronological, _) => {
            if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
                return Err(Error::InfeasibleSplit("test_fraction must lie in (0,1)".into()));
            }
            let total = table.len().saturating_sub(1);
            let cut = total - (total as f64 * spec.test_fraction).round() as usize;
            ((0..cut).collect(), (cut..total).collect())
        }
        (mode, _) => {
            return Err(Error::InfeasibleSplit(format!(
                "split mode {mode:?} does not match the table's timestamp kind"
            )))
        }
    };
    let keep = |idx: Vec<usize>| -> Vec<Pair> {
        idx.into_iter()
            .map(|t| table.pair(t))
            .filter(|p| p.usable_count() > 0)
            .collect()
    };
    let mut train = keep(train_idx);
    let test = keep(test_idx);
    let cut = ratio_split(train.len(), spec.ratio);
    let val = train.split_off(cut);
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::InfeasibleSplit(format!(
            "split yields {} train, {} validation, {} test pairs",
            train.len(),
            val.len(),
            test.len()
        )));
    }
    Ok(Split { train, val, test })
}

fn traffic_indices(ts: &[i64], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let weekday_days: BTreeSet<i64> = ts
        .iter()
        .map(|&s| epoch_day_and_weekday(s))
        .filter(|&(_, wd)| wd < 5)
        .map(|(d, _)| d)
        .collect();
    let weekday_days: Vec<i64> = weekday_days.into_iter().collect();
    let chosen: BTreeSet<i64> = match spec.train_days {
        None => weekday_days.iter().copied().collect(),
        Some(k) => {
            if k == 0 || k > weekday_days.len() {
                return Err(Error::InfeasibleSplit(format!(
                    "asked for {k} consecutive weekdays, table has {}",
                    weekday_days.len()
                )));
            }
            let start = block_start(spec.seed, spec.block, weekday_days.len() - k);
            weekday_days[start..start + k].iter().copied().collect()
        }
    };
    let same_day = |t: usize| epoch_day_and_weekday(ts[t]).0 == epoch_day_and_weekday(ts[t + 1]).0;
    let in_window = |t: usize, w: &HourWindow| {
        w.contains(epoch_second_of_day(ts[t])) && w.contains(epoch_second_of_day(ts[t + 1]))
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for t in 0..ts.len().saturating_sub(1) {
        if !same_day(t) {
            continue;
        }
        let (day, wd) = epoch_day_and_weekday(ts[t]);
        if wd < 5 && chosen.contains(&day) && in_window(t, &spec.train_window) {
            train.push(t);
        } else if wd >= 5 && in_window(t, &spec.test_window) {
            test.push(t);
        }
    }
    Ok((train, test))
}

/// Start offset (in weekdays) of block `block` for `seed`, uniform on `0..=max_start`.
fn block_start(seed: u64, block: usize, max_start: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start = 0;
    for _ in 0..=block {
        start = rng.random_range(0..=max_start);
    }
    start
}
