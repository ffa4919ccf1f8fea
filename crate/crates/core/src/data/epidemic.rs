//! Epidemic-period bookkeeping for turning count series into SIR samples.

use crate::error::{Error, Result};
use crate::sirgcn::{SirSample, SirState};

use super::table::{Pair, TimeSeriesTable, Timestamps};

/// Total populations approximated as ten times the average annual sum of
/// infectious counts, per vertex.
///
/// Only complete ISO years (52 or 53 rows) are averaged when the table has
/// any; otherwise every year present is used.
pub fn approximate_population(table: &TimeSeriesTable) -> Result<Vec<f64>> {
    let weeks = match table.timestamps() {
        Timestamps::IsoWeek(w) => w,
        Timestamps::Epoch(_) => {
            return Err(Error::InvalidParams("population approximation needs weekly data".into()))
        }
    };
    let n = table.n();
    let mut years: Vec<(i32, usize, Vec<f64>)> = Vec::new();
    for (t, w) in weeks.iter().enumerate() {
        if years.last().is_none_or(|y| y.0 != w.year) {
            years.push((w.year, 0, vec![0.0; n]));
        }
        let y = years.last_mut().expect("just pushed");
        y.1 += 1;
        for i in 0..n {
            if table.row_mask(t)[i] {
                y.2[i] += table.row(t)[i];
            }
        }
    }
    let complete: Vec<&(i32, usize, Vec<f64>)> = years.iter().filter(|y| y.1 >= 52).collect();
    let used: Vec<&(i32, usize, Vec<f64>)> = if complete.is_empty() { years.iter().collect() } else { complete };
    let pop: Vec<f64> = (0..n)
        .map(|i| 10.0 * used.iter().map(|y| y.2[i]).sum::<f64>() / used.len() as f64)
        .collect();
    if let Some(vertex) = pop.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::DegeneratePopulation { vertex });
    }
    Ok(pop)
}

/// Row indices where a new epidemic period starts: every row whose ISO week
/// equals `start_week`, plus row 0.
pub fn season_starts(table: &TimeSeriesTable, start_week: u32) -> Result<Vec<usize>> {
    let weeks = match table.timestamps() {
        Timestamps::IsoWeek(w) => w,
        Timestamps::Epoch(_) => return Err(Error::InvalidParams("season starts need weekly data".into())),
    };
    let mut starts = vec![0];
    starts.extend((1..weeks.len()).filter(|&t| weeks[t].week == start_week));
    Ok(starts)
}

/// Row indices `0, period, 2 period, ...` below `len`.
pub fn periodic_starts(len: usize, period: usize) -> Vec<usize> {
    (0..len).step_by(period.max(1)).collect()
}

/// Attaches the epidemic state to each pair.
///
/// The period of pair `t` is the last start at or before `t`; its state has
/// `S(t0) = susceptible_fraction * N` and accumulates the observed counts
/// since `t0`. Pairs whose target opens a new period are skipped.
pub fn sir_samples(
    table: &TimeSeriesTable,
    pairs: &[Pair],
    population: &[f64],
    starts: &[usize],
    susceptible_fraction: f64,
) -> Result<Vec<SirSample>> {
    if population.len() != table.n() {
        return Err(Error::Dimension {
            what: "population",
            expected: table.n(),
            got: population.len(),
        });
    }
    if starts.first() != Some(&0) || starts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("period starts must begin at 0 and increase".into()));
    }
    let observed = |t: usize| -> Vec<f64> {
        table
            .row(t)
            .iter()
            .zip(table.row_mask(t))
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect()
    };
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        if starts.binary_search(&(p.t + 1)).is_ok() {
            continue;
        }
        let t0 = starts[starts.partition_point(|&s| s <= p.t) - 1];
        let base = SirState::at_period_start(population.to_vec(), &observed(t0), susceptible_fraction, t0);
        let history: Vec<Vec<f64>> = (t0..p.t).map(observed).collect();
        let state = SirState::from_history(population.to_vec(), base.recovered_offset, t0, &history);
        out.push(SirSample {
            state,
            pair: p.clone(),
        });
    }
    Ok(out)
}
