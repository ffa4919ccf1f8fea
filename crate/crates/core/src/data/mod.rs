//! Tabular series, CSV input/output, mismatched splits and synthetic generators.

pub mod epidemic;
pub mod io;
pub mod split;
pub mod synth;
pub mod table;

pub use epidemic::{approximate_population, periodic_starts, season_starts, sir_samples};
pub use io::{load_edges, load_populations, load_series, write_edges, write_populations, write_series};
pub use split::{build_split, ratio_split, HourWindow, Split, SplitMode, SplitSpec};
pub use synth::{synth_rd, synth_sir, Pattern, PatternKind, SynthConfig, SynthRd, SynthSir, Topology};
pub use table::{IsoWeek, Pair, Season, TimeSeriesTable, Timestamps};
