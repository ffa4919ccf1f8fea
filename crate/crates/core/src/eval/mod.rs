//! Metrics, assumption checks, the window-regression baseline and the
//! domain-shift experiments.

pub mod checks;
pub mod metrics;
pub mod theory;
pub mod window;

pub use checks::{check_negative_correlation, check_symmetry, CorrelationReport, SymmetryReport};
pub use metrics::{mae, per_pair_mae, rmse, MetricsReport};
pub use theory::{
    discrepancy_experiment, sample_size_experiment, run_theory_lab, sir_comparison, DiscrepancyReport, HypothesisLoss,
    SampleSizeConfig, SampleSizeReport, SirComparisonConfig, SirComparisonReport, TheoryConfig, TheoryLabReport,
};
pub use window::{window_samples, WindowRegressor, WindowSample};
