//! Monte Carlo studies: type I error under the global null, detection and
//! power of true splits, and coverage of confidence intervals, each compared
//! against sample splitting and the naive Z-interval.

mod design;
mod studies;

pub use design::{
    adjusted_rand_index, generate, replicate_rng, sample_split, true_splits, Design, TrueSplit,
};
pub use studies::{
    coverage_study, ks_critical_99, ks_uniform, null_study, power_study, qq_points, write_csv,
    write_qq, CoverageCell, CoverageRow, CoverageSummary, KsSummary, Method, NullRow, NullSummary,
    PowerCell, PowerRow, PowerSummary, SimConfig,
};
