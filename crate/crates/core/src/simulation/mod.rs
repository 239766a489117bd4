//! Synthetic streams, the lower-bound constructions and replicated
//! experiments.

pub mod generate;
pub mod metrics;
pub mod replicate;
pub mod scenario;

pub use generate::{
    generate_stream, lower_bound_regression, lower_bound_univariate, nonprivate_lower_bound_radius,
    private_lower_bound_radius, Stream,
};
pub use metrics::{bernoulli_sum_tail_bound, fit_scaling, quantile, summarize, Metrics, ScalingFit};
pub use replicate::{run_replications, run_single, successful, DetectorConfig, Replication, RunOutcome};
pub use scenario::{lattice_points, Model, NoiseLaw, RegressionFn, ScenarioSpec, XLaw};
