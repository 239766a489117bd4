//! Covariate partitions, streaming prefix sums and binned estimators.

pub mod estimators;
pub mod partition;
pub mod prefix;

pub use estimators::{
    estimate_nonprivate, estimate_private, mass_floor, nonprivate_bin_estimate, private_bin_estimate,
};
pub use partition::{BinPartition, DomainBox};
pub use prefix::{candidate_splits, Cumulative, PrefixState, ScanPolicy, Segment};
