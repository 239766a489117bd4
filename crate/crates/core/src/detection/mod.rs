//! CUSUM statistics, threshold schedules and the online detectors.

pub mod cusum;
pub mod detector;
pub mod thresholds;

pub use cusum::{cusum_nonprivate, cusum_private, cusum_univariate, cusum_univariate_from_sums, cusum_weight};
pub use detector::{
    run_detector, CusumReport, DetectionRun, Detector, Monitor, NonPrivateMonitor, PrivateMonitor, StepReport,
    UnivariateMonitor,
};
pub use thresholds::{
    m1_truncation_floor, private_schedule_active, snr_check, threshold_nonprivate, threshold_private,
    threshold_univariate, DetectorKind, SnrReport, ThresholdParams,
};
