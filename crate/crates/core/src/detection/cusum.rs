//! CUSUM statistics comparing the segment `1:s` with `(s+1):t`.

use crate::error::{invalid, Error, Result};
use crate::estimation::estimators::{nonprivate_segment_value, private_segment_value};
use crate::estimation::{BinPartition, PrefixState, Segment};

/// `sqrt(s (t - s) / t)`.
#[must_use]
pub fn cusum_weight(s: u64, t: u64) -> f64 {
    (s as f64 * (t - s) as f64 / t as f64).sqrt()
}

fn check(state: &PrefixState, s: u64, t: u64) -> Result<()> {
    if s == 0 || s >= t {
        return Err(invalid(format!("split must satisfy 1 <= s < t, got s={s}, t={t}")));
    }
    if t > state.time() {
        return Err(invalid(format!("time {t} is beyond the current time {}", state.time())));
    }
    Ok(())
}

fn check_width(state: &PrefixState, partition: &BinPartition) -> Result<()> {
    if partition.n_bins() != state.width() {
        return Err(Error::DimensionMismatch { expected: partition.n_bins(), got: state.width() });
    }
    Ok(())
}

pub(crate) fn private_stat(first: &Segment<'_>, second: &Segment<'_>, s: u64, t: u64) -> f64 {
    let mut best = 0.0f64;
    for j in 0..first.width() {
        let diff = (private_segment_value(first, j) - private_segment_value(second, j)).abs();
        best = best.max(diff);
    }
    cusum_weight(s, t) * best
}

pub(crate) fn nonprivate_stat(first: &Segment<'_>, second: &Segment<'_>, occupied: &[f64], s: u64, t: u64) -> f64 {
    let mut best = 0.0f64;
    for (j, &count) in occupied.iter().enumerate() {
        if count > 0.0 {
            let diff = (nonprivate_segment_value(first, j) - nonprivate_segment_value(second, j)).abs();
            best = best.max(diff);
        }
    }
    cusum_weight(s, t) * best
}

/// Univariate statistic from the two segment sums.
#[must_use]
pub fn cusum_univariate_from_sums(s: u64, t: u64, sum_first: f64, sum_second: f64) -> f64 {
    let (s, t) = (s as f64, t as f64);
    ((t - s) / (t * s)).sqrt() * sum_first - (s / (t * (t - s))).sqrt() * sum_second
}

/// Private statistic `max_j sqrt(s(t-s)/t) |m_{1:s}(j) - m_{s+1:t}(j)|`.
pub fn cusum_private(state: &PrefixState, s: u64, t: u64, partition: &BinPartition) -> Result<f64> {
    check(state, s, t)?;
    check_width(state, partition)?;
    Ok(private_stat(&state.segment(0, s)?, &state.segment(s, t)?, s, t))
}

/// Non-private statistic; the maximum runs over bins holding at least one of
/// the first `t` covariates.
pub fn cusum_nonprivate(state: &PrefixState, s: u64, t: u64, partition: &BinPartition) -> Result<f64> {
    check(state, s, t)?;
    check_width(state, partition)?;
    let occupied = state.cumulative(t)?.a;
    Ok(nonprivate_stat(&state.segment(0, s)?, &state.segment(s, t)?, occupied, s, t))
}

/// Absolute univariate statistic, reading the values from channel `b` of a
/// width-one state.
pub fn cusum_univariate(state: &PrefixState, s: u64, t: u64) -> Result<f64> {
    check(state, s, t)?;
    if state.width() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: state.width() });
    }
    let first = state.segment(0, s)?.sum_b(0);
    let second = state.segment(s, t)?.sum_b(0);
    Ok(cusum_univariate_from_sums(s, t, first, second).abs())
}
