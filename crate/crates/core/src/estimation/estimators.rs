//! Binned regression estimators over a segment of the stream.
//!
//! Segments are written `s:t` and are inclusive on both ends, so their length
//! is `t - s + 1`.

use super::partition::BinPartition;
use super::prefix::{PrefixState, Segment};
use crate::error::{invalid, Error, Result};

/// Mass floor `log(n + 1) / n` for a segment of length `n`. With `n = t - s + 1`
/// this is `log(t - s + 2) / (t - s + 1)`.
#[must_use]
pub fn mass_floor(len: u64) -> f64 {
    let n = len as f64;
    (n + 1.0).ln() / n
}

/// Private estimate in one bin from segment sums of the noisy indicators and
/// noisy responses. Zero unless the mean indicator reaches [`mass_floor`].
#[must_use]
pub fn private_bin_estimate(sum_w: f64, sum_z: f64, len: u64) -> f64 {
    let n = len as f64;
    let mu = sum_w / n;
    if mu >= mass_floor(len) {
        (sum_z / n) / mu
    } else {
        0.0
    }
}

/// Non-private estimate in one bin: mean response of the points that fell in
/// it, with `0/0 = 0`.
#[must_use]
pub fn nonprivate_bin_estimate(count: f64, sum_y: f64) -> f64 {
    if count > 0.0 {
        sum_y / count
    } else {
        0.0
    }
}

pub(crate) fn private_segment_value(seg: &Segment<'_>, bin: usize) -> f64 {
    private_bin_estimate(seg.sum_a(bin), seg.sum_b(bin), seg.len())
}

pub(crate) fn nonprivate_segment_value(seg: &Segment<'_>, bin: usize) -> f64 {
    nonprivate_bin_estimate(seg.sum_a(bin), seg.sum_b(bin))
}

fn check_range(state: &PrefixState, partition: &BinPartition, s: u64, t: u64) -> Result<()> {
    if partition.n_bins() != state.width() {
        return Err(Error::DimensionMismatch { expected: partition.n_bins(), got: state.width() });
    }
    if s == 0 || s > t {
        return Err(invalid(format!("segment {s}:{t} must satisfy 1 <= s <= t")));
    }
    if t > state.time() {
        return Err(invalid(format!("segment end {t} is beyond the current time {}", state.time())));
    }
    Ok(())
}

/// Private regression estimate over `s:t`, one value per bin.
pub fn estimate_private(state: &PrefixState, s: u64, t: u64, partition: &BinPartition) -> Result<Vec<f64>> {
    check_range(state, partition, s, t)?;
    let seg = state.segment(s - 1, t)?;
    Ok((0..state.width()).map(|j| private_segment_value(&seg, j)).collect())
}

/// Non-private regression estimate over `s:t`, one value per bin.
pub fn estimate_nonprivate(state: &PrefixState, s: u64, t: u64, partition: &BinPartition) -> Result<Vec<f64>> {
    check_range(state, partition, s, t)?;
    let seg = state.segment(s - 1, t)?;
    Ok((0..state.width()).map(|j| nonprivate_segment_value(&seg, j)).collect())
}
