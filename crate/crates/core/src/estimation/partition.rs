//! Cubic partitions of an axis-aligned covariate domain.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Hard cap on the number of cells; beyond this the per-step cost of the
/// private channel is unreasonable anyway.
const MAX_BINS: usize = 1 << 24;

/// Axis-aligned box `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let dom = Self { lower, upper };
        dom.validate()?;
        Ok(dom)
    }

    /// The unit cube `[0, 1]^d`.
    pub fn unit(d: usize) -> Self {
        Self { lower: vec![0.0; d], upper: vec![1.0; d] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() {
            return Err(invalid("domain must have at least one axis"));
        }
        if self.lower.len() != self.upper.len() {
            return Err(Error::DimensionMismatch { expected: self.lower.len(), got: self.upper.len() });
        }
        for (axis, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(invalid(format!("degenerate domain on axis {axis}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }
}

/// The cells `A_{h,j}`: cubes of side `h` anchored at the domain's lower
/// corner, with the last cube on each axis clipped to the domain.
///
/// Cells are left-open, `(a, a + h]`, except that the first cell on each axis
/// also owns the domain's lower face. A point on a shared face therefore goes
/// to the lower-index cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BinPartition {
    domain: DomainBox,
    h: f64,
    bins_per_axis: Vec<usize>,
    strides: Vec<usize>,
    n_bins: usize,
}

impl BinPartition {
    pub fn new(domain: DomainBox, h: f64) -> Result<Self> {
        domain.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(format!("bin width must be positive, got {h}")));
        }
        let mut bins_per_axis = Vec::with_capacity(domain.dim());
        for (axis, (lo, hi)) in domain.lower.iter().zip(&domain.upper).enumerate() {
            let len = hi - lo;
            if h > len {
                return Err(invalid(format!("bin width {h} exceeds axis {axis} length {len}")));
            }
            // Guard against (1.0 / 0.25).ceil() style values drifting upward by an ulp.
            let ratio = len / h;
            let rounded = ratio.round();
            let count = if (ratio - rounded).abs() <= 1e-9 * rounded { rounded } else { ratio.ceil() };
            bins_per_axis.push(count as usize);
        }
        let n_bins = bins_per_axis
            .iter()
            .try_fold(1usize, |acc, &b| acc.checked_mul(b).filter(|&n| n <= MAX_BINS))
            .ok_or_else(|| invalid(format!("partition has more than {MAX_BINS} cells")))?;
        let mut strides = vec![1usize; bins_per_axis.len()];
        for axis in (0..bins_per_axis.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * bins_per_axis[axis + 1];
        }
        Ok(Self { domain, h, bins_per_axis, strides, n_bins })
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn bin_width(&self) -> f64 {
        self.h
    }

    pub fn bins_per_axis(&self) -> &[usize] {
        &self.bins_per_axis
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Diameter of an unclipped cell, `sqrt(d) h`.
    pub fn diameter(&self) -> f64 {
        (self.dim() as f64).sqrt() * self.h
    }

    fn axis_indices(&self, bin: usize) -> Vec<usize> {
        self.strides.iter().zip(&self.bins_per_axis).map(|(s, b)| (bin / s) % b).collect()
    }

    /// Centre of the unclipped cube containing cell `bin`.
    pub fn center(&self, bin: usize) -> Vec<f64> {
        self.axis_indices(bin)
            .into_iter()
            .zip(&self.domain.lower)
            .map(|(k, lo)| lo + (k as f64 + 0.5) * self.h)
            .collect()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.n_bins).map(|j| self.center(j)).collect()
    }

    /// Lower and upper corners of cell `bin` after clipping to the domain.
    pub fn bounds(&self, bin: usize) -> (Vec<f64>, Vec<f64>) {
        let ks = self.axis_indices(bin);
        let lower = ks.iter().zip(&self.domain.lower).map(|(&k, lo)| lo + k as f64 * self.h).collect();
        let upper = ks
            .iter()
            .zip(self.domain.lower.iter().zip(&self.domain.upper))
            .map(|(&k, (lo, hi))| (lo + (k + 1) as f64 * self.h).min(*hi))
            .collect();
        (lower, upper)
    }

    /// Lebesgue volume of cell `bin` (smaller than `h^d` for clipped cells).
    pub fn volume(&self, bin: usize) -> f64 {
        let (lo, hi) = self.bounds(bin);
        lo.iter().zip(&hi).map(|(a, b)| b - a).product()
    }

    /// Index of the cell containing `x`.
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        let mut bin = 0;
        for (axis, &v) in x.iter().enumerate() {
            let lo = self.domain.lower[axis];
            let last = self.bins_per_axis[axis] - 1;
            let mut k = (((v - lo) / self.h).ceil() as usize).saturating_sub(1).min(last);
            // The division can land one cell off near a face; settle against
            // the same face coordinates `bounds` reports.
            while k > 0 && v <= lo + k as f64 * self.h {
                k -= 1;
            }
            while k < last && v > lo + (k + 1) as f64 * self.h {
                k += 1;
            }
            bin += k * self.strides[axis];
        }
        Ok(bin)
    }

    /// Whether `x` lies in cell `bin` under the left-open convention.
    pub fn contains(&self, bin: usize, x: &[f64]) -> bool {
        let (lo, hi) = self.bounds(bin);
        let ks = self.axis_indices(bin);
        x.iter().enumerate().all(|(axis, &v)| {
            let above = if ks[axis] == 0 { v >= lo[axis] } else { v > lo[axis] };
            above && v <= hi[axis]
        })
    }

    /// `min_j mu(A_j) / h^d` when the covariates are uniform on the domain.
    pub fn uniform_c_min(&self) -> f64 {
        let total = self.domain.volume();
        let hd = self.h.powi(self.dim() as i32);
        (0..self.n_bins).map(|j| self.volume(j) / total).fold(f64::INFINITY, f64::min) / hd
    }

    /// Plug-in `c_min` from observed cell counts: `min_j (n_j / n) / h^d`.
    pub fn empirical_c_min(&self, counts: &[u64]) -> Result<f64> {
        if counts.len() != self.n_bins {
            return Err(Error::DimensionMismatch { expected: self.n_bins, got: counts.len() });
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(invalid("cannot estimate c_min from an empty calibration prefix"));
        }
        let hd = self.h.powi(self.dim() as i32);
        let min = counts.iter().copied().min().unwrap_or(0);
        Ok(min as f64 / n as f64 / hd)
    }
}
