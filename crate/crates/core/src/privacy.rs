//! Local differential privacy channels.
//!
//! Two non-interactive channels are provided:
//!
//! * the binned regression channel, which releases for each record a noisy
//!   one-hot encoding of the covariate's cell together with a noisy truncated
//!   response in that cell, using Laplace scales `4/alpha` and `4M/alpha`;
//! * the additive univariate channel `z = x + (L/alpha) * eps` for data living
//!   in an interval of length `L`.
//!
//! Both are `alpha`-LDP. [`audit_privacy_loss`] evaluates the exact log density
//! ratio of either channel so the guarantee can be checked pointwise.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::BinPartition;
use crate::noise::NoiseSource;

/// A raw record: covariates `x` (empty for univariate streams) and response `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawObservation {
    pub x: Vec<f64>,
    pub y: f64,
}

impl RawObservation {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }

    pub fn scalar(y: f64) -> Self {
        Self { x: Vec::new(), y }
    }
}

/// Output of the regression channel for the record at `time_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateObservation {
    pub time_index: u64,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
}

/// Privacy budget and response truncation level for the regression channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    alpha: f64,
    truncation_m: f64,
}

impl PrivacyParams {
    pub fn new(alpha: f64, truncation_m: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(truncation_m > 0.0 && truncation_m.is_finite()) {
            return Err(invalid(format!("truncation level must be positive, got {truncation_m}")));
        }
        Ok(Self { alpha, truncation_m })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn truncation_m(&self) -> f64 {
        self.truncation_m
    }

    /// Laplace scale on the cell indicators, `4 / alpha`.
    pub fn noise_scale_w(&self) -> f64 {
        4.0 / self.alpha
    }

    /// Laplace scale on the truncated responses, `4 M / alpha`.
    pub fn noise_scale_z(&self) -> f64 {
        4.0 * self.truncation_m / self.alpha
    }
}

/// Additive Laplace channel for scalars known to lie in an interval of length
/// `interval_length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateChannel {
    alpha: f64,
    interval_length: f64,
}

impl UnivariateChannel {
    pub fn new(alpha: f64, interval_length: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        if !(interval_length > 0.0 && interval_length.is_finite()) {
            return Err(invalid(format!("interval length must be positive, got {interval_length}")));
        }
        Ok(Self { alpha, interval_length })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn interval_length(&self) -> f64 {
        self.interval_length
    }

    pub fn noise_scale(&self) -> f64 {
        self.interval_length / self.alpha
    }

    pub fn privatize(&self, x: f64, rng: &mut dyn NoiseSource) -> f64 {
        x + laplace_inverse_cdf(rng.uniform(), self.noise_scale())
    }
}

/// Inverse CDF of the centred Laplace law with the given scale.
#[must_use]
pub fn laplace_inverse_cdf(u: f64, scale: f64) -> f64 {
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else if u == 0.5 {
        0.0
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    }
}

/// One draw from the Laplace density `exp(-|z|/scale) / (2 scale)`.
pub fn sample_laplace(rng: &mut dyn NoiseSource, scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("Laplace scale must be positive, got {scale}")));
    }
    Ok(laplace_inverse_cdf(rng.uniform(), scale))
}

/// `min(m, max(y, -m))`.
#[must_use]
pub fn clamp_response(y: f64, m: f64) -> f64 {
    y.max(-m).min(m)
}

/// Runs the regression channel on one record.
///
/// Draw order within `rng` is fixed: the `N_h` indicator noises first, then the
/// `N_h` response noises, both in bin order.
pub fn privatize_regression(
    obs: &RawObservation,
    time_index: u64,
    partition: &BinPartition,
    params: &PrivacyParams,
    rng: &mut dyn NoiseSource,
) -> Result<PrivateObservation> {
    let bin = partition.locate(&obs.x)?;
    let n = partition.n_bins();
    let clamped = clamp_response(obs.y, params.truncation_m());
    let (sw, sz) = (params.noise_scale_w(), params.noise_scale_z());
    let mut w: Vec<f64> = (0..n).map(|_| laplace_inverse_cdf(rng.uniform(), sw)).collect();
    let mut z: Vec<f64> = (0..n).map(|_| laplace_inverse_cdf(rng.uniform(), sz)).collect();
    w[bin] += 1.0;
    z[bin] += clamped;
    Ok(PrivateObservation { time_index, w, z })
}

/// Runs the unit-interval univariate channel, `x + eps / alpha`.
pub fn privatize_univariate(x: f64, alpha: f64, rng: &mut dyn NoiseSource) -> Result<f64> {
    Ok(UnivariateChannel::new(alpha, 1.0)?.privatize(x, rng))
}

/// A channel whose log density ratio can be audited.
#[derive(Debug, Clone, Copy)]
pub enum Channel<'a> {
    Regression { partition: &'a BinPartition, params: PrivacyParams },
    Univariate(UnivariateChannel),
}

/// Exact `log q(output | a) - log q(output | b)`.
///
/// For the regression channel `output` is the concatenation `(w, z)` of length
/// `2 N_h`; for the univariate channel it has length 1.
pub fn audit_privacy_loss(
    channel: &Channel<'_>,
    input_a: &RawObservation,
    input_b: &RawObservation,
    output: &[f64],
) -> Result<f64> {
    match channel {
        Channel::Regression { partition, params } => {
            let n = partition.n_bins();
            if output.len() != 2 * n {
                return Err(Error::DimensionMismatch { expected: 2 * n, got: output.len() });
            }
            let (ja, jb) = (partition.locate(&input_a.x)?, partition.locate(&input_b.x)?);
            let m = params.truncation_m();
            let (va, vb) = (clamp_response(input_a.y, m), clamp_response(input_b.y, m));
            let (out_w, out_z) = output.split_at(n);
            let mut loss = 0.0;
            for j in 0..n {
                let ea = if j == ja { 1.0 } else { 0.0 };
                let eb = if j == jb { 1.0 } else { 0.0 };
                loss += ((out_w[j] - eb).abs() - (out_w[j] - ea).abs()) / params.noise_scale_w();
                let za = if j == ja { va } else { 0.0 };
                let zb = if j == jb { vb } else { 0.0 };
                loss += ((out_z[j] - zb).abs() - (out_z[j] - za).abs()) / params.noise_scale_z();
            }
            Ok(loss)
        }
        Channel::Univariate(ch) => {
            if output.len() != 1 {
                return Err(Error::DimensionMismatch { expected: 1, got: output.len() });
            }
            let o = output[0];
            Ok(((o - input_b.y).abs() - (o - input_a.y).abs()) / ch.noise_scale())
        }
    }
}

/// Tail bound `P(mean of n standard Laplace >= x) <= exp(-3 n x^2 / (4 + 3x))`.
#[must_use]
pub fn laplace_mean_tail_bound(n: u64, x: f64) -> f64 {
    let n = n as f64;
    (-3.0 * n * x * x / (4.0 + 3.0 * x)).exp()
}

/// Chernoff bound `exp(-n g(x))` for the same tail, with
/// `g(x) = sqrt(1 + x^2) - 1 - log((1 + sqrt(1 + x^2)) / 2)`, the exponent
/// obtained at `lambda = n (sqrt(1 + x^2) - 1) / x`. Behaves like
/// `exp(-n x^2 / 4)` for small `x`, which [`laplace_mean_tail_bound`] does not
/// dominate.
#[must_use]
pub fn laplace_mean_chernoff_bound(n: u64, x: f64) -> f64 {
    let r = (1.0 + x * x).sqrt();
    (-(n as f64) * ((r - 1.0) - ((1.0 + r) / 2.0).ln())).exp()
}
