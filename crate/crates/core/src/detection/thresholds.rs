//! Threshold schedules, the truncation floor and the signal-to-noise checks.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which detector a schedule or SNR condition belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Private,
    Nonprivate,
    Univariate,
}

/// Inputs to the threshold schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    /// Target false-alarm probability.
    pub gamma: f64,
    pub alpha: f64,
    pub truncation_m: f64,
    /// Sup-norm bound on the regression functions.
    pub m0_bound: f64,
    /// Sub-Gaussian parameter of the response noise.
    pub sigma: f64,
    /// Lipschitz constant of the regression functions; zero is allowed.
    pub c_lip: f64,
    /// Density floor: every cell has mass at least `c_min h^d`.
    pub c_min: f64,
    pub h: f64,
    pub d: usize,
    /// Multiplier on the noise term of the private schedule. `1.0` is the
    /// schedule as usually stated; the supporting concentration lemma uses
    /// `512.0`.
    #[serde(default = "unit")]
    pub private_noise_factor: f64,
}

fn unit() -> f64 {
    1.0
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("truncation_m", self.truncation_m),
            ("m0_bound", self.m0_bound),
            ("c_min", self.c_min),
            ("h", self.h),
            ("private_noise_factor", self.private_noise_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.gamma >= 1.0 {
            return Err(invalid(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.alpha > 1.0 {
            return Err(invalid(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if !(self.c_lip >= 0.0 && self.c_lip.is_finite()) {
            return Err(invalid(format!("c_lip must be non-negative, got {}", self.c_lip)));
        }
        if self.d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(())
    }

    fn h_pow_d(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    fn bias_per_unit(&self) -> f64 {
        self.c_lip * (self.d as f64).sqrt() * self.h
    }

    /// `2 (M - M0) exp(-(M - M0)^2 / (2 sigma^2))`, zero when `sigma = 0`.
    pub fn truncation_bias(&self) -> f64 {
        let gap = self.truncation_m - self.m0_bound;
        if self.sigma == 0.0 {
            return 0.0;
        }
        2.0 * gap * (-(gap * gap) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

fn check_split(s: u64, t: u64) -> Result<f64> {
    if s == 0 || s >= t {
        return Err(invalid(format!("split must satisfy 1 <= s < t, got s={s}, t={t}")));
    }
    Ok(s as f64 * (t - s) as f64 / t as f64)
}

/// Whether the private schedule's finite branch is active at `(s, t)`:
/// `s(t-s)/t * c_min^2 h^{2d} alpha^2 >= 64 log(72 t^3 / (gamma c_min h^d))`.
pub fn private_schedule_active(s: u64, t: u64, p: &ThresholdParams) -> Result<bool> {
    let n = check_split(s, t)?;
    Ok(private_active(n, t, p))
}

fn private_log_term(t: u64, p: &ThresholdParams) -> f64 {
    let t = t as f64;
    (72.0 * t * t * t / (p.gamma * p.c_min * p.h_pow_d())).ln()
}

fn private_active(n: f64, t: u64, p: &ThresholdParams) -> bool {
    let chd = p.c_min * p.h_pow_d();
    n * chd * chd * p.alpha * p.alpha >= 64.0 * private_log_term(t, p)
}

/// Threshold of the private detector; `+inf` while the activation condition
/// fails, so such pairs can never raise an alarm.
pub fn threshold_private(s: u64, t: u64, p: &ThresholdParams) -> Result<f64> {
    let n = check_split(s, t)?;
    p.validate()?;
    if p.truncation_m < p.m0_bound {
        return Err(invalid(format!(
            "truncation level {} is below the regression bound {}",
            p.truncation_m, p.m0_bound
        )));
    }
    if !private_active(n, t, p) {
        return Ok(f64::INFINITY);
    }
    let log_term = private_log_term(t, p);
    let noise = p.private_noise_factor * p.truncation_m / (p.c_min * p.h_pow_d() * p.alpha) * log_term.sqrt();
    Ok(2.0 * n.sqrt() * (p.truncation_bias() + p.bias_per_unit()) + noise)
}

/// Threshold of the non-private detector:
/// `2 sqrt(s(t-s)/t) C_Lip sqrt(d) h + 4 sigma / sqrt(c_min h^d) * sqrt(5 log t + log(32/gamma))`.
pub fn threshold_nonprivate(s: u64, t: u64, p: &ThresholdParams) -> Result<f64> {
    let n = check_split(s, t)?;
    if !(p.gamma > 0.0 && p.gamma < 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1), got {}", p.gamma)));
    }
    if !(p.c_min > 0.0 && p.h > 0.0 && p.sigma >= 0.0 && p.c_lip >= 0.0 && p.d > 0) {
        return Err(invalid("non-private schedule needs c_min, h > 0 and sigma, c_lip >= 0"));
    }
    let noise = 4.0 * p.sigma / (p.c_min * p.h_pow_d()).sqrt() * (5.0 * (t as f64).ln() + (32.0 / p.gamma).ln()).sqrt();
    Ok(2.0 * n.sqrt() * p.bias_per_unit() + noise)
}

/// Threshold of the univariate detector,
/// `2^{3/2} sqrt(sigma^2 + 4 / alpha^2) sqrt(log(t / gamma))`, for `t >= 2`.
pub fn threshold_univariate(t: u64, gamma: f64, sigma: f64, alpha: f64) -> Result<f64> {
    if t < 2 {
        return Err(invalid(format!("univariate threshold needs t >= 2, got {t}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(alpha > 0.0) || !(sigma >= 0.0) {
        return Err(invalid("univariate threshold needs alpha > 0 and sigma >= 0"));
    }
    Ok(2f64.powf(1.5) * (sigma * sigma + 4.0 / (alpha * alpha)).sqrt() * (t as f64 / gamma).ln().sqrt())
}

/// Smallest admissible truncation level,
/// `M0 + sigma sqrt(2 log(2 + sigma/h) + log log(2 + sigma/h))`.
#[must_use]
pub fn m1_truncation_floor(m0: f64, sigma: f64, h: f64) -> f64 {
    let r = 2.0 + sigma / h;
    m0 + sigma * (2.0 * r.ln() + r.ln().ln()).sqrt()
}

/// Outcome of a signal-to-noise check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; infinite when the logarithmic right-hand side is not positive.
    pub ratio: f64,
    pub passes: bool,
}

/// Evaluates the signal-to-noise condition of the chosen detector for a jump
/// of size `kappa` at time `delta`.
pub fn snr_check(kind: DetectorKind, kappa: f64, delta: f64, p: &ThresholdParams, c_snr: f64) -> Result<SnrReport> {
    if !(kappa > 0.0) || !(delta > 0.0) {
        return Err(invalid(format!("kappa and delta must be positive, got {kappa}, {delta}")));
    }
    if !(c_snr > 0.0) {
        return Err(invalid(format!("c_snr must be positive, got {c_snr}")));
    }
    let hd = p.h.powi(p.d as i32);
    let (lhs, log_arg) = match kind {
        DetectorKind::Private => (
            kappa * kappa * hd * hd * p.alpha * p.alpha * delta / (p.sigma * p.sigma).max(p.m0_bound * p.m0_bound),
            delta / (p.c_min * hd * hd * p.gamma),
        ),
        DetectorKind::Nonprivate => (kappa * kappa * hd * delta / (p.sigma * p.sigma), delta / (p.gamma * hd)),
        DetectorKind::Univariate => {
            (delta * kappa * kappa / (p.sigma * p.sigma + 4.0 / (p.alpha * p.alpha)), delta / p.gamma)
        }
    };
    let rhs = c_snr * log_arg.ln();
    let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
    Ok(SnrReport { lhs, rhs, ratio, passes: lhs >= rhs })
}
