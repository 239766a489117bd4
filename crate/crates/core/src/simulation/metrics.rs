//! Batch summaries, scaling fits and the random-sum tail bound.

use serde::{Deserialize, Serialize};

use super::replicate::RunOutcome;
use crate::error::{invalid, Result};

/// Summary of a batch of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_runs: usize,
    pub false_alarm_rate: f64,
    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub false_alarm_se: f64,
    pub false_alarm_below_gamma: bool,
    /// Runs without any alarm.
    pub n_missed: usize,
    /// Delays of runs that alarmed after the change.
    pub n_detected: usize,
    pub delay_mean: Option<f64>,
    pub delay_median: Option<f64>,
    pub delay_q10: Option<f64>,
    pub delay_q90: Option<f64>,
    /// Fraction of detected runs whose delay exceeds the budget.
    pub frac_over_budget: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
#[must_use]
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn summarize(outcomes: &[RunOutcome], gamma: f64, delay_budget: Option<u64>) -> Result<Metrics> {
    if outcomes.is_empty() {
        return Err(invalid("cannot summarize an empty batch"));
    }
    let n = outcomes.len();
    let fa = outcomes.iter().filter(|o| o.false_alarm).count() as f64 / n as f64;
    let mut delays: Vec<f64> =
        outcomes.iter().filter(|o| !o.false_alarm).filter_map(|o| o.delay).map(|d| d as f64).collect();
    delays.sort_by(f64::total_cmp);
    let mean = (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64);
    let over = match (delay_budget, delays.is_empty()) {
        (Some(b), false) => Some(delays.iter().filter(|&&d| d > b as f64).count() as f64 / delays.len() as f64),
        _ => None,
    };
    Ok(Metrics {
        n_runs: n,
        false_alarm_rate: fa,
        false_alarm_se: (fa * (1.0 - fa) / n as f64).sqrt(),
        false_alarm_below_gamma: fa < gamma,
        n_missed: outcomes.iter().filter(|o| o.alarm_time.is_none()).count(),
        n_detected: delays.len(),
        delay_mean: mean,
        delay_median: quantile(&delays, 0.5),
        delay_q10: quantile(&delays, 0.1),
        delay_q90: quantile(&delays, 0.9),
        frac_over_budget: over,
    })
}

/// Least-squares fit of `log y = intercept + slope log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual on the log scale.
    pub residual: f64,
}

pub fn fit_scaling(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(invalid(format!("{} parameters but {} metrics", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(invalid("a scaling fit needs at least three points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid("scaling fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("scaling fit needs at least two distinct parameters"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(ScalingFit { slope, intercept, residual: (rss / n).sqrt() })
}

/// `2 exp(-n p x^2 / 4)`: bound on `P(|sum eps_i B_i| >= x sum B_i)` for
/// `B_i ~ Ber(p)` and conditionally 1-sub-Gaussian `eps_i`.
pub fn bernoulli_sum_tail_bound(n: u64, p: f64, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p must lie in (0, 1), got {p}")));
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(invalid(format!("x must lie in (0, 1], got {x}")));
    }
    Ok(2.0 * (-(n as f64) * p * x * x / 4.0).exp())
}
