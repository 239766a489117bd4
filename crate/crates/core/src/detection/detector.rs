//! The online scan: ingest one observation, evaluate every candidate split,
//! raise an alarm when a statistic strictly exceeds its threshold.

use serde::{Deserialize, Serialize};

use super::cusum::{cusum_nonprivate, cusum_private, cusum_univariate};
use super::thresholds::{threshold_nonprivate, threshold_private, threshold_univariate, ThresholdParams};
use crate::error::{invalid, Error, Result};
use crate::estimation::{BinPartition, PrefixState, ScanPolicy};
use crate::privacy::{PrivateObservation, RawObservation};

/// A statistic/threshold pair for one detector family.
pub trait Monitor {
    type Input;

    /// Number of bins tracked by the prefix state.
    fn width(&self) -> usize;

    /// Time index carried by the input, if any; checked against the stream.
    fn input_time(&self, _input: &Self::Input) -> Option<u64> {
        None
    }

    fn ingest(&self, state: &mut PrefixState, local_time: u64, input: &Self::Input) -> Result<()>;

    fn statistic(&self, state: &PrefixState, s: u64, t: u64) -> Result<f64>;

    fn threshold(&self, s: u64, t: u64) -> Result<f64>;

    /// True when the threshold depends on `t` only, so it is evaluated once
    /// per step.
    fn threshold_ignores_split(&self) -> bool {
        false
    }
}

/// Detector on the privatized regression stream.
#[derive(Debug, Clone)]
pub struct PrivateMonitor {
    partition: BinPartition,
    params: ThresholdParams,
}

impl PrivateMonitor {
    pub fn new(partition: BinPartition, params: ThresholdParams) -> Result<Self> {
        params.validate()?;
        if params.truncation_m < params.m0_bound {
            return Err(invalid(format!(
                "truncation level {} is below the regression bound {}",
                params.truncation_m, params.m0_bound
            )));
        }
        if params.d != partition.dim() {
            return Err(Error::DimensionMismatch { expected: partition.dim(), got: params.d });
        }
        Ok(Self { partition, params })
    }

    pub fn params(&self) -> &ThresholdParams {
        &self.params
    }
}

impl Monitor for PrivateMonitor {
    type Input = PrivateObservation;

    fn width(&self) -> usize {
        self.partition.n_bins()
    }

    fn input_time(&self, input: &PrivateObservation) -> Option<u64> {
        Some(input.time_index)
    }

    fn ingest(&self, state: &mut PrefixState, local_time: u64, input: &PrivateObservation) -> Result<()> {
        state.push(local_time, &input.w, &input.z)
    }

    fn statistic(&self, state: &PrefixState, s: u64, t: u64) -> Result<f64> {
        cusum_private(state, s, t, &self.partition)
    }

    fn threshold(&self, s: u64, t: u64) -> Result<f64> {
        threshold_private(s, t, &self.params)
    }
}

/// Detector on the raw regression stream.
#[derive(Debug, Clone)]
pub struct NonPrivateMonitor {
    partition: BinPartition,
    params: ThresholdParams,
}

impl NonPrivateMonitor {
    pub fn new(partition: BinPartition, params: ThresholdParams) -> Result<Self> {
        // Only gamma, sigma, c_lip, c_min, h, d enter the schedule.
        threshold_nonprivate(1, 2, &params)?;
        if params.d != partition.dim() {
            return Err(Error::DimensionMismatch { expected: partition.dim(), got: params.d });
        }
        Ok(Self { partition, params })
    }

    pub fn params(&self) -> &ThresholdParams {
        &self.params
    }
}

impl Monitor for NonPrivateMonitor {
    type Input = RawObservation;

    fn width(&self) -> usize {
        self.partition.n_bins()
    }

    fn ingest(&self, state: &mut PrefixState, local_time: u64, input: &RawObservation) -> Result<()> {
        let bin = self.partition.locate(&input.x)?;
        state.push_one_hot(local_time, bin, input.y)
    }

    fn statistic(&self, state: &PrefixState, s: u64, t: u64) -> Result<f64> {
        cusum_nonprivate(state, s, t, &self.partition)
    }

    fn threshold(&self, s: u64, t: u64) -> Result<f64> {
        threshold_nonprivate(s, t, &self.params)
    }
}

/// Detector on a (privatized) univariate stream. `alpha = inf` gives the
/// non-private schedule.
#[derive(Debug, Clone, Copy)]
pub struct UnivariateMonitor {
    gamma: f64,
    sigma: f64,
    alpha: f64,
}

impl UnivariateMonitor {
    pub fn new(gamma: f64, sigma: f64, alpha: f64) -> Result<Self> {
        threshold_univariate(2, gamma, sigma, alpha)?;
        Ok(Self { gamma, sigma, alpha })
    }
}

impl Monitor for UnivariateMonitor {
    type Input = f64;

    fn width(&self) -> usize {
        1
    }

    fn ingest(&self, state: &mut PrefixState, local_time: u64, input: &f64) -> Result<()> {
        state.push(local_time, &[1.0], &[*input])
    }

    fn statistic(&self, state: &PrefixState, s: u64, t: u64) -> Result<f64> {
        cusum_univariate(state, s, t)
    }

    fn threshold(&self, _s: u64, t: u64) -> Result<f64> {
        threshold_univariate(t, self.gamma, self.sigma, self.alpha)
    }

    fn threshold_ignores_split(&self) -> bool {
        true
    }
}

/// One evaluated split. `s` and `t` are global time indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CusumReport {
    pub s: u64,
    pub t: u64,
    pub statistic: f64,
    pub threshold: f64,
    pub exceeded: bool,
}

/// Summary of one call to [`Detector::observe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub time: u64,
    /// Largest statistic over the evaluated splits; `0` when none was evaluated.
    pub max_statistic: f64,
    /// Smallest finite threshold over the scanned splits; `+inf` when none.
    pub min_threshold: f64,
    pub alarm: Option<CusumReport>,
}

/// Online detector over a [`Monitor`].
#[derive(Debug, Clone)]
pub struct Detector<M: Monitor> {
    monitor: M,
    state: PrefixState,
    restart: bool,
    trace: bool,
    time: u64,
    origin: u64,
    alarms: Vec<CusumReport>,
}

impl<M: Monitor> Detector<M> {
    /// With `restart`, the prefix state is cleared after each alarm and the
    /// scan starts afresh at the next observation.
    pub fn new(monitor: M, policy: ScanPolicy, restart: bool) -> Result<Self> {
        let state = PrefixState::new(monitor.width(), policy)?;
        Ok(Self { monitor, state, restart, trace: true, time: 0, origin: 0, alarms: Vec::new() })
    }

    /// When tracing is off, splits whose threshold is infinite are skipped
    /// without computing their statistic. Alarms are unaffected.
    #[must_use]
    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    pub fn monitor(&self) -> &M {
        &self.monitor
    }

    pub fn state(&self) -> &PrefixState {
        &self.state
    }

    /// Number of observations consumed.
    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn alarms(&self) -> &[CusumReport] {
        &self.alarms
    }

    pub fn observe(&mut self, input: &M::Input) -> Result<StepReport> {
        let now = self.time + 1;
        if let Some(got) = self.monitor.input_time(input) {
            if got != now {
                return Err(Error::Sequencing { expected: now, got });
            }
        }
        let local = now - self.origin;
        self.monitor.ingest(&mut self.state, local, input)?;
        self.time = now;

        let mut max_statistic = 0.0f64;
        let mut min_threshold = f64::INFINITY;
        let mut best: Option<CusumReport> = None;
        let shared = if self.monitor.threshold_ignores_split() && local >= 2 {
            Some(self.monitor.threshold(1, local)?)
        } else {
            None
        };
        for s in self.state.candidate_splits() {
            let threshold = match shared {
                Some(b) => b,
                None => self.monitor.threshold(s, local)?,
            };
            if !self.trace && threshold == f64::INFINITY {
                continue;
            }
            min_threshold = min_threshold.min(threshold);
            let statistic = self.monitor.statistic(&self.state, s, local)?;
            max_statistic = max_statistic.max(statistic);
            if statistic > threshold {
                let margin = statistic - threshold;
                if best.is_none_or(|b| margin > b.statistic - b.threshold) {
                    best = Some(CusumReport { s: self.origin + s, t: now, statistic, threshold, exceeded: true });
                }
            }
        }
        if let Some(alarm) = best {
            self.alarms.push(alarm);
            if self.restart {
                self.state.reset();
                self.origin = now;
            }
        }
        Ok(StepReport { time: now, max_statistic, min_threshold, alarm: best })
    }
}

/// Result of [`run_detector`].
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRun {
    pub alarms: Vec<CusumReport>,
    /// Observations consumed.
    pub steps: u64,
}

impl DetectionRun {
    pub fn first_alarm(&self) -> Option<u64> {
        self.alarms.first().map(|a| a.t)
    }
}

/// Feeds up to `horizon` observations. Without restart the run stops at the
/// first alarm.
pub fn run_detector<M, I>(
    detector: &mut Detector<M>,
    stream: I,
    horizon: u64,
    mut on_step: impl FnMut(&StepReport),
) -> Result<DetectionRun>
where
    M: Monitor,
    I: IntoIterator<Item = M::Input>,
{
    if horizon <= 1 {
        return Err(invalid(format!("horizon must be at least 2, got {horizon}")));
    }
    let mut alarms = Vec::new();
    let mut steps = 0;
    for input in stream.into_iter().take(horizon as usize) {
        let report = detector.observe(&input)?;
        steps += 1;
        on_step(&report);
        if let Some(alarm) = report.alarm {
            alarms.push(alarm);
            if !detector.restart {
                break;
            }
        }
    }
    Ok(DetectionRun { alarms, steps })
}
