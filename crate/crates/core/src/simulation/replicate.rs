//! Seeded single runs and the replication driver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::generate_stream;
use super::scenario::{Model, ScenarioSpec};
use crate::detection::{
    Detector, DetectorKind, Monitor, NonPrivateMonitor, PrivateMonitor, ThresholdParams, UnivariateMonitor,
};
use crate::error::{invalid, Error, Result};
use crate::estimation::{BinPartition, ScanPolicy};
use crate::noise::{derive_seed, CounterNoise};
use crate::privacy::{privatize_regression, PrivacyParams, UnivariateChannel};

/// How observations are privatized and scanned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    #[serde(default)]
    pub scan: ScanPolicy,
    #[serde(default)]
    pub restart: bool,
    pub thresholds: ThresholdParams,
    /// Interval length of the univariate channel. The univariate stream is
    /// privatized whenever `thresholds.alpha` is finite.
    #[serde(default = "unit_length")]
    pub interval_length: f64,
}

fn unit_length() -> f64 {
    1.0
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub alarm_time: Option<u64>,
    /// `(alarm - change)_+`; `None` without an alarm.
    pub delay: Option<u64>,
    /// Alarm at or before the change time (any alarm when there is no change).
    pub false_alarm: bool,
}

impl RunOutcome {
    #[must_use]
    pub fn new(seed: u64, alarm_time: Option<u64>, change_time: Option<u64>) -> Self {
        let false_alarm = match (alarm_time, change_time) {
            (Some(t), Some(delta)) => t <= delta,
            (Some(_), None) => true,
            (None, _) => false,
        };
        let delay = alarm_time.map(|t| change_time.map_or(0, |delta| t.saturating_sub(delta)));
        Self { seed, alarm_time, delay, false_alarm }
    }
}

/// One entry of a replication batch; failed runs keep their error.
#[derive(Debug)]
pub struct Replication {
    pub rep: u64,
    pub seed: u64,
    pub outcome: Result<RunOutcome>,
}

fn first_alarm<M: Monitor>(
    mut det: Detector<M>,
    inputs: impl Iterator<Item = Result<M::Input>>,
) -> Result<Option<u64>> {
    for input in inputs {
        if let Some(alarm) = det.observe(&input?)?.alarm {
            return Ok(Some(alarm.t));
        }
    }
    Ok(None)
}

/// Runs one detector on one seeded stream until the first alarm or the
/// horizon. The data use `derive_seed(seed, 0)` and the privacy channel
/// `derive_seed(seed, 1)`.
pub fn run_single(spec: &ScenarioSpec, config: &DetectorConfig, seed: u64) -> Result<RunOutcome> {
    if spec.horizon <= 1 {
        return Err(invalid(format!("horizon must be at least 2, got {}", spec.horizon)));
    }
    let stream = generate_stream(spec, derive_seed(seed, 0))?;
    let channel_noise = CounterNoise::new(derive_seed(seed, 1));
    let p = config.thresholds;
    let alarm = match (&spec.model, config.kind) {
        (Model::Regression { domain, .. }, DetectorKind::Private) => {
            let partition = BinPartition::new(domain.clone(), p.h)?;
            let privacy = PrivacyParams::new(p.alpha, p.truncation_m)?;
            let det = Detector::new(PrivateMonitor::new(partition.clone(), p)?, config.scan, config.restart)?
                .with_trace(false);
            let inputs = stream.enumerate().map(|(i, obs)| {
                let t = i as u64 + 1;
                privatize_regression(&obs, t, &partition, &privacy, &mut channel_noise.at(t))
            });
            first_alarm(det, inputs)?
        }
        (Model::Regression { domain, .. }, DetectorKind::Nonprivate) => {
            let partition = BinPartition::new(domain.clone(), p.h)?;
            let det =
                Detector::new(NonPrivateMonitor::new(partition, p)?, config.scan, config.restart)?.with_trace(false);
            first_alarm(det, stream.map(Ok))?
        }
        (Model::Univariate { .. }, DetectorKind::Univariate) => {
            let det = Detector::new(UnivariateMonitor::new(p.gamma, p.sigma, p.alpha)?, config.scan, config.restart)?
                .with_trace(false);
            if p.alpha.is_finite() {
                let channel = UnivariateChannel::new(p.alpha, config.interval_length)?;
                let inputs = stream
                    .enumerate()
                    .map(|(i, obs)| Ok(channel.privatize(obs.y, &mut channel_noise.at(i as u64 + 1))));
                first_alarm(det, inputs)?
            } else {
                first_alarm(det, stream.map(|obs| Ok(obs.y)))?
            }
        }
        (model, kind) => {
            let name = match model {
                Model::Regression { .. } => "regression",
                Model::Univariate { .. } => "univariate",
            };
            return Err(invalid(format!("detector {kind:?} does not apply to a {name} scenario")));
        }
    };
    Ok(RunOutcome::new(seed, alarm, spec.change_time))
}

/// `n_reps` independent runs; rep `i` uses seed `derive_seed(master_seed, i)`,
/// so the result does not depend on `parallel`.
pub fn run_replications(
    spec: &ScenarioSpec,
    config: &DetectorConfig,
    n_reps: u64,
    master_seed: u64,
    parallel: bool,
) -> Result<Vec<Replication>> {
    if n_reps == 0 {
        return Err(invalid("n_reps must be at least 1"));
    }
    spec.validate()?;
    let one = |rep: u64| {
        let seed = derive_seed(master_seed, rep);
        Replication { rep, seed, outcome: run_single(spec, config, seed) }
    };
    Ok(if parallel { (0..n_reps).into_par_iter().map(one).collect() } else { (0..n_reps).map(one).collect() })
}

/// Successful outcomes of a batch, and the first error if every run failed.
pub fn successful(reps: &[Replication]) -> Result<Vec<RunOutcome>> {
    let ok: Vec<RunOutcome> = reps.iter().filter_map(|r| r.outcome.as_ref().ok().copied()).collect();
    if ok.is_empty() {
        if let Some(Err(e)) = reps.first().map(|r| &r.outcome) {
            return Err(invalid(format!("every replication failed; first error: {e}")));
        }
        return Err(Error::InvalidParameter("no replications".into()));
    }
    Ok(ok)
}
