//! Experiment configuration. One TOML file drives every subcommand; scalar
//! keys carry their units (`_steps`, `_x` for covariate units, `_y` for
//! response units).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use privcusum::detection::{m1_truncation_floor, snr_check, DetectorKind, SnrReport, ThresholdParams};
use privcusum::estimation::{BinPartition, DomainBox, ScanPolicy};
use privcusum::simulation::{DetectorConfig, Model, NoiseLaw, RegressionFn, ScenarioSpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_reps")]
    pub n_reps: u64,
    #[serde(default = "yes")]
    pub parallel: bool,
    pub detector: DetectorSection,
    pub privacy: PrivacySection,
    pub thresholds: ThresholdSection,
    /// Synthetic data; optional when only files are processed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSection>,
    /// Covariate domain for file input without a regression scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_reps() -> u64 {
    100
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub kind: DetectorKind,
    #[serde(default)]
    pub scan: ScanPolicy,
    #[serde(default)]
    pub restart: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    /// `inf` disables privatisation of the univariate stream.
    pub alpha: f64,
    /// Response clamp `M`; required by the private detector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_level_y: Option<f64>,
    /// Length of the interval the univariate data live in.
    #[serde(default = "one")]
    pub interval_length_x: f64,
}

/// Threshold inputs. Unset model constants are taken from the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0_bound_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_lip_y_per_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_min: Option<f64>,
    #[serde(default = "one")]
    pub private_noise_factor: f64,
    #[serde(default = "one")]
    pub c_snr: f64,
    /// Delay constant; when set, runs slower than the implied budget are counted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub horizon_steps: u64,
    /// Last pre-change step; absent means no change.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_step: Option<u64>,
    pub model: Model,
    pub noise: NoiseLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    Kappa,
    BinWidthX,
    ChangeStep,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Kappa => "kappa",
            Self::BinWidthX => "bin_width_x",
            Self::ChangeStep => "change_step",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("results") }
    }
}

/// A configuration with every derived quantity filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: Option<ScenarioSpec>,
    pub detector: DetectorConfig,
    pub partition: Option<BinPartition>,
    pub snr: Option<SnrReport>,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::validation(e.to_string()))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::runtime(e.to_string()))
    }

    fn scenario_spec(&self) -> Option<ScenarioSpec> {
        self.scenario.as_ref().map(|s| ScenarioSpec {
            model: s.model.clone(),
            noise: s.noise,
            change_time: s.change_step,
            horizon: s.horizon_steps,
        })
    }

    /// The covariate domain: the regression scenario's, else `[domain]`.
    pub fn covariate_domain(&self) -> Option<DomainBox> {
        match self.scenario.as_ref().map(|s| &s.model) {
            Some(Model::Regression { domain, .. }) => Some(domain.clone()),
            _ => self.domain.clone(),
        }
    }

    pub fn resolve(&self) -> CliResult<Resolved> {
        let spec = self.scenario_spec();
        if let Some(spec) = &spec {
            spec.validate()?;
        }
        if self.n_reps == 0 {
            return Err(CliError::validation("n_reps must be at least 1"));
        }
        let kind = self.detector.kind;
        match (kind, spec.as_ref().map(|s| &s.model)) {
            (DetectorKind::Univariate, Some(Model::Regression { .. })) => {
                return Err(CliError::validation("the univariate detector needs a univariate scenario"));
            }
            (DetectorKind::Private | DetectorKind::Nonprivate, Some(Model::Univariate { .. })) => {
                return Err(CliError::validation(format!("the {kind:?} detector needs a regression scenario")));
            }
            _ => {}
        }
        let t = &self.thresholds;
        let missing = |key: &str| CliError::validation(format!("thresholds.{key} is required without a scenario"));
        let sigma = match (t.sigma_y, &spec) {
            (Some(v), _) => v,
            (None, Some(s)) => s.sigma(),
            (None, None) => return Err(missing("sigma_y")),
        };
        let mut params = ThresholdParams {
            gamma: t.gamma,
            alpha: self.privacy.alpha,
            truncation_m: 1.0,
            m0_bound: 0.0,
            sigma,
            c_lip: 0.0,
            c_min: 1.0,
            h: 1.0,
            d: 1,
            private_noise_factor: t.private_noise_factor,
        };
        let mut warnings = Vec::new();
        let mut partition = None;
        if kind != DetectorKind::Univariate {
            let domain = self
                .covariate_domain()
                .ok_or_else(|| CliError::validation("a regression detector needs a scenario or a [domain] table"))?;
            let h = t.bin_width_x.ok_or_else(|| CliError::validation("thresholds.bin_width_x is required"))?;
            let p = BinPartition::new(domain, h)?;
            params.h = h;
            params.d = p.dim();
            params.m0_bound = match (t.m0_bound_y, &spec) {
                (Some(v), _) => v,
                (None, Some(s)) => s.m0(),
                (None, None) => return Err(missing("m0_bound_y")),
            };
            params.c_lip = match (t.c_lip_y_per_x, &spec) {
                (Some(v), _) => v,
                (None, Some(s)) => s.lipschitz(),
                (None, None) => return Err(missing("c_lip_y_per_x")),
            };
            params.c_min = match (t.c_min, &spec) {
                (Some(v), _) => v,
                (None, Some(s)) => s.c_min(&p)?,
                (None, None) => return Err(missing("c_min")),
            };
            if kind == DetectorKind::Private {
                let m = self
                    .privacy
                    .truncation_level_y
                    .ok_or_else(|| CliError::validation("privacy.truncation_level_y is required"))?;
                let floor = m1_truncation_floor(params.m0_bound, params.sigma, h);
                if m < floor {
                    return Err(CliError::validation(format!(
                        "privacy.truncation_level_y = {m} is below the admissible floor {floor}"
                    )));
                }
                params.truncation_m = m;
            } else {
                params.truncation_m = params.m0_bound.max(1.0);
            }
            params.validate()?;
            partition = Some(p);
        } else if !(self.privacy.alpha > 0.0) {
            return Err(CliError::validation(format!("alpha must be positive, got {}", self.privacy.alpha)));
        }
        if !(t.gamma > 0.0 && t.gamma < 1.0) {
            return Err(CliError::validation(format!("gamma must lie in (0, 1), got {}", t.gamma)));
        }
        let snr = match &spec {
            Some(s) => match s.change_time {
                Some(delta) if s.kappa() > 0.0 => {
                    let report = snr_check(kind, s.kappa(), delta as f64, &params, t.c_snr)?;
                    if !report.passes {
                        warnings.push(format!(
                            "signal-to-noise condition unmet: {} < {} (ratio {})",
                            report.lhs, report.rhs, report.ratio
                        ));
                    }
                    Some(report)
                }
                _ => None,
            },
            None => None,
        };
        let detector = DetectorConfig {
            kind,
            scan: self.detector.scan,
            restart: self.detector.restart,
            thresholds: params,
            interval_length: self.privacy.interval_length_x,
        };
        Ok(Resolved { spec, detector, partition, snr, warnings })
    }

    /// Copy of the configuration with the sweep parameter set to `value`.
    pub fn at_sweep_point(&self, parameter: SweepParameter, value: f64) -> CliResult<Self> {
        let mut cfg = self.clone();
        cfg.sweep = None;
        match parameter {
            SweepParameter::Alpha => cfg.privacy.alpha = value,
            SweepParameter::BinWidthX => cfg.thresholds.bin_width_x = Some(value),
            SweepParameter::ChangeStep => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(CliError::validation(format!("change_step must be a positive integer, got {value}")));
                }
                cfg.scenario_mut()?.change_step = Some(value as u64);
            }
            SweepParameter::Kappa => match &mut cfg.scenario_mut()?.model {
                Model::Univariate { pre_mean, post_mean } => *post_mean = *pre_mean + value,
                Model::Regression {
                    pre: RegressionFn::Constant { value: pre },
                    post: RegressionFn::Constant { value: post },
                    ..
                } => *post = *pre + value,
                Model::Regression { .. } => {
                    return Err(CliError::validation("a kappa sweep needs constant pre- and post-change functions"));
                }
            },
        }
        Ok(cfg)
    }

    fn scenario_mut(&mut self) -> CliResult<&mut ScenarioSection> {
        self.scenario.as_mut().ok_or_else(|| CliError::validation("this sweep needs a [scenario]"))
    }

    /// The configurations to run: one per sweep value, or the base alone.
    pub fn sweep_points(&self) -> CliResult<Vec<(Option<f64>, Self)>> {
        match &self.sweep {
            None => Ok(vec![(None, self.clone())]),
            Some(sweep) => {
                if sweep.values.is_empty() {
                    return Err(CliError::validation("sweep.values is empty"));
                }
                sweep.values.iter().map(|&v| Ok((Some(v), self.at_sweep_point(sweep.parameter, v)?))).collect()
            }
        }
    }
}
