//! Subcommand bodies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use privcusum::detection::{
    run_detector, snr_check, DetectionRun, Detector, DetectorKind, NonPrivateMonitor, PrivateMonitor, StepReport,
    ThresholdParams, UnivariateMonitor,
};
use privcusum::noise::{CounterNoise, NoiseSource, SeededNoise, ZeroNoise};
use privcusum::privacy::{
    audit_privacy_loss, clamp_response, privatize_regression, sample_laplace, Channel, PrivacyParams, RawObservation,
    UnivariateChannel,
};
use privcusum::simulation::{
    fit_scaling, generate_stream, quantile, run_replications, summarize, Metrics, Model, RunOutcome,
};

use crate::config::{ExperimentConfig, Resolved};
use crate::error::{CliError, CliResult};
use crate::io::{self, PrivatizedMeta};

fn warn(resolved: &Resolved) {
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Resolves the configuration, reports its warnings and echoes it in
/// normalised form.
pub fn validate(cfg: &ExperimentConfig) -> CliResult<String> {
    let resolved = cfg.resolve()?;
    warn(&resolved);
    let mut out = cfg.to_toml()?;
    if let Some(snr) = resolved.snr {
        let _ = writeln!(out, "# snr lhs={} rhs={} ratio={} passes={}", snr.lhs, snr.rhs, snr.ratio, snr.passes);
    }
    Ok(out)
}

/// Writes the scenario's raw stream.
pub fn generate(cfg: &ExperimentConfig, output: &Path, seed: Option<u64>) -> CliResult<()> {
    let resolved = cfg.resolve()?;
    let spec = resolved.spec.ok_or_else(|| CliError::validation("generate needs a [scenario]"))?;
    let stream = generate_stream(&spec, seed.unwrap_or(cfg.master_seed))?;
    let d = match spec.model {
        Model::Regression { .. } => spec.dim(),
        Model::Univariate { .. } => 0,
    };
    io::write_raw(output, d, stream)
}

/// Privatizes a raw file. Regression files go through the binned channel,
/// `t,y` files through the univariate channel.
pub fn privatize(
    cfg: &ExperimentConfig,
    input: &Path,
    output: &Path,
    seed: Option<u64>,
    zero_noise: bool,
) -> CliResult<()> {
    let seed = seed.unwrap_or(cfg.master_seed);
    let counter = CounterNoise::new(seed);
    let noise_at = |t: u64| -> Box<dyn NoiseSource> {
        if zero_noise {
            Box::new(ZeroNoise)
        } else {
            Box::new(counter.at(t))
        }
    };
    let (d, rows) = io::read_raw(input)?;
    if cfg.detector.kind == DetectorKind::Univariate {
        if d != 0 {
            return Err(CliError::validation(format!("univariate input must have header t,y, got {d} covariates")));
        }
        let channel = UnivariateChannel::new(cfg.privacy.alpha, cfg.privacy.interval_length_x)?;
        let z: Vec<f64> =
            rows.iter().enumerate().map(|(i, r)| channel.privatize(r.obs.y, noise_at(i as u64 + 1).as_mut())).collect();
        let seed_note = if zero_noise { "none".to_string() } else { seed.to_string() };
        let note = format!("alpha={}, L={}, seed={seed_note}", channel.alpha(), channel.interval_length());
        return io::write_univariate(output, Some(&note), "z", &z);
    }
    let resolved = cfg.resolve()?;
    let partition = resolved.partition.expect("regression kinds resolve a partition");
    if d != partition.dim() {
        return Err(CliError::validation(format!("input has {d} covariates, the domain has {}", partition.dim())));
    }
    let m =
        cfg.privacy.truncation_level_y.ok_or_else(|| CliError::validation("privacy.truncation_level_y is required"))?;
    let params = PrivacyParams::new(cfg.privacy.alpha, m)?;
    let out = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let t = i as u64 + 1;
            privatize_regression(&r.obs, t, &partition, &params, noise_at(t).as_mut())
                .map_err(|e| CliError::validation(format!("{} line {}: {e}", input.display(), r.line)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let meta =
        PrivatizedMeta { h: partition.bin_width(), alpha: params.alpha(), m, seed: (!zero_noise).then_some(seed) };
    io::write_privatized(output, &meta, partition.n_bins(), out)
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Runs the configured detector over a file. Returns the printed report.
pub fn detect(cfg: &ExperimentConfig, input: &Path, trace: Option<&Path>) -> CliResult<String> {
    let resolved = cfg.resolve()?;
    warn(&resolved);
    let d = &resolved.detector;
    let mut steps: Vec<StepReport> = Vec::new();
    let record = |r: &StepReport| {
        if trace.is_some() && r.time >= 2 {
            steps.push(*r);
        }
    };
    let too_short =
        |n: usize| CliError::validation(format!("{}: need at least 2 observations, got {n}", input.display()));
    let run: DetectionRun = match d.kind {
        DetectorKind::Private => {
            let partition = resolved.partition.clone().expect("partition");
            let (meta, n, rows) = io::read_privatized(input)?;
            if n != partition.n_bins() {
                return Err(CliError::validation(format!(
                    "file has {n} bins but the configured partition has {}",
                    partition.n_bins()
                )));
            }
            let p = &d.thresholds;
            for (name, file, conf) in
                [("h", meta.h, p.h), ("alpha", meta.alpha, p.alpha), ("M", meta.m, p.truncation_m)]
            {
                if !close(file, conf) {
                    return Err(CliError::validation(format!(
                        "file was privatized with {name}={file}, config has {conf}"
                    )));
                }
            }
            if rows.len() < 2 {
                return Err(too_short(rows.len()));
            }
            let horizon = rows.len() as u64;
            let mut det =
                Detector::new(PrivateMonitor::new(partition, *p)?, d.scan, d.restart)?.with_trace(trace.is_some());
            run_detector(&mut det, rows, horizon, record)?
        }
        DetectorKind::Nonprivate => {
            let partition = resolved.partition.clone().expect("partition");
            let (dim, rows) = io::read_raw(input)?;
            if dim != partition.dim() {
                return Err(CliError::validation(format!(
                    "input has {dim} covariates, the domain has {}",
                    partition.dim()
                )));
            }
            if let Some(r) = rows.iter().find(|r| partition.locate(&r.obs.x).is_err()) {
                return Err(CliError::validation(format!(
                    "{} line {}: x lies outside the domain",
                    input.display(),
                    r.line
                )));
            }
            if rows.len() < 2 {
                return Err(too_short(rows.len()));
            }
            let horizon = rows.len() as u64;
            let mut det = Detector::new(NonPrivateMonitor::new(partition, d.thresholds)?, d.scan, d.restart)?;
            run_detector(&mut det, rows.into_iter().map(|r| r.obs), horizon, record)?
        }
        DetectorKind::Univariate => {
            let xs = io::read_univariate(input)?;
            if xs.len() < 2 {
                return Err(too_short(xs.len()));
            }
            let horizon = xs.len() as u64;
            let p = &d.thresholds;
            let mut det = Detector::new(UnivariateMonitor::new(p.gamma, p.sigma, p.alpha)?, d.scan, d.restart)?;
            run_detector(&mut det, xs, horizon, record)?
        }
    };
    if let Some(path) = trace {
        let rows: Vec<Vec<String>> = steps
            .iter()
            .map(|r| vec![r.time.to_string(), r.max_statistic.to_string(), r.min_threshold.to_string()])
            .collect();
        io::write_rows(path, &["t", "max_statistic", "min_threshold"], &rows)?;
    }
    let mut out = String::new();
    if run.alarms.is_empty() {
        out.push_str("none\n");
    }
    for a in &run.alarms {
        let _ = writeln!(out, "alarm t={} s={} statistic={} threshold={}", a.t, a.s, a.statistic, a.threshold);
    }
    Ok(out)
}

/// Order of the delay bound for the configured detector: the quantity the
/// delay constant multiplies.
pub fn delay_rate(kind: DetectorKind, p: &ThresholdParams, kappa: f64, delta: f64) -> f64 {
    let hd = p.h.powi(p.d as i32);
    match kind {
        DetectorKind::Private => {
            p.truncation_m.powi(2) / (kappa * kappa * hd * hd * p.alpha * p.alpha)
                * (delta / (hd * hd * p.c_min * p.gamma)).ln()
        }
        DetectorKind::Nonprivate => p.sigma * p.sigma / (kappa * kappa * hd) * (delta / (p.gamma * hd)).ln(),
        DetectorKind::Univariate => {
            (p.sigma * p.sigma + 4.0 / (p.alpha * p.alpha)) * (delta / p.gamma).ln() / (kappa * kappa)
        }
    }
}

/// Everything measured at one sweep point.
struct PointResult {
    value: Option<f64>,
    resolved: Resolved,
    outcomes: Result<Vec<RunOutcome>, String>,
}

fn run_points(cfg: &ExperimentConfig) -> CliResult<Vec<PointResult>> {
    let mut results = Vec::new();
    for (value, point) in cfg.sweep_points()? {
        let resolved = point.resolve()?;
        warn(&resolved);
        let spec = resolved.spec.clone().ok_or_else(|| CliError::validation("this command needs a [scenario]"))?;
        let outcomes = run_replications(&spec, &resolved.detector, point.n_reps, point.master_seed, point.parallel)
            .map_err(|e| e.to_string())
            .and_then(|reps| reps.into_iter().map(|r| r.outcome.map_err(|e| format!("rep {}: {e}", r.rep))).collect());
        results.push(PointResult { value, resolved, outcomes });
    }
    Ok(results)
}

const SUMMARY_HEADER: [&str; 15] = [
    "parameter",
    "value",
    "n_runs",
    "false_alarm_rate",
    "false_alarm_se",
    "detection_rate",
    "n_missed",
    "delay_mean",
    "delay_median",
    "delay_q10",
    "delay_q90",
    "delay_budget",
    "frac_over_budget",
    "snr_ratio",
    "error",
];

fn summary_row(name: &str, r: &PointResult, budget: Option<u64>, m: Result<&Metrics, &str>) -> Vec<String> {
    let snr = opt(r.resolved.snr.map(|s| s.ratio));
    let head = vec![name.to_string(), opt(r.value)];
    let tail = match m {
        Ok(m) => vec![
            m.n_runs.to_string(),
            m.false_alarm_rate.to_string(),
            m.false_alarm_se.to_string(),
            (m.n_detected as f64 / m.n_runs as f64).to_string(),
            m.n_missed.to_string(),
            opt(m.delay_mean),
            opt(m.delay_median),
            opt(m.delay_q10),
            opt(m.delay_q90),
            budget.map(|b| b.to_string()).unwrap_or_default(),
            opt(m.frac_over_budget),
            snr,
            String::new(),
        ],
        Err(e) => {
            let mut v = vec![String::new(); 11];
            v.push(snr);
            v.push(e.to_string());
            v
        }
    };
    head.into_iter().chain(tail).collect()
}

fn kappa_delta(r: &Resolved) -> Option<(f64, f64)> {
    let spec = r.spec.as_ref()?;
    let delta = spec.change_time? as f64;
    let kappa = spec.kappa();
    (kappa > 0.0).then_some((kappa, delta))
}

/// Runs every sweep point and writes `summary.csv`, plot data and, for
/// sweeps of three or more points, `scaling_fit.csv`. Returns the printed
/// report.
pub fn experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> CliResult<String> {
    let dir: PathBuf = out_dir.map_or_else(|| cfg.output.dir.clone(), Path::to_path_buf);
    let points = run_points(cfg)?;
    create_dir(&dir)?;
    let name = cfg.sweep.as_ref().map_or("", |s| s.parameter.name());
    let mut rows = Vec::new();
    let mut delay_plot = Vec::new();
    let mut fa_plot = Vec::new();
    let mut fit_x = Vec::new();
    let mut fit_y = Vec::new();
    let mut failures = 0;
    for r in &points {
        let p = r.resolved.detector.thresholds;
        let budget = match (cfg.thresholds.c_eps, kappa_delta(&r.resolved)) {
            (Some(c), Some((kappa, delta))) => {
                Some((c * delay_rate(r.resolved.detector.kind, &p, kappa, delta)).ceil() as u64)
            }
            _ => None,
        };
        let metrics = match &r.outcomes {
            Ok(o) => summarize(o, p.gamma, budget).map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        };
        if metrics.is_err() {
            failures += 1;
        }
        rows.push(summary_row(name, r, budget, metrics.as_ref().map_err(String::as_str)));
        if let (Some(x), Ok(m)) = (r.value, &metrics) {
            fa_plot.push(vec![x.to_string(), m.false_alarm_rate.to_string(), m.false_alarm_se.to_string()]);
            if let (Some(med), Some(lo), Some(hi)) = (m.delay_median, m.delay_q10, m.delay_q90) {
                delay_plot.push(vec![x.to_string(), med.to_string(), ((hi - lo) / 2.0).to_string()]);
                if med > 0.0 {
                    fit_x.push(x);
                    fit_y.push(med);
                }
            }
        }
    }
    let summary = dir.join("summary.csv");
    io::write_rows(&summary, &SUMMARY_HEADER, &rows)?;
    let mut report = format!("summary: {}\n", summary.display());
    if cfg.sweep.is_some() {
        io::write_rows(&dir.join("plot_delay.csv"), &["x", "y", "error"], &delay_plot)?;
        io::write_rows(&dir.join("plot_false_alarm.csv"), &["x", "y", "error"], &fa_plot)?;
        if fit_x.len() >= 3 {
            match fit_scaling(&fit_x, &fit_y) {
                Ok(fit) => {
                    let row = vec![
                        name.to_string(),
                        fit.slope.to_string(),
                        fit.intercept.to_string(),
                        fit.residual.to_string(),
                        fit_x.len().to_string(),
                    ];
                    io::write_rows(
                        &dir.join("scaling_fit.csv"),
                        &["parameter", "slope", "intercept", "residual", "n_points"],
                        &[row],
                    )?;
                    let _ = writeln!(report, "median delay vs {name}: slope {}", fit.slope);
                }
                Err(e) => {
                    let _ = writeln!(report, "no scaling fit: {e}");
                }
            }
        }
    }
    if failures > 0 {
        let _ = writeln!(report, "{failures} sweep point(s) failed; see the error column");
    }
    Ok(report)
}

/// Empirical signal-to-noise and delay constants.
///
/// `c_snr` is the largest unit-constant SNR ratio among points detected at
/// a rate below `target`, i.e. the smallest constant that excludes every
/// failing point; with no failing point it is the smallest ratio tested (an
/// upper bound). `c_eps` is the largest ratio of the `1 - gamma` delay
/// quantile to the delay rate over points that reach `target`.
pub fn calibrate(cfg: &ExperimentConfig, target: f64, out_dir: Option<&Path>) -> CliResult<String> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(CliError::validation(format!("target detection rate must lie in (0, 1], got {target}")));
    }
    let dir: PathBuf = out_dir.map_or_else(|| cfg.output.dir.clone(), Path::to_path_buf);
    let points = run_points(cfg)?;
    create_dir(&dir)?;
    let name = cfg.sweep.as_ref().map_or("", |s| s.parameter.name());
    let mut rows = Vec::new();
    let (mut worst_fail, mut best_pass, mut c_eps) = (None::<f64>, None::<f64>, None::<f64>);
    for r in &points {
        let (kappa, delta) = kappa_delta(&r.resolved)
            .ok_or_else(|| CliError::validation("calibration needs a change with kappa > 0"))?;
        let d = &r.resolved.detector;
        let p = d.thresholds;
        let outcomes = r.outcomes.as_ref().map_err(|e| CliError::runtime(e.clone()))?;
        let ratio = snr_check(d.kind, kappa, delta, &p, 1.0)?.ratio;
        let mut delays: Vec<f64> =
            outcomes.iter().filter(|o| !o.false_alarm).filter_map(|o| o.delay).map(|v| v as f64).collect();
        delays.sort_by(f64::total_cmp);
        let rate = delays.len() as f64 / outcomes.len() as f64;
        let q = quantile(&delays, 1.0 - p.gamma);
        let order = delay_rate(d.kind, &p, kappa, delta);
        let point_eps = q.map(|q| q / order);
        if rate >= target {
            best_pass = Some(best_pass.map_or(ratio, |b: f64| b.min(ratio)));
            if let Some(e) = point_eps {
                c_eps = Some(c_eps.map_or(e, |c: f64| c.max(e)));
            }
        } else {
            worst_fail = Some(worst_fail.map_or(ratio, |w: f64| w.max(ratio)));
        }
        rows.push(vec![
            name.to_string(),
            opt(r.value),
            ratio.to_string(),
            rate.to_string(),
            opt(q),
            order.to_string(),
            opt(point_eps),
        ]);
    }
    let path = dir.join("calibration.csv");
    io::write_rows(
        &path,
        &["parameter", "value", "snr_ratio_unit", "detection_rate", "delay_quantile", "delay_rate", "c_eps_point"],
        &rows,
    )?;
    let mut report = format!("calibration: {}\n", path.display());
    match (worst_fail, best_pass) {
        (Some(w), _) => {
            let _ = writeln!(report, "c_snr={w}");
        }
        (None, Some(b)) => {
            let _ = writeln!(report, "c_snr<={b} (no point failed)");
        }
        (None, None) => {}
    }
    match c_eps {
        Some(c) => {
            let _ = writeln!(report, "c_eps={c}");
        }
        None => report.push_str("c_eps undetermined (no point reached the target rate)\n"),
    }
    Ok(report)
}

/// Randomised check that the configured channel's log density ratio never
/// exceeds `alpha`. Violations are a runtime failure.
pub fn audit(cfg: &ExperimentConfig, trials: u64, seed: Option<u64>) -> CliResult<String> {
    if trials == 0 {
        return Err(CliError::validation("trials must be at least 1"));
    }
    let alpha = cfg.privacy.alpha;
    let mut rng = SeededNoise::from_seed(seed.unwrap_or(cfg.master_seed));
    let bound = alpha + 1e-12;
    let (mut worst, mut violations) = (0.0f64, 0u64);
    let mut check = |loss: f64| {
        worst = worst.max(loss.abs());
        violations += u64::from(loss.abs() > bound);
    };
    if cfg.detector.kind == DetectorKind::Univariate {
        let ch = UnivariateChannel::new(alpha, cfg.privacy.interval_length_x)?;
        let len = ch.interval_length();
        for i in 0..trials {
            let a = RawObservation::scalar(len * rng.uniform());
            let b = RawObservation::scalar(len * rng.uniform());
            let centre = if i % 2 == 0 { a.y } else { b.y };
            let o = if i % 3 == 2 { a.y } else { centre + sample_laplace(&mut rng, ch.noise_scale())? };
            check(audit_privacy_loss(&Channel::Univariate(ch), &a, &b, &[o])?);
        }
    } else {
        let resolved = cfg.resolve()?;
        let partition = resolved.partition.expect("partition");
        let m = cfg
            .privacy
            .truncation_level_y
            .ok_or_else(|| CliError::validation("privacy.truncation_level_y is required"))?;
        let params = PrivacyParams::new(alpha, m)?;
        let dom = partition.domain().clone();
        let channel = Channel::Regression { partition: &partition, params };
        let n = partition.n_bins();
        for i in 0..trials {
            let draw = |rng: &mut SeededNoise| {
                let x = dom.lower.iter().zip(&dom.upper).map(|(lo, hi)| lo + (hi - lo) * rng.uniform()).collect();
                RawObservation::new(x, 3.0 * m * (2.0 * rng.uniform() - 1.0))
            };
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let centre = if i % 2 == 0 { &a } else { &b };
            let bin = partition.locate(&centre.x)?;
            let mut out = vec![0.0; 2 * n];
            out[bin] = 1.0;
            out[n + bin] = clamp_response(centre.y, m);
            if i % 3 != 2 {
                for (j, v) in out.iter_mut().enumerate() {
                    let scale = if j < n { params.noise_scale_w() } else { params.noise_scale_z() };
                    *v += sample_laplace(&mut rng, scale)?;
                }
            }
            check(audit_privacy_loss(&channel, &a, &b, &out)?);
        }
    }
    let report = format!("trials={trials} max_abs_loss={worst} bound={alpha} violations={violations}\n");
    if violations > 0 {
        return Err(CliError::runtime(format!("privacy audit failed: {}", report.trim_end())));
    }
    Ok(report)
}
