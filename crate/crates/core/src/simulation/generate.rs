//! Seeded stream generation and the lower-bound constructions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::scenario::{lattice_points, Model, NoiseLaw, RegressionFn, ScenarioSpec, XLaw};
use crate::error::{invalid, Result};
use crate::estimation::DomainBox;
use crate::privacy::RawObservation;

/// Iterator over the observations of a scenario, up to its horizon.
///
/// Every step consumes the same random draws whatever the change time, so a
/// stream without change and one changing after the horizon are identical.
#[derive(Debug, Clone)]
pub struct Stream {
    spec: ScenarioSpec,
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    lattice: Vec<Vec<f64>>,
    t: u64,
}

/// Observation stream of `spec`, deterministic in `seed`.
pub fn generate_stream(spec: &ScenarioSpec, seed: u64) -> Result<Stream> {
    spec.validate()?;
    let lattice = match &spec.model {
        Model::Regression { domain, x_law: XLaw::Lattice { per_axis }, .. } => lattice_points(domain, *per_axis),
        _ => Vec::new(),
    };
    Ok(Stream {
        spec: spec.clone(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        normal: Normal::new(0.0, 1.0).expect("unit normal"),
        lattice,
        t: 0,
    })
}

fn draw_x(rng: &mut ChaCha8Rng, domain: &DomainBox, law: &XLaw, lattice: &[Vec<f64>], t: u64) -> Vec<f64> {
    match law {
        XLaw::Uniform => domain.lower.iter().zip(&domain.upper).map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect(),
        XLaw::Lattice { .. } => lattice[((t - 1) % lattice.len() as u64) as usize].clone(),
        XLaw::UniformBall { center, radius } => loop {
            let x: Vec<f64> = center.iter().map(|c| c + radius * rng.random_range(-1.0..=1.0)).collect();
            let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            if r2 <= radius * radius {
                break x;
            }
        },
    }
}

fn draw_noise(rng: &mut ChaCha8Rng, normal: &Normal<f64>, law: NoiseLaw) -> f64 {
    match law {
        NoiseLaw::Gaussian { sigma } => sigma * normal.sample(rng),
        NoiseLaw::Uniform { sigma } => sigma * rng.random_range(-1.0..=1.0),
    }
}

impl Iterator for Stream {
    type Item = RawObservation;

    fn next(&mut self) -> Option<RawObservation> {
        if self.t >= self.spec.horizon {
            return None;
        }
        self.t += 1;
        let post = self.spec.is_post_change(self.t);
        let noise_law = self.spec.noise;
        match &self.spec.model {
            Model::Regression { domain, x_law, pre, post: post_fn } => {
                let x = draw_x(&mut self.rng, domain, x_law, &self.lattice, self.t);
                let noise = draw_noise(&mut self.rng, &self.normal, noise_law);
                let m = if post { post_fn.eval(&x) } else { pre.eval(&x) };
                Some(RawObservation::new(x, m + noise))
            }
            Model::Univariate { pre_mean, post_mean } => {
                let noise = draw_noise(&mut self.rng, &self.normal, noise_law);
                Some(RawObservation::scalar(if post { *post_mean } else { *pre_mean } + noise))
            }
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.spec.horizon - self.t) as usize;
        (left, Some(left))
    }
}

/// Regression lower-bound construction: `X` uniform on the ball `B(0, r)`,
/// `f1 = 0`, `f2 = (kappa - |x|)_+`. The domain is the bounding box.
pub fn lower_bound_regression(
    kappa: f64,
    radius: f64,
    d: usize,
    noise: NoiseLaw,
    change_time: Option<u64>,
    horizon: u64,
) -> Result<ScenarioSpec> {
    if !(kappa > 0.0) || !(noise.sigma() > 0.0) || d == 0 {
        return Err(invalid("lower-bound instance needs kappa, sigma > 0 and d >= 1"));
    }
    if !(radius >= kappa) {
        return Err(invalid(format!("ball radius {radius} must cover the bump radius {kappa}")));
    }
    let spec = ScenarioSpec {
        model: Model::Regression {
            domain: DomainBox::new(vec![-radius; d], vec![radius; d])?,
            x_law: XLaw::UniformBall { center: vec![0.0; d], radius },
            pre: RegressionFn::Constant { value: 0.0 },
            post: RegressionFn::Cone { center: vec![0.0; d], height: kappa, base: 0.0 },
        },
        noise,
        change_time,
        horizon,
    };
    spec.validate()?;
    Ok(spec)
}

/// Radius `max((8 sigma^2 log(1/gamma) / kappa^2)^{1/d}, 2 kappa)` of the
/// non-private construction.
#[must_use]
pub fn nonprivate_lower_bound_radius(kappa: f64, sigma: f64, gamma: f64, d: usize) -> f64 {
    (8.0 * sigma * sigma * (1.0 / gamma).ln() / (kappa * kappa)).powf(1.0 / d as f64).max(2.0 * kappa)
}

/// Radius `(2 (e^alpha - 1) / alpha)^{1/d}` of the private construction.
#[must_use]
pub fn private_lower_bound_radius(alpha: f64, d: usize) -> f64 {
    (2.0 * alpha.exp_m1() / alpha).powf(1.0 / d as f64)
}

/// Univariate lower-bound construction: `Unif[0, 2 sigma]` before the change
/// and `kappa + Unif[0, 2 sigma]` after; requires `kappa < 2 sigma`.
pub fn lower_bound_univariate(kappa: f64, sigma: f64, change_time: Option<u64>, horizon: u64) -> Result<ScenarioSpec> {
    if !(kappa > 0.0) || !(sigma > 0.0) {
        return Err(invalid("lower-bound instance needs kappa, sigma > 0"));
    }
    if kappa >= 2.0 * sigma {
        return Err(invalid(format!("univariate instance needs kappa < 2 sigma, got {kappa} >= {}", 2.0 * sigma)));
    }
    let spec = ScenarioSpec {
        model: Model::Univariate { pre_mean: sigma, post_mean: sigma + kappa },
        noise: NoiseLaw::Uniform { sigma },
        change_time,
        horizon,
    };
    spec.validate()?;
    Ok(spec)
}
