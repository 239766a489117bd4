//! Scenario descriptions: covariate law, regression functions, noise and the
//! change time.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimation::{BinPartition, DomainBox};

/// Law of the covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum XLaw {
    /// Uniform on the domain box.
    Uniform,
    /// Deterministic: the midpoints of a `per_axis^d` grid on the domain,
    /// visited cyclically in row-major order.
    Lattice { per_axis: usize },
    /// Uniform on a Euclidean ball inside the domain box.
    UniformBall { center: Vec<f64>, radius: f64 },
}

/// Built-in regression families; each has closed-form sup-norm and Lipschitz
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RegressionFn {
    Constant {
        value: f64,
    },
    /// `base + (height - |x - center|)_+`.
    Cone {
        center: Vec<f64>,
        height: f64,
        base: f64,
    },
    /// `base + height * (1 - |x - center| / radius)_+`.
    Bump {
        center: Vec<f64>,
        height: f64,
        radius: f64,
        base: f64,
    },
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl RegressionFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Cone { center, height, base } => base + (height - dist(x, center)).max(0.0),
            Self::Bump { center, height, radius, base } => base + height * (1.0 - dist(x, center) / radius).max(0.0),
        }
    }

    /// Upper bound on `sup |f|`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::Constant { value } => value.abs(),
            Self::Cone { height, base, .. } | Self::Bump { height, base, .. } => base.abs().max((base + height).abs()),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::Cone { .. } => 1.0,
            Self::Bump { height, radius, .. } => height.abs() / radius,
        }
    }

    fn center(&self) -> Option<&[f64]> {
        match self {
            Self::Constant { .. } => None,
            Self::Cone { center, .. } | Self::Bump { center, .. } => Some(center),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite")))
            }
        };
        match self {
            Self::Constant { value } => finite(*value, "constant value"),
            Self::Cone { center, height, base } => {
                finite(*height, "cone height")?;
                finite(*base, "cone base")?;
                if *height < 0.0 {
                    return Err(invalid("cone height must be non-negative"));
                }
                check_center(center, d)
            }
            Self::Bump { center, height, radius, base } => {
                finite(*height, "bump height")?;
                finite(*base, "bump base")?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("bump radius must be positive"));
                }
                check_center(center, d)
            }
        }
    }
}

fn check_center(center: &[f64], d: usize) -> Result<()> {
    if center.len() != d || center.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("center must be a finite point of dimension {d}")));
    }
    Ok(())
}

/// Additive response noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum NoiseLaw {
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `[-sigma, sigma]`.
    Uniform {
        sigma: f64,
    },
}

impl NoiseLaw {
    pub fn sigma(&self) -> f64 {
        match self {
            Self::Gaussian { sigma } | Self::Uniform { sigma } => *sigma,
        }
    }
}

/// What is observed and how it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Regression { domain: DomainBox, x_law: XLaw, pre: RegressionFn, post: RegressionFn },
    Univariate { pre_mean: f64, post_mean: f64 },
}

/// A complete synthetic scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub model: Model,
    pub noise: NoiseLaw,
    /// Last pre-change index; `None` means no change.
    pub change_time: Option<u64>,
    pub horizon: u64,
}

const KAPPA_GRID_POINTS: usize = 1 << 16;

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let sigma = self.noise.sigma();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("noise sigma must be non-negative, got {sigma}")));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        if self.change_time == Some(0) {
            return Err(invalid("change time must be at least 1"));
        }
        match &self.model {
            Model::Regression { domain, x_law, pre, post } => {
                domain.validate()?;
                let d = domain.dim();
                pre.validate(d)?;
                post.validate(d)?;
                match x_law {
                    XLaw::Uniform => {}
                    XLaw::Lattice { per_axis } => {
                        if *per_axis == 0 {
                            return Err(invalid("lattice needs at least one point per axis"));
                        }
                    }
                    XLaw::UniformBall { center, radius } => {
                        check_center(center, d)?;
                        if !(*radius > 0.0) {
                            return Err(invalid("ball radius must be positive"));
                        }
                        let inside = center
                            .iter()
                            .zip(domain.lower.iter().zip(&domain.upper))
                            .all(|(c, (lo, hi))| c - radius >= *lo && c + radius <= *hi);
                        if !inside {
                            return Err(invalid("ball must lie inside the domain box"));
                        }
                    }
                }
            }
            Model::Univariate { pre_mean, post_mean } => {
                if !pre_mean.is_finite() || !post_mean.is_finite() {
                    return Err(invalid("means must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.model {
            Model::Regression { domain, .. } => domain.dim(),
            Model::Univariate { .. } => 1,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.noise.sigma()
    }

    /// Regression function (or mean) in force at time `t`.
    pub fn is_post_change(&self, t: u64) -> bool {
        self.change_time.is_some_and(|delta| t > delta)
    }

    /// Jump size `sup |m_post - m_pre|`, evaluated on a dense grid of the
    /// covariate support plus the bump centers.
    pub fn kappa(&self) -> f64 {
        match &self.model {
            Model::Univariate { pre_mean, post_mean } => (post_mean - pre_mean).abs(),
            Model::Regression { domain, pre, post, .. } => {
                let d = domain.dim();
                let per_axis = ((KAPPA_GRID_POINTS as f64).powf(1.0 / d as f64).floor() as usize).max(2);
                let mut best = 0.0f64;
                let mut idx = vec![0usize; d];
                let mut x = vec![0.0; d];
                loop {
                    for a in 0..d {
                        let frac = idx[a] as f64 / (per_axis - 1) as f64;
                        x[a] = domain.lower[a] + frac * (domain.upper[a] - domain.lower[a]);
                    }
                    best = best.max((post.eval(&x) - pre.eval(&x)).abs());
                    if !advance(&mut idx, per_axis) {
                        break;
                    }
                }
                for c in [pre.center(), post.center()].into_iter().flatten() {
                    if domain.contains(c) {
                        best = best.max((post.eval(c) - pre.eval(c)).abs());
                    }
                }
                best
            }
        }
    }

    /// Bound `M0` on the sup-norm of the pre- and post-change functions.
    pub fn m0(&self) -> f64 {
        match &self.model {
            Model::Univariate { pre_mean, post_mean } => pre_mean.abs().max(post_mean.abs()),
            Model::Regression { pre, post, .. } => pre.sup_norm().max(post.sup_norm()),
        }
    }

    /// Lipschitz constant of the regression functions (zero for means).
    pub fn lipschitz(&self) -> f64 {
        match &self.model {
            Model::Univariate { .. } => 0.0,
            Model::Regression { pre, post, .. } => pre.lipschitz().max(post.lipschitz()),
        }
    }

    /// `min_j P(X in A_j) / h^d` for the partition of width `h`. Exact for the
    /// uniform and lattice laws and for the one-dimensional ball; otherwise
    /// estimated from a dense grid.
    pub fn c_min(&self, partition: &BinPartition) -> Result<f64> {
        let Model::Regression { x_law, domain, .. } = &self.model else {
            return Err(invalid("c_min is defined for regression scenarios only"));
        };
        let hd = partition.bin_width().powi(partition.dim() as i32);
        let masses: Vec<f64> = match x_law {
            XLaw::Uniform => return Ok(partition.uniform_c_min()),
            XLaw::Lattice { per_axis } => {
                let points = lattice_points(domain, *per_axis);
                let mut counts = vec![0.0; partition.n_bins()];
                for p in &points {
                    counts[partition.locate(p)?] += 1.0;
                }
                counts.iter().map(|c| c / points.len() as f64).collect()
            }
            XLaw::UniformBall { center, radius } if center.len() == 1 => (0..partition.n_bins())
                .map(|j| {
                    let (lo, hi) = partition.bounds(j);
                    let a = lo[0].max(center[0] - radius);
                    let b = hi[0].min(center[0] + radius);
                    (b - a).max(0.0) / (2.0 * radius)
                })
                .collect(),
            XLaw::UniformBall { center, radius } => {
                let d = domain.dim();
                let per_axis = ((KAPPA_GRID_POINTS as f64).powf(1.0 / d as f64).floor() as usize).max(2);
                let mut counts = vec![0.0; partition.n_bins()];
                let mut total = 0.0;
                let mut idx = vec![0usize; d];
                let mut x = vec![0.0; d];
                loop {
                    for a in 0..d {
                        x[a] = center[a] - radius + (idx[a] as f64 + 0.5) / per_axis as f64 * 2.0 * radius;
                    }
                    if dist(&x, center) <= *radius {
                        counts[partition.locate(&x)?] += 1.0;
                        total += 1.0;
                    }
                    if !advance(&mut idx, per_axis) {
                        break;
                    }
                }
                counts.iter().map(|c| c / total).collect()
            }
        };
        Ok(masses.iter().copied().fold(f64::INFINITY, f64::min) / hd)
    }
}

/// Row-major odometer over `per_axis^d`; false once it wraps.
fn advance(idx: &mut [usize], per_axis: usize) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < per_axis {
            return true;
        }
        idx[i] = 0;
    }
    false
}

/// Midpoints of a `per_axis^d` grid over `domain`, row-major.
pub fn lattice_points(domain: &DomainBox, per_axis: usize) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let mut out = Vec::with_capacity(per_axis.pow(d as u32));
    let mut idx = vec![0usize; d];
    loop {
        out.push(
            (0..d)
                .map(|a| {
                    domain.lower[a] + (idx[a] as f64 + 0.5) / per_axis as f64 * (domain.upper[a] - domain.lower[a])
                })
                .collect(),
        );
        if !advance(&mut idx, per_axis) {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump_spec() -> ScenarioSpec {
        ScenarioSpec {
            model: Model::Regression {
                domain: DomainBox::unit(2),
                x_law: XLaw::Uniform,
                pre: RegressionFn::Constant { value: 0.0 },
                post: RegressionFn::Bump { center: vec![0.3, 0.7], height: 0.8, radius: 0.4, base: 0.0 },
            },
            noise: NoiseLaw::Gaussian { sigma: 0.5 },
            change_time: Some(10),
            horizon: 100,
        }
    }

    #[test]
    fn family_constants() {
        let s = bump_spec();
        assert!((s.kappa() - 0.8).abs() < 1e-6);
        assert!((s.m0() - 0.8).abs() < 1e-15);
        assert!((s.lipschitz() - 2.0).abs() < 1e-15);
        let cone = RegressionFn::Cone { center: vec![0.0], height: 0.3, base: 0.0 };
        assert!((cone.eval(&[0.0]) - 0.3).abs() < 1e-15);
        assert_eq!(cone.eval(&[0.5]), 0.0);
    }

    #[test]
    fn kappa_grid_includes_off_grid_peak() {
        let s = ScenarioSpec {
            model: Model::Regression {
                domain: DomainBox::unit(1),
                x_law: XLaw::Uniform,
                pre: RegressionFn::Constant { value: 0.0 },
                post: RegressionFn::Cone { center: vec![0.123_456_789], height: 0.2, base: 0.0 },
            },
            ..bump_spec()
        };
        assert!((s.kappa() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn c_min_for_each_law() {
        let p = BinPartition::new(DomainBox::unit(1), 0.25).unwrap();
        let mut s = ScenarioSpec {
            model: Model::Regression {
                domain: DomainBox::unit(1),
                x_law: XLaw::Lattice { per_axis: 8 },
                pre: RegressionFn::Constant { value: 0.0 },
                post: RegressionFn::Constant { value: 1.0 },
            },
            ..bump_spec()
        };
        assert!((s.c_min(&p).unwrap() - 1.0).abs() < 1e-12);
        if let Model::Regression { x_law, .. } = &mut s.model {
            *x_law = XLaw::UniformBall { center: vec![0.5], radius: 0.5 };
        }
        assert!((s.c_min(&p).unwrap() - 1.0).abs() < 1e-12);
        if let Model::Regression { x_law, .. } = &mut s.model {
            *x_law = XLaw::UniformBall { center: vec![0.5], radius: 0.3 };
        }
        // Edge bins get (0.25 - 0.2) / 0.6 of the mass.
        assert!((s.c_min(&p).unwrap() - 0.05 / 0.6 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let mut s = bump_spec();
        s.change_time = Some(0);
        assert!(s.validate().is_err());
        let mut s = bump_spec();
        s.noise = NoiseLaw::Gaussian { sigma: -1.0 };
        assert!(s.validate().is_err());
        let mut s = bump_spec();
        if let Model::Regression { x_law, .. } = &mut s.model {
            *x_law = XLaw::UniformBall { center: vec![0.5, 0.5], radius: 0.6 };
        }
        assert!(s.validate().is_err());
        assert!(bump_spec().validate().is_ok());
    }

    #[test]
    fn lattice_is_midpoints() {
        let pts = lattice_points(&DomainBox::new(vec![0.0], vec![0.375]).unwrap(), 24);
        assert_eq!(pts.len(), 24);
        assert!((pts[0][0] - 0.375 / 48.0).abs() < 1e-15);
    }
}
