use privcusum::estimation::{estimate_nonprivate, BinPartition, DomainBox, PrefixState, ScanPolicy};
use privcusum::noise::CounterNoise;
use privcusum::privacy::{privatize_regression, PrivacyParams, RawObservation};
use privcusum::simulation::{
    generate_stream, lower_bound_univariate, Model, NoiseLaw, RegressionFn, ScenarioSpec, XLaw,
};

#[test]
fn channel_noise_coordinates_are_uncorrelated() {
    let partition = BinPartition::new(DomainBox::unit(1), 0.5).unwrap();
    let params = PrivacyParams::new(1.0, 1.0).unwrap();
    let noise = CounterNoise::new(21);
    let n = 100_000u64;
    // Coordinates (w1, w2, z1, z2) with the noiseless part removed.
    let draws: Vec<[f64; 4]> = (1..=n)
        .map(|t| {
            let o =
                privatize_regression(&RawObservation::new(vec![0.25], 0.5), t, &partition, &params, &mut noise.at(t))
                    .unwrap();
            [o.w[0] - 1.0, o.w[1], o.z[0] - 0.5, o.z[1]]
        })
        .collect();
    let mean = |k: usize| draws.iter().map(|d| d[k]).sum::<f64>() / n as f64;
    let means: Vec<f64> = (0..4).map(mean).collect();
    let sd: Vec<f64> =
        (0..4).map(|k| (draws.iter().map(|d| (d[k] - means[k]).powi(2)).sum::<f64>() / n as f64).sqrt()).collect();
    for a in 0..4 {
        for b in a + 1..4 {
            let cov = draws.iter().map(|d| (d[a] - means[a]) * (d[b] - means[b])).sum::<f64>() / n as f64;
            let corr = cov / (sd[a] * sd[b]);
            assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr({a},{b}) = {corr}");
        }
    }
    // Time-keyed streams are reproducible.
    let again =
        privatize_regression(&RawObservation::new(vec![0.25], 0.5), 7, &partition, &params, &mut noise.at(7)).unwrap();
    assert_eq!(again.w[0] - 1.0, draws[6][0]);
}

#[test]
fn nonprivate_estimator_is_consistent() {
    // m(x) = 2 - x on [0, 1]; the bin average is 2 minus the bin center.
    let spec = ScenarioSpec {
        model: Model::Regression {
            domain: DomainBox::unit(1),
            x_law: XLaw::Uniform,
            pre: RegressionFn::Cone { center: vec![0.0], height: 2.0, base: 0.0 },
            post: RegressionFn::Cone { center: vec![0.0], height: 2.0, base: 0.0 },
        },
        noise: NoiseLaw::Gaussian { sigma: 0.1 },
        change_time: None,
        horizon: 10_000,
    };
    let partition = BinPartition::new(DomainBox::unit(1), 0.25).unwrap();
    let seeds = 40u64;
    let mut good = 0;
    for seed in 0..seeds {
        let mut st = PrefixState::new(4, ScanPolicy::Full).unwrap();
        for (i, o) in generate_stream(&spec, seed).unwrap().enumerate() {
            st.push_one_hot(i as u64 + 1, partition.locate(&o.x).unwrap(), o.y).unwrap();
        }
        let est = estimate_nonprivate(&st, 1, 10_000, &partition).unwrap();
        let err = (0..4).map(|j| (est[j] - (2.0 - partition.center(j)[0])).abs()).fold(0.0, f64::max);
        good += u64::from(err < 0.02);
    }
    assert!(good as f64 >= 0.95 * seeds as f64, "{good}/{seeds}");
}

#[test]
fn uniform_covariates_match_bin_volumes() {
    let domain = DomainBox::new(vec![0.0, -1.0], vec![1.0, 0.3]).unwrap();
    let partition = BinPartition::new(domain.clone(), 0.25).unwrap();
    let spec = ScenarioSpec {
        model: Model::Regression {
            domain: domain.clone(),
            x_law: XLaw::Uniform,
            pre: RegressionFn::Constant { value: 0.0 },
            post: RegressionFn::Constant { value: 0.0 },
        },
        noise: NoiseLaw::Gaussian { sigma: 1.0 },
        change_time: None,
        horizon: 100_000,
    };
    let mut counts = vec![0.0; partition.n_bins()];
    for o in generate_stream(&spec, 5).unwrap() {
        counts[partition.locate(&o.x).unwrap()] += 1.0;
    }
    for (j, c) in counts.iter().enumerate() {
        let p = partition.volume(j) / domain.volume();
        let se = (p * (1.0 - p) / 1e5).sqrt();
        assert!((c / 1e5 - p).abs() <= 4.0 * se, "bin {j}: {} vs {p}", c / 1e5);
    }
}

#[test]
fn regression_null_equals_late_change() {
    let spec = |delta| ScenarioSpec {
        model: Model::Regression {
            domain: DomainBox::unit(2),
            x_law: XLaw::Uniform,
            pre: RegressionFn::Constant { value: 0.0 },
            post: RegressionFn::Bump { center: vec![0.5, 0.5], height: 1.0, radius: 0.3, base: 0.0 },
        },
        noise: NoiseLaw::Uniform { sigma: 0.5 },
        change_time: delta,
        horizon: 300,
    };
    let a: Vec<_> = generate_stream(&spec(None), 2).unwrap().collect();
    let b: Vec<_> = generate_stream(&spec(Some(301)), 2).unwrap().collect();
    assert_eq!(a, b);
    let c: Vec<_> = generate_stream(&spec(Some(150)), 2).unwrap().collect();
    assert_eq!(a[..150], c[..150]);
    assert!(a.iter().zip(&c).all(|(u, v)| u.x == v.x));
}

#[test]
fn univariate_lower_bound_total_variation() {
    let (kappa, sigma) = (0.25, 0.3);
    let spec = lower_bound_univariate(kappa, sigma, Some(1), 2).unwrap();
    let Model::Univariate { pre_mean, post_mean } = spec.model else { panic!("univariate") };
    let half = spec.noise.sigma();
    let density = |m: f64, y: f64| if (y - m).abs() <= half { 1.0 / (2.0 * half) } else { 0.0 };
    let (lo, hi, n) = (-1.0, 2.0, 3_000_000);
    let dy = (hi - lo) / n as f64;
    let tv: f64 = (0..n)
        .map(|i| {
            let y = lo + (i as f64 + 0.5) * dy;
            (density(pre_mean, y) - density(post_mean, y)).abs()
        })
        .sum::<f64>()
        * dy
        / 2.0;
    assert!((tv - kappa / (2.0 * sigma)).abs() < 1e-5, "tv {tv}");
}
