use proptest::prelude::*;

use privcusum::detection::{
    cusum_univariate, private_schedule_active, run_detector, threshold_private, Detector, PrivateMonitor,
    ThresholdParams, UnivariateMonitor,
};
use privcusum::estimation::{estimate_private, BinPartition, DomainBox, PrefixState, ScanPolicy};
use privcusum::noise::CounterNoise;
use privcusum::privacy::{privatize_regression, PrivacyParams, RawObservation};

fn univariate_state(zs: &[f64]) -> PrefixState {
    let mut st = PrefixState::new(1, ScanPolicy::Full).unwrap();
    for (i, &z) in zs.iter().enumerate() {
        st.push(i as u64 + 1, &[1.0], &[z]).unwrap();
    }
    st
}

fn params(alpha: f64, h: f64, gamma: f64) -> ThresholdParams {
    ThresholdParams {
        gamma,
        alpha,
        truncation_m: 1.5,
        m0_bound: 1.0,
        sigma: 0.5,
        c_lip: 1.0,
        c_min: 1.0,
        h,
        d: 1,
        private_noise_factor: 1.0,
    }
}

proptest! {
    #[test]
    fn univariate_scale_covariance(zs in prop::collection::vec(-10.0f64..10.0, 3..60), lambda in 0.01f64..100.0) {
        let t = zs.len() as u64;
        let a = univariate_state(&zs);
        let scaled: Vec<f64> = zs.iter().map(|z| lambda * z).collect();
        let b = univariate_state(&scaled);
        for s in 1..t {
            let (x, y) = (cusum_univariate(&a, s, t).unwrap(), cusum_univariate(&b, s, t).unwrap());
            prop_assert!((y - lambda * x).abs() <= 1e-9 * (1.0 + lambda * x));
        }
    }

    #[test]
    fn univariate_sign_symmetry(zs in prop::collection::vec(-10.0f64..10.0, 2..60)) {
        let t = zs.len() as u64;
        let neg: Vec<f64> = zs.iter().map(|z| -z).collect();
        let (a, b) = (univariate_state(&zs), univariate_state(&neg));
        for s in 1..t {
            prop_assert_eq!(cusum_univariate(&a, s, t).unwrap(), cusum_univariate(&b, s, t).unwrap());
        }
    }

    #[test]
    fn inactive_pairs_never_alarm(s in 1u64..5000, extra in 1u64..5000, alpha in 0.05f64..1.0, h in 0.05f64..1.0, gamma in 0.001f64..0.5) {
        let t = s + extra;
        let p = params(alpha, h, gamma);
        if !private_schedule_active(s, t, &p).unwrap() {
            prop_assert_eq!(threshold_private(s, t, &p).unwrap(), f64::INFINITY);
        } else {
            prop_assert!(threshold_private(s, t, &p).unwrap().is_finite());
        }
    }

    #[test]
    fn private_detector_silent_while_inactive(seed in 0u64..1000, alpha in 0.1f64..1.0) {
        let partition = BinPartition::new(DomainBox::unit(1), 0.25).unwrap();
        let p = ThresholdParams { h: 0.25, ..params(alpha, 0.25, 0.05) };
        let privacy = PrivacyParams::new(alpha, 1.5).unwrap();
        let noise = CounterNoise::new(seed);
        let mut det = Detector::new(PrivateMonitor::new(partition.clone(), p).unwrap(), ScanPolicy::Full, false).unwrap();
        for t in 1..=150u64 {
            let x = (t as f64 * 0.618).fract();
            let y = if t > 75 { 1.0 } else { -1.0 };
            let obs = privatize_regression(&RawObservation::new(vec![x], y), t, &partition, &privacy, &mut noise.at(t)).unwrap();
            let r = det.observe(&obs).unwrap();
            prop_assert!(r.alarm.is_none());
            prop_assert_eq!(r.min_threshold, f64::INFINITY);
        }
    }

    #[test]
    fn dyadic_never_alarms_before_full(zs in prop::collection::vec(-1.0f64..1.0, 50..250), jump in 0.0f64..6.0, at in 10usize..50) {
        let xs: Vec<f64> = zs.iter().enumerate().map(|(i, z)| z + if i >= at { jump } else { 0.0 }).collect();
        let horizon = xs.len() as u64;
        let run = |policy| {
            let mut det = Detector::new(UnivariateMonitor::new(0.05, 1.0, f64::INFINITY).unwrap(), policy, false).unwrap();
            run_detector(&mut det, xs.clone(), horizon, |_| {}).unwrap().first_alarm()
        };
        let (full, dyadic) = (run(ScanPolicy::Full), run(ScanPolicy::Dyadic));
        match (full, dyadic) {
            (Some(f), Some(d)) => prop_assert!(d >= f),
            (None, Some(_)) => prop_assert!(false, "dyadic alarmed without full"),
            _ => {}
        }
    }

    #[test]
    fn streaming_estimate_matches_direct(seed in 0u64..500, s in 1u64..60, len in 0u64..60) {
        let partition = BinPartition::new(DomainBox::unit(1), 0.25).unwrap();
        let privacy = PrivacyParams::new(0.5, 1.0).unwrap();
        let noise = CounterNoise::new(seed);
        let t_end = s + len;
        let mut st = PrefixState::new(4, ScanPolicy::Full).unwrap();
        let mut all = Vec::new();
        for t in 1..=t_end {
            let x = ((t * 7 + seed) % 97) as f64 / 97.0;
            let obs = privatize_regression(&RawObservation::new(vec![x], 0.3), t, &partition, &privacy, &mut noise.at(t)).unwrap();
            st.push(t, &obs.w, &obs.z).unwrap();
            all.push(obs);
        }
        let est = estimate_private(&st, s, t_end, &partition).unwrap();
        let n = (t_end - s + 1) as f64;
        for (j, &e) in est.iter().enumerate() {
            let seg = &all[(s - 1) as usize..t_end as usize];
            let mu = seg.iter().map(|o| o.w[j]).sum::<f64>() / n;
            let nu = seg.iter().map(|o| o.z[j]).sum::<f64>() / n;
            let want = if mu >= (n + 1.0).ln() / n { nu / mu } else { 0.0 };
            prop_assert!((e - want).abs() <= 1e-12 * want.abs().max(1.0), "bin {} got {} want {}", j, e, want);
        }
    }

    #[test]
    fn locate_agrees_with_bounds(lo in -5.0f64..5.0, len in 0.1f64..10.0, frac in 0.01f64..=1.0, u in 0.0f64..=1.0) {
        let h = frac * len;
        let domain = DomainBox::new(vec![lo], vec![lo + len]).unwrap();
        let p = BinPartition::new(domain, h).unwrap();
        let x = [lo + u * len];
        let bin = p.locate(&x).unwrap();
        prop_assert!(p.contains(bin, &x));
        let owners = (0..p.n_bins()).filter(|&j| p.contains(j, &x)).count();
        prop_assert_eq!(owners, 1);
    }
}
