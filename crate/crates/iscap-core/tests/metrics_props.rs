use std::f64::consts::PI;

use iscap_core::channel::{freq_response, half_sample_taps, sinc};
use iscap_core::linalg::min_eigenvalue;
use iscap_core::metrics::powering::BRANCHES;
use iscap_core::{
    achievable_rate, generate_channels, ub_fap, ChannelGenConfig, CommChannel, GaussianInput, OfdmConfig,
    PoweringChannel, PoweringCoefficients, RectennaModel, SensingGrid,
};
use num_complex::Complex64;
use proptest::prelude::*;

const PSD_TOL: f64 = 1e-9;

fn taps(max_len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)), 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn half_sample_taps_follow_the_sinc_sum(a in taps(4)) {
        let half = half_sample_taps(&a);
        prop_assert_eq!(half.len(), a.len());
        for (j, h) in half.iter().enumerate() {
            let direct: Complex64 = a.iter().enumerate().map(|(l, &al)| al * sinc(j as f64 + 0.5 - l as f64)).sum();
            prop_assert!((h - direct).norm() <= 1e-12);
        }
        let k = 8;
        let response = freq_response(&half, k).unwrap();
        for (i, r) in response.iter().enumerate() {
            let direct: Complex64 = half
                .iter()
                .enumerate()
                .map(|(l, &al)| al * Complex64::from_polar(1.0, -2.0 * PI * (l * i) as f64 / k as f64))
                .sum();
            prop_assert!((r - direct).norm() <= 1e-12);
        }
    }

    #[test]
    fn coefficient_matrices_are_psd(a in taps(3), k_extra in 0usize..3) {
        let k_g = 3;
        let cfg = OfdmConfig::new(k_g + 1 + k_extra, k_g, 2, 30e6, 5.18e9).unwrap();
        let pchan = PoweringChannel::new(a, cfg.k, 0.0).unwrap();
        let coeffs = PoweringCoefficients::build(&pchan, &cfg).unwrap();
        for b in BRANCHES {
            for n in cfg.k_g..cfg.k_prime() {
                let m = coeffs.a_matrix(n, b).unwrap();
                prop_assert!(min_eigenvalue(m) >= -PSD_TOL * (1.0 + m.norm()));
                prop_assert!(m.rank(1e-9 * (1.0 + m.norm())) <= 2);
            }
            for n in 0..cfg.k_g {
                let e = &coeffs.cp_matrices(n, b).unwrap().e;
                prop_assert!(min_eigenvalue(e) >= -PSD_TOL * (1.0 + e.norm()));
            }
        }
    }

    #[test]
    fn all_mean_bound_depends_on_combined_power(
        mu in prop::collection::vec(-2.0f64..2.0, 8),
        split in prop::collection::vec(0.0f64..1.0, 4),
    ) {
        let cfg = OfdmConfig::new(4, 2, 4, 30e6, 5.18e9).unwrap();
        let grid = SensingGrid::new(&cfg);
        let p: Vec<f64> = mu.iter().map(|x| x * x).collect();
        let mut mu2 = vec![0.0; 8];
        for i in 0..4 {
            let total = p[i] + p[i + 4];
            mu2[i] = (split[i] * total).sqrt();
            mu2[i + 4] = -((1.0 - split[i]) * total).sqrt();
        }
        let p2: Vec<f64> = mu2.iter().map(|x| x * x).collect();
        let a = ub_fap(&p, &mu, &grid).unwrap();
        let b = ub_fap(&p2, &mu2, &grid).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn rate_increases_in_each_variance(
        h in prop::collection::vec(0.1f64..2.0, 4),
        sigma in prop::collection::vec(0.0f64..2.0, 8),
        idx in 0usize..8,
        bump in 1e-3f64..1.0,
    ) {
        let cfg = OfdmConfig::new(4, 2, 4, 30e6, 5.18e9).unwrap();
        let cchan = CommChannel::new(h.iter().map(|&x| Complex64::new(x, 0.0)).collect(), 1e-8).unwrap();
        let base = achievable_rate(&sigma, &cchan, &cfg).unwrap();
        let mut more = sigma.clone();
        more[idx] += bump;
        prop_assert!(achievable_rate(&more, &cchan, &cfg).unwrap() > base);
    }

    #[test]
    fn zdc_does_not_depend_on_m(
        a in taps(2),
        mu in prop::collection::vec(-1.0f64..1.0, 8),
        sigma in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        let rect = RectennaModel::default();
        let input = GaussianInput::new(mu, sigma).unwrap();
        let alloc = input.allocation();
        let value = |m: usize| {
            let cfg = OfdmConfig::new(4, 2, m, 30e6, 5.18e9).unwrap();
            let pchan = PoweringChannel::new(a.clone(), 4, 0.01).unwrap();
            PoweringCoefficients::build(&pchan, &cfg).unwrap().zdc_total(&rect, &alloc.p, &alloc.u).unwrap()
        };
        prop_assert_eq!(value(2), value(4));
        prop_assert_eq!(value(2), value(16));
    }

    #[test]
    fn channel_generation_is_pure(seed in any::<u64>()) {
        let cfg = OfdmConfig::new(8, 4, 16, 30e6, 5.18e9).unwrap();
        let gen = ChannelGenConfig::default();
        prop_assert_eq!(generate_channels(&gen, &cfg, seed).unwrap(), generate_channels(&gen, &cfg, seed).unwrap());
    }
}
