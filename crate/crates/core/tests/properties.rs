use delay_sde_net::eval::{rocauc, rocauc_pairwise};
use delay_sde_net::net::{logistic, path_norm, sgd_step, Activation, SgdConfig, TwoLayerNet};
use delay_sde_net::ood::{soft_brownian_offset, SboConfig, SboMode};
use delay_sde_net::sdde::{
    aggregate_increments, make_time_grid, project, sample_brownian, simulate_paths, SddeSpec, SinCosSegment, TimeGrid,
};
use proptest::prelude::*;

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![
        (0.2f64..3.0).prop_map(|a| Activation::tanh(a).unwrap()),
        (0.2f64..3.0).prop_map(|l| Activation::sigmoid(l).unwrap()),
        Just(Activation::Relu),
    ]
}

fn net_parts(max_width: usize, max_in: usize) -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1..=max_width, 1..=max_in).prop_flat_map(|(m, n)| {
        (
            Just(n),
            prop::collection::vec(-2.0f64..2.0, m),
            prop::collection::vec(-2.0f64..2.0, m * n),
            prop::collection::vec(-2.0f64..2.0, m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_admits_both_endpoints(lags in 0usize..40, steps in 1usize..400, dt in 0.01f64..2.0) {
        let grid = make_time_grid(lags as f64 * dt, steps as f64 * dt, dt).unwrap();
        prop_assert_eq!(grid.len(), lags + steps + 1);
        prop_assert_eq!(grid.first_index(), -(lags as i64));
        prop_assert_eq!(grid.last_index(), steps as i64);
        let t: Vec<f64> = grid.times().collect();
        for w in t.windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!(((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(1.0) * (lags + steps) as f64);
        }
    }

    #[test]
    fn forward_is_linear_in_outer_weights((n, a, w, b) in net_parts(12, 6), act in activation(), x in prop::collection::vec(-3.0f64..3.0, 6)) {
        let x = &x[..n];
        let net = TwoLayerNet::new(act, n, a.clone(), w.clone(), b.clone(), None).unwrap();
        let doubled = TwoLayerNet::new(act, n, a.iter().map(|v| 2.0 * v).collect(), w, b, None).unwrap();
        let (y, y2) = (net.forward(x).unwrap(), doubled.forward(x).unwrap());
        prop_assert!((y2 - 2.0 * y).abs() <= 1e-12 * y.abs().max(1.0));
    }

    #[test]
    fn path_norm_is_homogeneous_in_outer_weights((n, a, w, b) in net_parts(12, 6), act in activation(), c in -5.0f64..5.0) {
        let net = TwoLayerNet::new(act, n, a.clone(), w.clone(), b.clone(), None).unwrap();
        let scaled = TwoLayerNet::new(act, n, a.iter().map(|v| c * v).collect(), w, b, None).unwrap();
        let (p, q) = (path_norm(&net), path_norm(&scaled));
        prop_assert!((q - c.abs() * p).abs() <= 1e-12 * p.max(1.0) * c.abs().max(1.0));
    }

    #[test]
    fn sgd_with_zero_rate_keeps_parameters(params in prop::collection::vec(-5.0f64..5.0, 1..50), seed in any::<u64>()) {
        let grad: Vec<f64> = params.iter().enumerate().map(|(i, p)| p * (seed % 7) as f64 - i as f64).collect();
        let mut velocity = vec![0.1; params.len()];
        let mut after = params.clone();
        sgd_step(&mut after, &grad, &mut velocity, &SgdConfig { learning_rate: 0.0, ..SgdConfig::new(1.0, 1) });
        prop_assert_eq!(after, params);
    }

    #[test]
    fn classifier_probability_stays_in_unit_interval(z in prop_oneof![-1e6f64..1e6, -50.0f64..50.0]) {
        let p = logistic(z);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn coarse_brownian_path_is_the_fine_path(seed in any::<u64>(), kappa in prop::sample::select(vec![1usize, 2, 4, 5, 10, 20, 25, 50, 100])) {
        let grid = TimeGrid::new(0.0, 1.0, 0.01).unwrap();
        let fine = sample_brownian(&grid, 2, seed);
        let coarse = aggregate_increments(&fine, kappa).unwrap();
        prop_assert_eq!(coarse.steps(), fine.steps() / kappa);
        for c in 1..=coarse.steps() {
            for j in 0..2 {
                let sum: f64 = ((c - 1) * kappa + 1..=c * kappa).map(|k| fine.step(k)[j]).sum();
                prop_assert!((coarse.step(c)[j] - sum).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn projection_moves_one_index_per_step(seed in any::<u64>(), p in 1usize..6, k in 0i64..40) {
        let spec = SddeSpec::benchmark(1.0, 1.0).unwrap();
        let grid = make_time_grid(6.0, 50.0, 1.0).unwrap();
        let set = simulate_paths(&spec, &SinCosSegment, &grid, 1, seed).unwrap();
        let path = &set.paths[0];
        let now = project(path, p, k).unwrap();
        let next = project(path, p, k + 1).unwrap();
        let d = path.dim();
        prop_assert_eq!(&next.entries[..d * (p - 1)], &now.entries[d..]);
        prop_assert_eq!(&next.entries[d * (p - 1)..], path.at(k));
    }

    #[test]
    fn simulation_is_a_function_of_the_seed(seed in any::<u64>()) {
        let spec = SddeSpec::benchmark(1.0, 1.0).unwrap();
        let grid = make_time_grid(3.0, 30.0, 1.0).unwrap();
        let a = simulate_paths(&spec, &SinCosSegment, &grid, 3, seed).unwrap();
        let b = simulate_paths(&spec, &SinCosSegment, &grid, 3, seed).unwrap();
        for (x, y) in a.paths.iter().zip(&b.paths) {
            prop_assert_eq!(x.values(), y.values());
        }
    }

    #[test]
    fn rocauc_matches_pairwise_count(pairs in prop::collection::vec((0u8..6, any::<bool>()), 2..200)) {
        let scores: Vec<f64> = pairs.iter().map(|(s, _)| *s as f64).collect();
        let labels: Vec<bool> = pairs.iter().map(|(_, l)| *l).collect();
        match (rocauc(&scores, &labels), rocauc_pairwise(&scores, &labels)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn offset_windows_keep_their_distance(
        train in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 5), 1..40),
        d_minus in 0.1f64..2.0,
        whole in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mode = if whole { SboMode::WholeWindowShift } else { SboMode::PerLagNoise };
        let cfg = SboConfig { d_minus: Some(d_minus), mode, ..SboConfig::default() };
        let out = soft_brownian_offset(&train, 2, &cfg, 50, seed).unwrap();
        prop_assert_eq!(out.points.len() + out.failed, 50);
        for o in &out.points {
            let nearest = train
                .iter()
                .map(|x| x.iter().zip(o).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(nearest >= d_minus);
        }
    }
}
