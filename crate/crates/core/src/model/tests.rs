use super::*;
use crate::rng;
use crate::sdde::{Path, TimeGrid};

/// `x_{k+1} = φ·x_k + c + s·ε` on `paths` independent series of `len` points.
fn ar1(paths: usize, len: usize, phi: f64, c: f64, s: f64, seed: u64) -> Vec<Path> {
    (0..paths)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let mut x = c / (1.0 - phi).max(1e-9) * f64::from(phi < 1.0);
            let values = (0..len)
                .map(|_| {
                    let v = x;
                    x = phi * x + c + s * rng::standard_normal(&mut r);
                    v
                })
                .collect();
            Path::new(TimeGrid::from_counts(0.0, 1.0, 0, len - 1).unwrap(), 1, values).unwrap()
        })
        .collect()
}

fn windows(paths: &[Path], lags: usize, horizon: usize, split: SplitSpec) -> WindowSet {
    build_windows(paths, lags, horizon, &split.assign(paths.len()).unwrap()).unwrap()
}

fn quick(lags: usize, horizon: usize) -> ModelConfig {
    let mut cfg = ModelConfig { lags, horizon, width: 8, train_epistemic: false, ..ModelConfig::default() };
    cfg.drift = SgdConfig::new(0.01, 30);
    cfg.drift.minibatch = Minibatch::Size(32);
    cfg.aleatoric = SgdConfig::new(0.01, 30);
    cfg.aleatoric.minibatch = Minibatch::Size(32);
    cfg
}

fn mse(model: &DelaySdeNet, rows: &[Window]) -> f64 {
    model.residuals(rows).iter().map(|e| e[0] * e[0]).sum::<f64>() / rows.len() as f64
}

#[test]
fn identity_dynamics_learns_zero_drift() {
    let paths = ar1(10, 200, 1.0, 0.0, 0.1, 1);
    let w = windows(&paths, 2, 1, SplitSpec { train: 8.0, validation: 2.0, test: 0.0 });
    let model = fit(&w, &quick(2, 1), 3).unwrap();
    let val = w.split(Split::Validation);
    let mut f = [0.0];
    let mean_abs = val
        .iter()
        .map(|r| {
            model.drift_at(r.time, &r.lags, &mut f);
            f[0].abs()
        })
        .sum::<f64>()
        / val.len() as f64;
    assert!(mean_abs < 0.03, "mean |f| = {mean_abs}");
    assert!(mse(&model, &val) < 0.01 * 1.05, "{}", mse(&model, &val));
}

#[test]
fn ar1_matches_least_squares() {
    let paths = ar1(10, 300, 0.8, 0.5, 0.3, 2);
    let w = windows(&paths, 1, 1, SplitSpec { train: 8.0, validation: 2.0, test: 0.0 });
    let model = fit(&w, &quick(1, 1), 4).unwrap();
    let train = w.split(Split::Train);
    // closed-form OLS of x_{k+1} on (1, x_k)
    let n = train.len() as f64;
    let (sx, sy) = train.iter().fold((0.0, 0.0), |(a, b), r| (a + r.lags[0], b + r.target[0]));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = train
        .iter()
        .fold((0.0, 0.0), |(a, b), r| (a + (r.lags[0] - mx) * (r.target[0] - my), b + (r.lags[0] - mx).powi(2)));
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let val = w.split(Split::Validation);
    let ols = (val.iter().map(|r| (icpt + slope * r.lags[0] - r.target[0]).powi(2)).sum::<f64>() / val.len() as f64).sqrt();
    let net = mse(&model, &val).sqrt();
    assert!(net <= 1.05 * ols, "net {net} vs ols {ols}");
}

#[test]
fn residual_sign_convention() {
    let paths = ar1(2, 30, 0.9, 0.0, 1.0, 3);
    let w = windows(&paths, 1, 1, SplitSpec::all_train());
    let mut model = fit(&w, &quick(1, 1), 1).unwrap();
    for n in &mut model.drift {
        n.scale_output(0.0);
    }
    for (e, r) in model.residuals(&w.rows).iter().zip(&w.rows) {
        assert_eq!(e[0], r.lags[0] - r.target[0]);
    }
}

#[test]
fn homoskedastic_residuals_give_flat_variance() {
    let paths = ar1(10, 300, 0.5, 0.0, 0.7, 5);
    let w = windows(&paths, 1, 1, SplitSpec::all_train());
    let model = fit(&w, &quick(1, 1), 5).unwrap();
    let vars: Vec<f64> = model.predict_rows(&w.rows).iter().map(|p| p.aleatoric_var[0]).collect();
    let mean = vars.iter().sum::<f64>() / vars.len() as f64;
    assert!((mean - 0.49).abs() < 0.05, "mean variance {mean}");
    let spread = vars.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    assert!(spread < 0.15, "spread {spread}");
}

#[test]
fn scaled_residuals_scale_variance() {
    let base = ar1(4, 100, 0.5, 0.0, 0.7, 6);
    let doubled: Vec<Path> = base
        .iter()
        .map(|p| Path::new(*p.grid(), 1, p.values().iter().map(|v| 2.0 * v).collect()).unwrap())
        .collect();
    let mut cfg = quick(1, 1);
    cfg.width = 1;
    let a = fit(&windows(&base, 1, 1, SplitSpec::all_train()), &cfg, 7).unwrap();
    let b = fit(&windows(&doubled, 1, 1, SplitSpec::all_train()), &cfg, 7).unwrap();
    let wa = windows(&base, 1, 1, SplitSpec::all_train());
    let wb = windows(&doubled, 1, 1, SplitSpec::all_train());
    for (pa, pb) in a.predict_rows(&wa.rows).iter().zip(b.predict_rows(&wb.rows)) {
        assert!((pb.aleatoric_var[0] - 4.0 * pa.aleatoric_var[0]).abs() <= 1e-12 * pb.aleatoric_var[0].max(1e-300));
    }
}

#[test]
fn nstep_variance_is_additive() {
    let paths = ar1(4, 80, 0.5, 0.0, 0.5, 8);
    let w = windows(&paths, 2, 3, SplitSpec::all_train());
    let model = fit(&w, &quick(2, 3), 8).unwrap();
    let r = &w.rows[10];
    let p = model.predict(r.time, &r.lags, 3).unwrap();
    let mut g = [0.0];
    let mut total = 0.0;
    for s in 0..3 {
        model.aleatoric_std_at(r.time + s as f64, &r.lags, &mut g);
        total += g[0] * g[0];
    }
    assert_eq!(p.aleatoric_var[2], total * model.dt);
}

#[test]
fn noise_free_mean_is_euler_rollout() {
    let paths = ar1(3, 60, 0.7, 0.2, 0.2, 9);
    let w = windows(&paths, 2, 1, SplitSpec::all_train());
    let model = fit(&w, &quick(2, 1), 9).unwrap();
    let r = &w.rows[5];
    let p = model.predict(r.time, &r.lags, 4).unwrap();
    let mut z = r.lags.clone();
    let mut f = [0.0];
    for s in 0..4 {
        model.drift_at(r.time + s as f64, &z[s..s + 2], &mut f);
        z.push(z[s + 1] + f[0]);
    }
    assert_eq!(&p.mean, &z[2..]);
}

#[test]
fn confidence_interval_half_width() {
    let paths = ar1(2, 40, 0.5, 0.0, 0.5, 10);
    let w = windows(&paths, 1, 1, SplitSpec::all_train());
    let mut model = fit(&w, &quick(1, 1), 10).unwrap();
    model.sigma_e = 0.0;
    let r = &w.rows[3];
    let p = model.predict(r.time, &r.lags, 1).unwrap();
    let (lo, hi) = p.ci(0.95).unwrap();
    let half = (hi[0] - lo[0]) / 2.0;
    assert!((half - 1.959_963_984_540_054 * p.aleatoric_var[0].sqrt()).abs() < 1e-12);
    assert!(p.ci(1.0).is_err());
}

#[test]
fn short_history_is_rejected() {
    let paths = ar1(2, 40, 0.5, 0.0, 0.5, 11);
    let w = windows(&paths, 3, 1, SplitSpec::all_train());
    let model = fit(&w, &quick(3, 1), 11).unwrap();
    assert!(matches!(model.predict(0.0, &[1.0, 2.0], 1), Err(Error::InsufficientHistory { needed: 3, available: 2 })));
}

fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut win, mut pairs) = (0.0, 0.0);
    for (s, l) in scores.iter().zip(labels) {
        for (t, m) in scores.iter().zip(labels) {
            if *l && !*m {
                pairs += 1.0;
                win += if s > t { 1.0 } else if s == t { 0.5 } else { 0.0 };
            }
        }
    }
    win / pairs
}

#[test]
fn separable_classes_are_separated() {
    let inputs: Vec<Vec<f64>> = (0..200)
        .map(|i| {
            let sign = if i < 100 { -1.0 } else { 1.0 };
            vec![0.0, sign * (1.0 + (i % 10) as f64 * 0.1), 0.1 * (i % 7) as f64]
        })
        .collect();
    let obj = EpistemicObjective::new(&inputs, 100);
    let cfg = ModelConfig::default();
    let mut nets = init_nets(Role::Epistemic, 1, &cfg, 3, 1);
    let mut sgd = SgdConfig::new(0.05, 50);
    sgd.minibatch = Minibatch::Size(20);
    let mut st = TrainState::new(Role::Epistemic, 1, &nets);
    train_epochs(&obj, &mut nets, &sgd, &mut st, usize::MAX).unwrap();
    let scores: Vec<f64> = inputs.iter().map(|x| logistic(nets[0].eval(x))).collect();
    let labels: Vec<bool> = (0..200).map(|i| i >= 100).collect();
    assert_eq!(auc(&scores, &labels), 1.0);
}

#[test]
fn identical_classes_are_indistinguishable() {
    let base: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.1, (i as f64).sin()]).collect();
    let mut inputs = base.clone();
    inputs.extend(base);
    let obj = EpistemicObjective::new(&inputs, 50);
    let cfg = ModelConfig::default();
    let nets = init_nets(Role::Epistemic, 1, &cfg, 2, 1);
    let (loss, grad) = train::batch_gradient(&obj, &nets, None);
    assert!(loss.abs() < 1e-12);
    assert!(grad.iter().all(|g| g.abs() < 1e-12));
}

fn full_model() -> (WindowSet, DelaySdeNet) {
    let paths = ar1(6, 80, 0.6, 0.0, 0.4, 12);
    let w = windows(&paths, 2, 1, SplitSpec { train: 4.0, validation: 1.0, test: 1.0 });
    let mut cfg = quick(2, 1);
    cfg.train_epistemic = true;
    cfg.epistemic = SgdConfig::new(0.05, 5);
    cfg.epistemic.minibatch = Minibatch::Size(32);
    let m = fit(&w, &cfg, 13).unwrap();
    (w, m)
}

#[test]
fn probabilities_stay_in_unit_interval() {
    let (_, model) = full_model();
    let mut r = rng::stream(0, 0);
    let mut p = [0.0];
    for i in 0..10_000 {
        let mag = if i % 2 == 0 { 1e6 } else { 1.0 };
        let x: Vec<f64> = (0..3).map(|_| mag * rng::standard_normal(&mut r)).collect();
        model.prob_at(x[0], &x[1..], &mut p);
        assert!((0.0..=1.0).contains(&p[0]));
    }
}

#[test]
fn training_is_deterministic_and_staged() {
    let (w, a) = full_model();
    let (_, b) = full_model();
    assert_eq!(a, b);
    assert!(a.sigma_e >= 0.0);
    let mut cfg = a.config.clone();
    cfg.aleatoric.learning_rate = 0.02;
    cfg.epistemic.iterations = 2;
    let c = fit(&w, &cfg, 13).unwrap();
    assert_eq!(a.drift, c.drift);
    assert_ne!(a.aleatoric, c.aleatoric);
}

#[test]
fn resumed_fit_matches_uninterrupted() {
    let (w, full) = full_model();
    let cfg = full.config.clone();
    let mut ck = None;
    let mut rounds = 0;
    let model = loop {
        rounds += 1;
        match fit_resumable(&w, &cfg, 13, ck.take(), Some(7)).unwrap() {
            FitOutcome::Done(m) => break *m,
            FitOutcome::Paused(c) => {
                let s = serde_json::to_string(&c).unwrap();
                ck = Some(serde_json::from_str(&s).unwrap());
            }
        }
    };
    assert!(rounds > 5);
    assert_eq!(model, full);
}

#[test]
fn artifact_roundtrip() {
    let (_, model) = full_model();
    let back = DelaySdeNet::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back, model);
}

#[test]
fn quantile_values() {
    assert!((gaussian_quantile(0.95).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
    assert!(gaussian_quantile(0.0).is_err());
}
