use crate::net::barron::golden_section;

const COARSE_POINTS: usize = 64;

/// Mean over rows of `‖(σ·prob + aleatoric_std)² − e²‖₂`.
pub fn sigma_objective(sigma: f64, residuals: &[Vec<f64>], aleatoric_std: &[Vec<f64>], prob: &[Vec<f64>]) -> f64 {
    let total: f64 = residuals
        .iter()
        .zip(aleatoric_std)
        .zip(prob)
        .map(|((e, a), p)| {
            e.iter()
                .zip(a)
                .zip(p)
                .map(|((e, a), p)| ((sigma * p + a).powi(2) - e * e).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    total / residuals.len().max(1) as f64
}

/// Epistemic scale minimizing [`sigma_objective`] on held-out rows.
///
/// Scans a grid on `[0, 3·max|e|]`, then refines around the best grid
/// point by golden section to `1e-4` relative. Ties resolve to the smaller
/// value, so a classifier that is zero everywhere yields `0`.
pub fn tune_sigma_e(residuals: &[Vec<f64>], aleatoric_std: &[Vec<f64>], prob: &[Vec<f64>]) -> f64 {
    let max_e = residuals.iter().flatten().fold(0.0f64, |m, e| m.max(e.abs()));
    if residuals.is_empty() || max_e == 0.0 {
        return 0.0;
    }
    let f = |s: f64| sigma_objective(s, residuals, aleatoric_std, prob);
    let step = 3.0 * max_e / (COARSE_POINTS - 1) as f64;
    let (best_i, best) = (0..COARSE_POINTS)
        .map(|i| (i, f(i as f64 * step)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let lo = best_i.saturating_sub(1) as f64 * step;
    let hi = (best_i + 1).min(COARSE_POINTS - 1) as f64 * step;
    let (x, fx) = golden_section(f, lo, hi, 1e-4);
    if fx < best { x } else { best_i as f64 * step }
}
