//! Observed orders from refinement sequences (each level halves the step).
//!
//! The asymptotic window drops the two coarsest levels; with fewer than four
//! levels it falls back to the two finest.

/// First level index inside the asymptotic window.
pub fn window_start(levels: usize) -> usize {
    if levels >= 4 {
        2
    } else {
        levels.saturating_sub(2)
    }
}

/// `log₂(e_l / e_{l+1})` for consecutive levels.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Least-squares slope of `−log₂ e_l` against `l` over the window.
pub fn asymptotic_order(errors: &[f64]) -> f64 {
    assert!(errors.len() >= 2, "need at least two levels");
    let pts: Vec<(f64, f64)> =
        errors.iter().enumerate().skip(window_start(errors.len())).map(|(l, e)| (l as f64, -e.log2())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// `x_l / x_{l−1}` for consecutive levels inside the window.
pub fn window_ratios(values: &[f64]) -> Vec<f64> {
    let s = window_start(values.len());
    values.windows(2).skip(s).map(|w| w[1] / w[0]).collect()
}
