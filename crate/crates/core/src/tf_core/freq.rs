//! Logarithmic frequency grids.

/// `n` points spaced evenly in `log10` between `10^lo` and `10^hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo)],
        _ => (0..n)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// Default design grid: 200 points on [1e-3, 1e3] rad/s.
pub fn design_grid() -> Vec<f64> {
    logspace(-3.0, 3.0, 200)
}

/// Verification grid for factorization identities: 50 points on [1e-3, 1e3] rad/s.
pub fn check_grid() -> Vec<f64> {
    logspace(-3.0, 3.0, 50)
}
