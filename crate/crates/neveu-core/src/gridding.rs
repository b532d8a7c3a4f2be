//! Small grid helpers shared by the criteria checks and the CLI.

/// `n` log-spaced points on [lo, hi], inclusive of both ends. Requires
/// 0 < lo < hi and n >= 2.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            (la + t * (lb - la)).exp()
        })
        .collect()
}

/// `n` linearly spaced points on [lo, hi], inclusive of both ends.
pub fn lin_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(hi > lo && n >= 2);
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            lo + t * (hi - lo)
        })
        .collect()
}
