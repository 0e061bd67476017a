//! Order statistics shared by the surface metrics and the fairness report.
//!
//! One quantile convention everywhere: linear interpolation between order
//! statistics at zero-based rank `r = q·(n − 1)` on the sorted sample.

/// Quantile `q ∈ [0, 1]` of an ascending slice. `None` for an empty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let rank = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 >= n || frac == 0.0 {
        return Some(sorted[lo.min(n - 1)]);
    }
    Some(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// Percentile `p ∈ [0, 100]` of an unsorted sample.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p / 100.0)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}
