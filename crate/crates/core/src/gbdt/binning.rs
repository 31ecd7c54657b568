//! Histogram cut points for split search.

/// Ascending thresholds splitting `values` into at most `n_bins` bins of
/// roughly equal population. A value `v` goes right of cut `c` when `v > c`.
pub(crate) fn quantile_cuts(values: &[f64], n_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() <= 1 || n_bins <= 1 {
        return Vec::new();
    }
    let max = sorted[sorted.len() - 1];
    if sorted.len() <= n_bins {
        sorted.pop();
        return sorted;
    }
    let mut all = values.to_vec();
    all.sort_by(f64::total_cmp);
    let n = all.len();
    let mut cuts: Vec<f64> = (1..n_bins)
        .map(|k| all[(k * n / n_bins).min(n - 1)])
        .filter(|&c| c < max)
        .collect();
    cuts.dedup();
    cuts
}

/// Bin of each value: the number of cuts strictly below it.
pub(crate) fn bin_values(values: &[f64], cuts: &[f64]) -> Vec<u16> {
    values
        .iter()
        .map(|v| cuts.partition_point(|c| c < v) as u16)
        .collect()
}
