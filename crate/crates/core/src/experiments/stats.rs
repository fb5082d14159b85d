//! Small statistics helpers shared by the pipelines.

use rayon::prelude::*;

use crate::error::Result;

/// Runs `f` for every trial index in parallel and returns the results in
/// index order. The first error in index order wins, so failures do not
/// depend on scheduling.
pub(crate) fn ordered_trials<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = (0..count).into_par_iter().map(&f).collect();
    results.into_iter().collect()
}

/// Weighted least-squares nondecreasing fit (pool adjacent violators).
/// Entries with zero weight take the value of their pooled neighbours.
pub fn isotonic_nondecreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // Blocks of (weighted mean, weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (if w > 0.0 { v } else { f64::NAN }, w, 1usize);
        while let Some(&(pv, pw, pl)) = blocks.last() {
            let violates = match (pv.is_nan(), cur.0.is_nan()) {
                (false, false) => pv > cur.0,
                _ => true,
            };
            if !violates {
                break;
            }
            blocks.pop();
            let w = pw + cur.1;
            let v = if w > 0.0 {
                (nan_zero(pv) * pw + nan_zero(cur.0) * cur.1) / w
            } else {
                f64::NAN
            };
            cur = (v, w, pl + cur.2);
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(values.len());
    for (v, _, len) in blocks {
        out.extend(std::iter::repeat_n(v, len));
    }
    out
}

fn nan_zero(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v
    }
}

/// Where a nondecreasing curve first reaches `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing {
    At(f64),
    /// Already at or above the level at the first grid point.
    BelowGrid,
    /// Never reaches the level on the grid.
    AboveGrid,
}

/// Linear interpolation of the first crossing of `level` by `ys` over `xs`.
pub fn first_crossing(xs: &[f64], ys: &[f64], level: f64) -> Crossing {
    match ys.iter().position(|&y| y >= level) {
        None => Crossing::AboveGrid,
        Some(0) => Crossing::BelowGrid,
        Some(j) => {
            let (x0, x1, y0, y1) = (xs[j - 1], xs[j], ys[j - 1], ys[j]);
            Crossing::At(x0 + (level - y0) / (y1 - y0) * (x1 - x0))
        }
    }
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = k as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let mid = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((mid - half).max(0.0), (mid + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pava_pools_violators() {
        let fit = isotonic_nondecreasing(&[0.1, 0.5, 0.3, 0.9], &[1.0; 4]);
        assert_eq!(fit, vec![0.1, 0.4, 0.4, 0.9]);
        let fit = isotonic_nondecreasing(&[1.0, 0.0], &[3.0, 1.0]);
        assert_eq!(fit, vec![0.75, 0.75]);
        let fit = isotonic_nondecreasing(&[0.2, 7.0, 0.6], &[1.0, 0.0, 1.0]);
        assert!(fit.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(fit[0], 0.2);
        assert_eq!(fit[2], 0.6);
    }

    #[test]
    fn crossing_cases() {
        let xs = [1.0, 2.0, 3.0];
        assert_eq!(first_crossing(&xs, &[0.0, 0.25, 0.75], 0.5), Crossing::At(2.5));
        assert_eq!(first_crossing(&xs, &[0.6, 0.7, 0.8], 0.5), Crossing::BelowGrid);
        assert_eq!(first_crossing(&xs, &[0.0, 0.1, 0.2], 0.5), Crossing::AboveGrid);
    }

    #[test]
    fn quantiles_and_intervals() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 1.0), 4.0);
        assert_eq!(quantile(&s, 0.5), 2.5);
        let (lo, hi) = wilson(50, 100);
        assert!(lo < 0.5 && hi > 0.5 && hi - lo < 0.2);
        assert_eq!(wilson(0, 10).0, 0.0);
    }
}
