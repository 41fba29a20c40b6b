//! Small numeric helpers shared across modules.

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median of a copy of `xs`; 0 for an empty slice.
pub(crate) fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub(crate) fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Linear interpolation of `(ts, ys)` at `t`, holding the end values outside
/// the sampled range. `ts` must be non-decreasing and non-empty. A query that
/// lands exactly on a sample returns that sample unchanged.
pub(crate) fn interp_linear(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    debug_assert_eq!(ts.len(), ys.len());
    let n = ts.len();
    if t <= ts[0] {
        return ys[0];
    }
    if t >= ts[n - 1] {
        return ys[n - 1];
    }
    // first index with ts[i] > t
    let hi = ts.partition_point(|&x| x <= t);
    let lo = hi - 1;
    if ts[lo] == t {
        return ys[lo];
    }
    let w = (t - ts[lo]) / (ts[hi] - ts[lo]);
    ys[lo] + (ys[hi] - ys[lo]) * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }

    #[test]
    fn interp_exact_at_samples_and_held_outside() {
        let ts = [0.0, 1.0, 3.0];
        let ys = [0.1, 0.7, -2.0];
        for (t, y) in ts.iter().zip(ys) {
            assert_eq!(interp_linear(&ts, &ys, *t), y);
        }
        assert_eq!(interp_linear(&ts, &ys, -5.0), 0.1);
        assert_eq!(interp_linear(&ts, &ys, 9.0), -2.0);
        assert!((interp_linear(&ts, &ys, 2.0) - (-0.65)).abs() < 1e-12);
    }
}
