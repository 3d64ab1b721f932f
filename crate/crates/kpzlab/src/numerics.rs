//! Small numerical helpers shared by the polymer code.

use crate::NEG_INF;

/// `ln(e^a + e^b)` with the conventions `e^{-inf} = 0`.
#[inline]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == NEG_INF {
        return b;
    }
    if b == NEG_INF {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log of a sum of exponentials.
pub fn logsumexp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(NEG_INF, f64::max);
    if m == NEG_INF || m.is_infinite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Cumulative trapezoid integral of `exp(g)` over the abscissae `xs`, in log
/// space. `out[0] = -inf` (empty integral) and `out[i]` is the log of the
/// integral from `xs[0]` to `xs[i]`.
pub fn log_cumtrapz(xs: &[f64], g: &[f64]) -> Vec<f64> {
    debug_assert_eq!(xs.len(), g.len());
    let mut out = vec![NEG_INF; xs.len()];
    let mut acc = NEG_INF;
    for i in 1..xs.len() {
        let cell = logaddexp(g[i - 1], g[i]);
        if cell != NEG_INF {
            acc = logaddexp(acc, (0.5 * (xs[i] - xs[i - 1])).ln() + cell);
        }
        out[i] = acc;
    }
    out
}

/// Difference `a - b` of extended reals in which equal infinities cancel.
#[inline]
pub fn ext_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

/// Index of the point of a sorted slice closest to `x`.
pub fn nearest_index(xs: &[f64], x: f64) -> usize {
    match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) if i >= xs.len() => xs.len() - 1,
        Err(i) => {
            if (x - xs[i - 1]) <= (xs[i] - x) {
                i - 1
            } else {
                i
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logaddexp_handles_infinities() {
        assert_eq!(logaddexp(NEG_INF, NEG_INF), NEG_INF);
        assert_eq!(logaddexp(NEG_INF, 1.5), 1.5);
        assert!((logaddexp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((logaddexp(1000.0, 1000.0) - 1000.0 - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cumtrapz_of_constant_is_length() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let g = vec![0.0; 11];
        let out = log_cumtrapz(&xs, &g);
        assert_eq!(out[0], NEG_INF);
        for i in 1..11 {
            assert!((out[i].exp() - xs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_index_picks_closest() {
        let xs = [0.0, 1.0, 2.0];
        assert_eq!(nearest_index(&xs, -3.0), 0);
        assert_eq!(nearest_index(&xs, 0.6), 1);
        assert_eq!(nearest_index(&xs, 1.4), 1);
        assert_eq!(nearest_index(&xs, 9.0), 2);
    }
}
