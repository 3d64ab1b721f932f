//! Digamma and its first two derivatives.
//!
//! Arguments are shifted above [`SHIFT`] with the recurrences
//! `psi(z) = psi(z + 1) - 1/z`, `psi'(z) = psi'(z + 1) + 1/z^2`,
//! `psi''(z) = psi''(z + 1) - 2/z^3`, then evaluated by their asymptotic
//! series in Bernoulli numbers.

use crate::{Error, Result};

const SHIFT: f64 = 10.0;

fn check(z: f64) -> Result<()> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Parameter(format!("argument must be positive and finite, got {z}")));
    }
    Ok(())
}

/// `Psi(z) = Gamma'(z) / Gamma(z)` for `z > 0`.
pub fn digamma(z: f64) -> Result<f64> {
    check(z)?;
    let mut z = z;
    let mut acc = 0.0;
    while z < SHIFT {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let r = 1.0 / (z * z);
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r * (1.0 / 132.0 - r * (691.0 / 32760.0 - r / 12.0))))));
    Ok(acc + z.ln() - 0.5 / z - series)
}

/// `Psi'(z)` for `z > 0`.
pub fn trigamma(z: f64) -> Result<f64> {
    check(z)?;
    let mut z = z;
    let mut acc = 0.0;
    while z < SHIFT {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let r = 1.0 / (z * z);
    let series = r
        * (1.0 / 6.0
            - r * (1.0 / 30.0
                - r * (1.0 / 42.0 - r * (1.0 / 30.0 - r * (5.0 / 66.0 - r * (691.0 / 2730.0 - r * 7.0 / 6.0))))));
    Ok(acc + 1.0 / z + 0.5 * r + series / z)
}

/// `Psi''(z)` for `z > 0`.
pub fn tetragamma(z: f64) -> Result<f64> {
    check(z)?;
    let mut z = z;
    let mut acc = 0.0;
    while z < SHIFT {
        acc -= 2.0 / (z * z * z);
        z += 1.0;
    }
    let r = 1.0 / (z * z);
    let series = r
        * (0.5
            - r * (1.0 / 6.0
                - r * (1.0 / 6.0 - r * (3.0 / 10.0 - r * (5.0 / 6.0 - r * (691.0 / 210.0 - r * 35.0 / 2.0))))));
    Ok(acc - r - r / z - series * r)
}

/// The `theta > 0` with `Psi'(theta) = kappa`, by Newton's method safeguarded
/// with bisection. `Psi'` decreases strictly from `+inf` to 0 on `(0, inf)`.
pub fn invert_trigamma(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Parameter(format!("kappa must be positive and finite, got {kappa}")));
    }
    // Psi'(t) lies between 1/t + 1/(2t^2) and 1/t + 1/t^2, which brackets the root.
    let mut lo = 1.0 / kappa;
    let mut hi = (1.0 + (1.0 + 4.0 * kappa).sqrt()) / (2.0 * kappa);
    lo = lo.min(hi) * 0.5;
    hi *= 2.0;
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = trigamma(t)? - kappa;
        if g > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let step = g / tetragamma(t)?;
        let mut next = t - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.max(1.0) {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}
