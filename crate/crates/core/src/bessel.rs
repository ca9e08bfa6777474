//! Bessel functions of the first kind for integer orders.
//!
//! The dihedral profile formulas need J_n(kr) for orders up to |mN + 1|
//! (21 for the bundled square pattern), evaluated across whole grids. Two
//! regimes keep the evaluation dependency-free:
//!
//! * ascending power series for `x <= 8`, where the alternating terms lose
//!   at most ~e^8 in cancellation and stay well inside f64 headroom;
//! * Miller's downward recurrence with normalisation otherwise, started far
//!   enough above max(n, x) that the contaminating dominant solution has
//!   decayed below machine precision.

use crate::error::{Error, Result};

/// Highest supported order.
pub const MAX_ORDER: usize = 64;

const SERIES_CUTOFF: f64 = 8.0;
const RENORM_LIMIT: f64 = 1e250;

/// J_n(x) for integer order `0 <= n <= MAX_ORDER` and `x >= 0`.
///
/// Absolute error below 1e-12 for x <= 200.
pub fn bessel_j(n: usize, x: f64) -> Result<f64> {
    if n > MAX_ORDER {
        return Err(Error::BesselOrder(n));
    }
    if !(x >= 0.0) {
        return Err(Error::Invalid(format!("bessel_j requires x >= 0, got {x}")));
    }
    if x <= SERIES_CUTOFF {
        Ok(series(n, x))
    } else {
        Ok(miller_all(n, x)[n])
    }
}

/// All of J_0(x) .. J_{n_max}(x) in one pass.
pub fn bessel_j_upto(n_max: usize, x: f64) -> Result<Vec<f64>> {
    if n_max > MAX_ORDER {
        return Err(Error::BesselOrder(n_max));
    }
    if !(x >= 0.0) {
        return Err(Error::Invalid(format!("bessel_j requires x >= 0, got {x}")));
    }
    if x <= SERIES_CUTOFF {
        Ok((0..=n_max).map(|n| series(n, x)).collect())
    } else {
        Ok(miller_all(n_max, x))
    }
}

/// Ascending series sum_{s} (-1)^s (x/2)^{n+2s} / (s! (n+s)!).
fn series(n: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    // t_0 = (x/2)^n / n!
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = term;
    let h2 = half * half;
    let mut s = 0usize;
    while term.abs() > 1e-20 * sum.abs().max(1e-30) && s < 300 {
        term *= -h2 / ((s + 1) as f64 * (n + s + 1) as f64);
        sum += term;
        s += 1;
    }
    sum
}

/// Downward recurrence j_{k-1} = (2k/x) j_k - j_{k+1}, normalised through
/// J_0 + 2 sum_{k even} J_k = 1.
fn miller_all(n_max: usize, x: f64) -> Vec<f64> {
    let anchor = (n_max as f64).max(x.ceil());
    let start = anchor as usize + 12 * (x.cbrt().ceil() as usize).max(1) + 24;
    let mut js = vec![0.0; start + 2];
    js[start + 1] = 0.0;
    js[start] = 1e-30;
    let mut k = start;
    while k > 0 {
        js[k - 1] = (2.0 * k as f64 / x) * js[k] - js[k + 1];
        if js[k - 1].abs() > RENORM_LIMIT {
            for v in js[k - 1..].iter_mut() {
                *v *= 1.0 / RENORM_LIMIT;
            }
        }
        k -= 1;
    }
    let mut norm = js[0];
    let mut even = 2;
    while even <= start {
        norm += 2.0 * js[even];
        even += 2;
    }
    js.truncate(n_max + 1);
    for v in js.iter_mut() {
        *v /= norm;
    }
    js
}
