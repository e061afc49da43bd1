//! Diagonal Padé approximants of a pure delay.

use super::poly::Polynomial;
use super::rational::RationalFn;
use super::TfError;

/// Order-`order` diagonal Padé approximant of `e^{-θs}`.
pub fn pade_approx(delay_seconds: f64, order: usize) -> Result<RationalFn, TfError> {
    if delay_seconds < 0.0 || !delay_seconds.is_finite() {
        return Err(TfError::NegativeDelay);
    }
    if order == 0 {
        return Err(TfError::InvalidOrder);
    }
    if delay_seconds == 0.0 {
        return Ok(RationalFn::one());
    }
    // c_k = (2N-k)! N! / ((2N)! k! (N-k)!), built by the ratio c_{k+1}/c_k
    let n = order;
    let mut c = vec![1.0f64; n + 1];
    for k in 0..n {
        c[k + 1] = c[k] * (n - k) as f64 / ((2 * n - k) as f64 * (k + 1) as f64);
    }
    let mut num = Vec::with_capacity(n + 1);
    let mut den = Vec::with_capacity(n + 1);
    let mut p = 1.0;
    for (k, &ck) in c.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        num.push(sign * ck * p);
        den.push(ck * p);
        p *= delay_seconds;
    }
    RationalFn::new_unreduced(Polynomial::new(num), Polynomial::new(den))
}
