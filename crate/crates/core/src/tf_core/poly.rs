//! Real polynomials in `s` with ascending coefficient storage.

use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use twofloat::TwoFloat;

use super::linalg;

/// Relative threshold below which a coefficient produced by addition is
/// treated as an exact cancellation.
const ADD_CANCEL_TOL: f64 = 1e-11;

/// Polynomial `c[0] + c[1] s + ... + c[d] s^d`.
///
/// The zero polynomial has an empty coefficient vector; otherwise the
/// leading coefficient is nonzero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Polynomial { coeffs: vec![1.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `a s + b`.
    pub fn linear(a: f64, b: f64) -> Self {
        Polynomial::new(vec![b, a])
    }

    /// `s^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Polynomial { coeffs: c }
    }

    /// Monic polynomial with the given roots. Complex roots must come in
    /// conjugate pairs; imaginary residue of the expansion is discarded.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (i, &a) in acc.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * r;
            }
            acc = next;
        }
        Polynomial::new(acc.into_iter().map(|c| c.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Degree with the convention `deg 0 = -1`.
    pub fn degree_i(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Coefficient of `s^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn norm2(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_c(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    /// Value at `s = jω` in double-double arithmetic, for residual checks
    /// where the f64 evaluation error would swamp the quantity measured.
    pub fn eval_jw_dd(&self, w: f64) -> Complex<TwoFloat> {
        let x = Complex::new(TwoFloat::from(0.0), TwoFloat::from(w));
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(TwoFloat::from(0.0), TwoFloat::from(0.0)), |acc, &c| {
                acc * x + Complex::new(TwoFloat::from(c), TwoFloat::from(0.0))
            })
    }

    pub fn scale(&self, k: f64) -> Self {
        if k == 0.0 {
            return Polynomial::zero();
        }
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    /// Divide by the leading coefficient.
    pub fn monic(&self) -> Self {
        let l = self.leading();
        if l == 0.0 {
            return self.clone();
        }
        self.scale(1.0 / l)
    }

    /// Addition with cancellation detection: a coefficient whose magnitude is
    /// tiny relative to its two contributions is set to exactly zero.
    pub fn add(&self, other: &Polynomial) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let a = self.coeff(k);
            let b = other.coeff(k);
            let c = a + b;
            if c.abs() <= ADD_CANCEL_TOL * (a.abs() + b.abs()) {
                out.push(0.0);
            } else {
                out.push(c);
            }
        }
        Polynomial::new(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Self {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut acc = Polynomial::one();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// Substitute `s -> rho * s`.
    pub fn scale_var(&self, rho: f64) -> Self {
        let mut p = 1.0;
        let mut out = Vec::with_capacity(self.coeffs.len());
        for &c in &self.coeffs {
            out.push(c * p);
            p *= rho;
        }
        Polynomial::new(out)
    }

    /// Euclidean division `self = q * d + r` with `deg r < deg d`.
    pub fn divrem(&self, d: &Polynomial) -> (Polynomial, Polynomial) {
        let dd = d.degree().expect("division by the zero polynomial");
        let Some(nd) = self.degree() else {
            return (Polynomial::zero(), Polynomial::zero());
        };
        if nd < dd {
            return (Polynomial::zero(), self.clone());
        }
        let mut r = self.coeffs.clone();
        let mut q = vec![0.0; nd - dd + 1];
        let lead = d.leading();
        for k in (0..=nd - dd).rev() {
            let f = r[k + dd] / lead;
            q[k] = f;
            for (i, &dc) in d.coeffs.iter().enumerate() {
                r[k + i] -= f * dc;
            }
            r[k + dd] = 0.0;
        }
        r.truncate(dd);
        (Polynomial::new(q), Polynomial::new(r))
    }

    /// Number of exact zero coefficients at the low end (roots at the origin).
    pub fn origin_multiplicity(&self) -> usize {
        self.coeffs.iter().take_while(|&&c| c == 0.0).count()
    }

    /// All complex roots, computed as eigenvalues of a balanced companion
    /// matrix followed by Newton polishing. Exact roots at the origin are
    /// reported exactly.
    pub fn roots(&self) -> Vec<Complex64> {
        let Some(n) = self.degree() else {
            return Vec::new();
        };
        let z = self.origin_multiplicity();
        let mut out = vec![Complex64::new(0.0, 0.0); z];
        let core = &self.coeffs[z..];
        let m = n - z;
        if m == 0 {
            return out;
        }
        if m == 1 {
            out.push(Complex64::new(-core[0] / core[1], 0.0));
            return out;
        }
        let lead = core[m];
        let mut comp = DMatrix::<f64>::zeros(m, m);
        for i in 1..m {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..m {
            comp[(i, m - 1)] = -core[i] / lead;
        }
        linalg::balance_in_place(&mut comp);
        let eig = comp.complex_eigenvalues();
        let reduced = Polynomial::new(core.to_vec());
        let dp = reduced.derivative();
        for r in eig.iter() {
            out.push(polish_root(&reduced, &dp, *r));
        }
        out
    }
}

fn polish_root(p: &Polynomial, dp: &Polynomial, mut r: Complex64) -> Complex64 {
    let mut f = p.eval_c(r).norm();
    for _ in 0..3 {
        let d = dp.eval_c(r);
        if d.norm() == 0.0 {
            break;
        }
        let cand = r - p.eval_c(r) / d;
        let fc = p.eval_c(cand).norm();
        if fc < f {
            r = cand;
            f = fc;
        } else {
            break;
        }
    }
    if r.im.abs() <= 1e-12 * r.norm().max(1.0) {
        r.im = 0.0;
    }
    r
}
