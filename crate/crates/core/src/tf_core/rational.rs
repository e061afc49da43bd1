//! Real-rational scalar transfer functions in reduced, monic-denominator form.

use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use twofloat::TwoFloat;

use super::poly::Polynomial;
use super::{TfError, DEGREE_CAP, EPS_STAB};

/// Relative singular-value threshold used to detect common roots of the
/// numerator and denominator.
pub const CANCEL_TOL: f64 = 1e-8;

/// A reduction is only accepted if it reproduces the original function to
/// this relative accuracy at the validation points.
const REDUCE_CHECK_TOL: f64 = 1e-10;

/// `num(s) / den(s)`, stored reduced with a monic denominator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalFn {
    num: Polynomial,
    den: Polynomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl RationalFn {
    /// Build and canonicalize `num / den`.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self, TfError> {
        let (num, den) = canonicalize(num, den)?;
        Ok(RationalFn { num, den })
    }

    /// Build from ascending coefficient slices.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self, TfError> {
        RationalFn::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    /// Store without any common-factor cancellation (denominator made monic).
    /// Used where the caller knows the pair is already coprime.
    pub fn new_unreduced(num: Polynomial, den: Polynomial) -> Result<Self, TfError> {
        if den.is_zero() {
            return Err(TfError::ZeroDenominator);
        }
        if num.is_zero() {
            return Ok(RationalFn::zero());
        }
        let l = den.leading();
        let r = RationalFn {
            num: num.scale(1.0 / l),
            den: den.scale(1.0 / l),
        };
        r.check_cap()?;
        Ok(r)
    }

    pub fn zero() -> Self {
        RationalFn {
            num: Polynomial::zero(),
            den: Polynomial::one(),
        }
    }

    pub fn one() -> Self {
        RationalFn::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        RationalFn {
            num: Polynomial::constant(c),
            den: Polynomial::one(),
        }
    }

    /// The Laplace variable `s`.
    pub fn s() -> Self {
        RationalFn {
            num: Polynomial::monomial(1),
            den: Polynomial::one(),
        }
    }

    /// `1 / (a s + b)`.
    pub fn first_order_lag(a: f64, b: f64) -> Result<Self, TfError> {
        RationalFn::new(Polynomial::one(), Polynomial::linear(a, b))
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `deg den − deg num`; `i64::MAX` for the zero function.
    pub fn relative_degree(&self) -> i64 {
        if self.num.is_zero() {
            return i64::MAX;
        }
        self.den.degree_i() - self.num.degree_i()
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.relative_degree() >= 1
    }

    pub fn is_biproper(&self) -> bool {
        self.relative_degree() == 0
    }

    /// Value at infinity for proper functions.
    pub fn feedthrough(&self) -> f64 {
        if self.relative_degree() == 0 {
            self.num.leading() / self.den.leading()
        } else {
            0.0
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        if self.num.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.num.eval_c(s) / self.den.eval_c(s)
    }

    /// Frequency response at `s = jω`.
    pub fn eval_jw(&self, w: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, w))
    }

    pub fn eval_jw_dd(&self, w: f64) -> Complex<TwoFloat> {
        if self.num.is_zero() {
            return Complex::new(TwoFloat::from(0.0), TwoFloat::from(0.0));
        }
        self.num.eval_jw_dd(w) / self.den.eval_jw_dd(w)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        self.num.roots()
    }

    /// All poles with real part `< −EPS_STAB`.
    pub fn is_stable(&self) -> bool {
        self.is_stable_with(EPS_STAB)
    }

    pub fn is_stable_with(&self, eps: f64) -> bool {
        if self.num.is_zero() {
            return true;
        }
        self.poles().iter().all(|p| p.re < -eps)
    }

    /// Proper, stable, biproper, with strictly stable zeros.
    pub fn is_unimodular(&self) -> bool {
        !self.is_zero()
            && self.is_biproper()
            && self.is_stable()
            && self.zeros().iter().all(|z| z.re < -EPS_STAB)
    }

    fn check_cap(&self) -> Result<(), TfError> {
        let d = self.num.degree_i().max(self.den.degree_i());
        if d > DEGREE_CAP as i64 {
            return Err(TfError::DegreeOverflow { degree: d as usize });
        }
        Ok(())
    }

    pub fn arith(&self, other: &RationalFn, op: ArithOp) -> Result<RationalFn, TfError> {
        match op {
            ArithOp::Add => self.add(other),
            ArithOp::Sub => self.sub(other),
            ArithOp::Mul => self.mul(other),
            ArithOp::Div => self.div(other),
        }
    }

    pub fn add(&self, other: &RationalFn) -> Result<RationalFn, TfError> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.den == other.den {
            return RationalFn::new(self.num.add(&other.num), self.den.clone());
        }
        let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
        RationalFn::new(num, self.den.mul(&other.den))
    }

    pub fn sub(&self, other: &RationalFn) -> Result<RationalFn, TfError> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &RationalFn) -> Result<RationalFn, TfError> {
        if self.is_zero() || other.is_zero() {
            return Ok(RationalFn::zero());
        }
        RationalFn::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn div(&self, other: &RationalFn) -> Result<RationalFn, TfError> {
        self.mul(&other.inv()?)
    }

    pub fn inv(&self) -> Result<RationalFn, TfError> {
        if self.is_zero() {
            return Err(TfError::DivisionByZeroFn);
        }
        RationalFn::new(self.den.clone(), self.num.clone())
    }

    pub fn neg(&self) -> RationalFn {
        RationalFn {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn scale(&self, k: f64) -> RationalFn {
        if k == 0.0 {
            return RationalFn::zero();
        }
        RationalFn {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    /// Integer power; negative powers invert.
    pub fn powi(&self, k: i32) -> Result<RationalFn, TfError> {
        if k < 0 {
            return self.inv()?.powi(-k);
        }
        let mut acc = RationalFn::one();
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Product of a list of factors.
    pub fn product(factors: &[&RationalFn]) -> Result<RationalFn, TfError> {
        let mut acc = RationalFn::one();
        for f in factors {
            acc = acc.mul(f)?;
        }
        Ok(acc)
    }

    /// Re-run the canonicalization (idempotent on canonical input).
    pub fn canon(&self) -> Result<RationalFn, TfError> {
        RationalFn::new(self.num.clone(), self.den.clone())
    }

    /// Maximum relative deviation between two functions over `s = jω`.
    pub fn max_rel_diff(&self, other: &RationalFn, freqs: &[f64]) -> f64 {
        freqs
            .iter()
            .map(|&w| {
                let a = self.eval_jw(w);
                let b = other.eval_jw(w);
                (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
            })
            .fold(0.0, f64::max)
    }
}

impl std::fmt::Display for RationalFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}) / ({})", fmt_poly(&self.num), fmt_poly(&self.den))
    }
}

fn fmt_poly(p: &Polynomial) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut parts = Vec::new();
    for (k, &c) in p.coeffs().iter().enumerate().rev() {
        if c == 0.0 {
            continue;
        }
        parts.push(match k {
            0 => format!("{c}"),
            1 => format!("{c} s"),
            _ => format!("{c} s^{k}"),
        });
    }
    parts.join(" + ")
}

fn canonicalize(num: Polynomial, den: Polynomial) -> Result<(Polynomial, Polynomial), TfError> {
    if den.is_zero() {
        return Err(TfError::ZeroDenominator);
    }
    if num.is_zero() {
        return Ok((Polynomial::zero(), Polynomial::one()));
    }
    // exact roots at the origin
    let k = num.origin_multiplicity().min(den.origin_multiplicity());
    let (mut num, mut den) = if k > 0 {
        (
            Polynomial::new(num.coeffs()[k..].to_vec()),
            Polynomial::new(den.coeffs()[k..].to_vec()),
        )
    } else {
        (num, den)
    };
    if num.degree_i() >= 1 && den.degree_i() >= 1 {
        if let Some((n2, d2)) = reduce_common_factor(&num, &den) {
            num = n2;
            den = d2;
        }
    }
    let l = den.leading();
    let num = num.scale(1.0 / l);
    let den = den.scale(1.0 / l);
    let d = num.degree_i().max(den.degree_i());
    if d > DEGREE_CAP as i64 {
        return Err(TfError::DegreeOverflow { degree: d as usize });
    }
    Ok((num, den))
}

/// Frequency scale that balances the coefficient magnitudes of `p`.
fn root_scale(p: &Polynomial) -> Option<f64> {
    let n = p.degree()?;
    let z = p.origin_multiplicity();
    if n <= z {
        return None;
    }
    let lo = p.coeff(z).abs();
    let hi = p.leading().abs();
    Some((lo / hi).powf(1.0 / (n - z) as f64))
}

/// Sylvester-type matrix whose null vectors `[v; u]` satisfy `p v − q u = 0`
/// with `deg v = deg q − k`, `deg u = deg p − k`.
fn subresultant_matrix(p: &Polynomial, q: &Polynomial, k: usize) -> DMatrix<f64> {
    let m = p.degree().unwrap();
    let n = q.degree().unwrap();
    let nv = n - k + 1;
    let nu = m - k + 1;
    let rows = m + n - k + 1;
    let mut s = DMatrix::<f64>::zeros(rows, nv + nu);
    for j in 0..nv {
        for (i, &c) in p.coeffs().iter().enumerate() {
            s[(i + j, j)] = c;
        }
    }
    for j in 0..nu {
        for (i, &c) in q.coeffs().iter().enumerate() {
            s[(i + j, nv + j)] = -c;
        }
    }
    s
}

fn reduce_common_factor(p: &Polynomial, q: &Polynomial) -> Option<(Polynomial, Polynomial)> {
    let rho = match (root_scale(p), root_scale(q)) {
        (Some(a), Some(b)) => (a * b).sqrt(),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => 1.0,
    }
    .clamp(1e-6, 1e6);
    let ps = p.scale_var(rho);
    let ps = ps.scale(1.0 / ps.norm2());
    let qs = q.scale_var(rho);
    let qs = qs.scale(1.0 / qs.norm2());
    let m = ps.degree().unwrap();
    let n = qs.degree().unwrap();

    let s1 = subresultant_matrix(&ps, &qs, 1);
    let sv = s1.singular_values();
    let smax = sv.max();
    let g = sv.iter().filter(|&&x| x < CANCEL_TOL * smax).count();
    if g == 0 {
        return None;
    }
    let checks: Vec<Complex64> = [-1.5f64, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5]
        .iter()
        .map(|e| Complex64::new(0.0, rho * 10f64.powf(*e)))
        .collect();
    let reference: Vec<Complex64> = checks.iter().map(|&s| p.eval_c(s) / q.eval_c(s)).collect();

    let mut q_roots: Option<Vec<Complex64>> = None;
    for k in (1..=g.min(m).min(n)).rev() {
        let sk = subresultant_matrix(&ps, &qs, k);
        let svd = sk.svd(false, true);
        let vt = svd.v_t.as_ref()?;
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
        let row = vt.row(imin);
        let nv = n - k + 1;
        let v: Vec<f64> = (0..nv).map(|i| row[i]).collect();
        let u: Vec<f64> = (0..m - k + 1).map(|i| row[nv + i]).collect();
        let v = Polynomial::new(v).scale_var(1.0 / rho);
        let u = Polynomial::new(u).scale_var(1.0 / rho);
        if v.is_zero() || u.is_zero() || v.degree() != Some(n - k) {
            continue;
        }
        // reduced function is u / v up to a gain fitted at the check points
        let cand: Vec<Complex64> = checks.iter().map(|&s| u.eval_c(s) / v.eval_c(s)).collect();
        let mut numc = Complex64::new(0.0, 0.0);
        let mut denc = 0.0;
        for (c, r) in cand.iter().zip(&reference) {
            numc += c.conj() * r;
            denc += c.norm_sqr();
        }
        if denc == 0.0 || !denc.is_finite() {
            continue;
        }
        let gain = numc.re / denc;
        let ok = cand.iter().zip(&reference).all(|(c, r)| {
            (c * gain - r).norm() <= REDUCE_CHECK_TOL * r.norm().max(1e-300)
        });
        // matching on the axis is not enough: a near-cancelling pole/zero
        // pair off the axis would pass, so each new pole must be an old one
        if ok && poles_are_inherited(&v, q_roots.get_or_insert_with(|| q.roots())) {
            return Some((u.scale(gain), v));
        }
    }
    None
}

fn poles_are_inherited(v: &Polynomial, old: &[Complex64]) -> bool {
    v.roots().iter().all(|r| {
        old.iter().map(|o| (r - o).norm()).fold(f64::INFINITY, f64::min) <= 0.1 * r.norm().max(1.0)
    })
}
