//! Doubly coprime factorizations: pole-placement construction for the scalar
//! base plant and the structured platoon factors built from it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platoon_model::{Headway, PlatoonConfig};
use crate::tf_core::freq::check_grid;
use crate::tf_core::{Polynomial, RationalFn, Structure, TfError, TfMatrix};
use num_complex::Complex;
use twofloat::TwoFloat;

/// Acceptance bar for Bezout residuals on the check grid.
pub const BEZOUT_TOL: f64 = 1e-8;

/// Scalar factorization `g = N/M`, `Y M + X N = 1`. Left and right factors
/// coincide for a scalar plant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarDcf {
    pub g_wp: RationalFn,
    pub alpha: f64,
    pub m: RationalFn,
    pub n: RationalFn,
    pub x: RationalFn,
    pub y: RationalFn,
}

/// Solve `y·den + x·num = (s+α)^{2n-1}` for `deg y = deg x = n-1` and
/// return `M = den/(s+α)^n`, `N = num/(s+α)^n`, `X = x/(s+α)^{n-1}`,
/// `Y = y/(s+α)^{n-1}`.
pub fn scalar_dcf(g_wp: &RationalFn, alpha: f64) -> Result<ScalarDcf> {
    let dcf = scalar_dcf_unchecked(g_wp, alpha)?;
    let r = verify_bezout(&dcf);
    if r > BEZOUT_TOL {
        return Err(Error::BezoutViolation(r));
    }
    Ok(dcf)
}

/// `scalar_dcf` without the final residual check.
pub fn scalar_dcf_unchecked(g_wp: &RationalFn, alpha: f64) -> Result<ScalarDcf> {
    if !g_wp.is_strictly_proper() {
        return Err(TfError::NotStrictlyProper.into());
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("factorization pole α must be positive, got {alpha}")));
    }
    let den = g_wp.den().clone();
    let num = g_wp.num().clone();
    let n = den.degree().unwrap_or(0);
    let (yp, xp) = solve_diophantine(&den, &num, alpha)?;
    let lag = Polynomial::linear(1.0, alpha);
    let pn = lag.powi(n as u32);
    let pn1 = lag.powi(n as u32 - 1);
    let dcf = ScalarDcf {
        g_wp: g_wp.clone(),
        alpha,
        m: RationalFn::new(den, pn.clone())?,
        n: RationalFn::new(num, pn)?,
        x: RationalFn::new(xp, pn1.clone())?,
        y: RationalFn::new(yp, pn1)?,
    };
    Ok(dcf)
}

/// Coefficients of `y`, `x` from the Sylvester system, solved with column
/// equilibration and iterative refinement. The refinement residual is formed
/// in double-double: for plants with fast poles the solution has large
/// coefficients whose products cancel, and an f64 residual cannot see the
/// error it is meant to remove.
fn solve_diophantine(den: &Polynomial, num: &Polynomial, alpha: f64) -> Result<(Polynomial, Polynomial)> {
    let n = den.degree().unwrap_or(0);
    if n == 0 {
        return Err(Error::DegenerateCancellation);
    }
    let target = Polynomial::linear(1.0, alpha).powi(2 * n as u32 - 1);
    let dim = 2 * n;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        for k in 0..=n {
            a[(i + k, i)] += den.coeff(k);
            a[(i + k, n + i)] += num.coeff(k);
        }
    }
    let scale: Vec<f64> = (0..dim).map(|j| a.column(j).amax().max(1e-300)).collect();
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-14 * smax {
        return Err(Error::DegenerateCancellation);
    }
    // residual of target − y·den − x·num, coefficientwise in double-double
    let residual = |y: &[f64], x: &[f64]| -> DVector<f64> {
        DVector::from_iterator(
            dim,
            (0..dim).map(|k| {
                let mut acc = TwoFloat::from(target.coeff(k));
                for i in 0..n {
                    if k >= i && k - i <= n {
                        acc -= TwoFloat::new_mul(y[i], den.coeff(k - i));
                        acc -= TwoFloat::new_mul(x[i], num.coeff(k - i));
                    }
                }
                f64::from(acc)
            }),
        )
    };
    let mut y = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut last = f64::INFINITY;
    for _ in 0..6 {
        let r = residual(&y, &x);
        let rn = r.amax();
        if rn == 0.0 || rn >= last {
            break;
        }
        last = rn;
        let d = svd.solve(&r, 0.0).map_err(|e| Error::Optimizer(e.to_string()))?;
        for i in 0..n {
            y[i] += d[i] / scale[i];
            x[i] += d[n + i] / scale[n + i];
        }
    }
    Ok((Polynomial::new(y), Polynomial::new(x)))
}

/// The eight structured factors of the platoon plant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlatoonDcf {
    pub scalar: ScalarDcf,
    pub headway: Headway,
    /// `Φ_0..Φ_n`.
    pub phis: Vec<RationalFn>,
    pub m: TfMatrix,
    pub n: TfMatrix,
    pub m_t: TfMatrix,
    pub n_t: TfMatrix,
    pub x: TfMatrix,
    pub y: TfMatrix,
    pub x_t: TfMatrix,
    pub y_t: TfMatrix,
}

impl PlatoonDcf {
    pub fn size(&self) -> usize {
        self.m.rows()
    }

    /// `Φ_k`, `k = 0..=n`.
    pub fn phi(&self, k: usize) -> &RationalFn {
        &self.phis[k]
    }

    pub fn is_homogeneous(&self) -> bool {
        let g = check_grid();
        self.phis[1..].iter().all(|p| p.max_rel_diff(&RationalFn::one(), &g) < 1e-12)
    }
}

pub fn platoon_dcf(cfg: &PlatoonConfig, scalar: &ScalarDcf) -> Result<PlatoonDcf> {
    let dcf = platoon_dcf_unchecked(cfg, scalar)?;
    let r = verify_bezout(&dcf);
    if r > BEZOUT_TOL {
        return Err(Error::BezoutViolation(r));
    }
    Ok(dcf)
}

/// `platoon_dcf` without the final residual check.
pub fn platoon_dcf_unchecked(cfg: &PlatoonConfig, scalar: &ScalarDcf) -> Result<PlatoonDcf> {
    cfg.validate()?;
    if scalar.g_wp.max_rel_diff(&cfg.base_plant_g_wp, &check_grid()) > 1e-10 {
        return Err(Error::InvalidParameter("scalar factorization is for a different base plant".into()));
    }
    let n = cfg.n;
    let hw = cfg.headway;
    let h = hw.tf();
    let hinv = hw.pow(-1);
    let phis: Vec<RationalFn> = (0..=n).map(|k| cfg.phi(k)).collect();
    let phi = |k: usize| &phis[k + 1];
    let phi_inv: Vec<RationalFn> = (0..n).map(|k| phi(k).inv()).collect::<std::result::Result<_, _>>()?;
    let s = scalar;
    let diag = |f: &RationalFn| TfMatrix::diag(&vec![f.clone(); n]);
    let nt_h = s.n.mul(&h)?;
    let y_hinv = s.y.mul(&hinv)?;
    let n_t = TfMatrix::from_fn(n, n, |i, j| {
        if i == j {
            nt_h.mul(phi(j))
        } else if i == j + 1 {
            Ok(s.n.mul(phi(j))?.neg())
        } else {
            Ok(RationalFn::zero())
        }
    })?
    .with_structure(Structure::LowerBidiagonal)?;
    let y = TfMatrix::from_fn(n, n, |i, j| {
        if i == j {
            s.y.mul(phi(j))
        } else if i == j + 1 {
            Ok(y_hinv.mul(phi(j))?.neg())
        } else {
            Ok(RationalFn::zero())
        }
    })?
    .with_structure(Structure::LowerBidiagonal)?;
    let x_t = TfMatrix::from_fn(n, n, |i, j| {
        if i >= j {
            RationalFn::product(&[&phi_inv[i], &hw.pow(-((i - j + 1) as i32)), &s.x])
        } else {
            Ok(RationalFn::zero())
        }
    })?
    .with_structure(Structure::LowerTriangular)?;
    let m = TfMatrix::from_fn(n, n, |i, j| {
        if i >= j {
            RationalFn::product(&[&phi_inv[i], &hw.pow(-((i - j) as i32)), &s.m])
        } else {
            Ok(RationalFn::zero())
        }
    })?
    .with_structure(Structure::LowerTriangular)?;
    let dcf = PlatoonDcf {
        scalar: s.clone(),
        headway: hw,
        phis,
        m,
        n: diag(&s.n.mul(&h)?),
        m_t: diag(&s.m),
        n_t,
        x: diag(&s.x.mul(&hinv)?),
        y,
        x_t,
        y_t: diag(&s.y),
    };
    Ok(dcf)
}

/// Anything whose Bezout identity can be checked on a frequency grid.
pub trait Bezout {
    /// Largest entrywise deviation of the Bezout product from the identity.
    fn bezout_residual(&self, freqs: &[f64]) -> f64;
}

type Cdd = Complex<TwoFloat>;

fn dd_zero() -> Cdd {
    Complex::new(TwoFloat::from(0.0), TwoFloat::from(0.0))
}

fn dd_norm(z: Cdd) -> f64 {
    f64::from(z.re).hypot(f64::from(z.im))
}

// Residuals are evaluated in double-double. The identity is a cancellation
// between terms that can be many orders larger than one when α is slow
// relative to the plant, so f64 evaluation would report its own rounding.
impl Bezout for ScalarDcf {
    fn bezout_residual(&self, freqs: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        let one = Complex::new(TwoFloat::from(1.0), TwoFloat::from(0.0));
        for &w in freqs {
            let (m, n, x, y) = (self.m.eval_jw_dd(w), self.n.eval_jw_dd(w), self.x.eval_jw_dd(w), self.y.eval_jw_dd(w));
            worst = worst.max(dd_norm(y * m + x * n - one));
        }
        worst
    }
}

fn eval_block(f: &TfMatrix, w: f64, sign: f64, out: &mut [Vec<Cdd>], r0: usize, c0: usize) {
    let sg = Complex::new(TwoFloat::from(sign), TwoFloat::from(0.0));
    for i in 0..f.rows() {
        for j in 0..f.cols() {
            let e = f.get(i, j);
            out[r0 + i][c0 + j] = if e.is_zero() { dd_zero() } else { e.eval_jw_dd(w) * sg };
        }
    }
}

impl Bezout for PlatoonDcf {
    fn bezout_residual(&self, freqs: &[f64]) -> f64 {
        let n = self.size();
        let d = 2 * n;
        let mut worst: f64 = 0.0;
        for &w in freqs {
            let mut l = vec![vec![dd_zero(); d]; d];
            let mut r = vec![vec![dd_zero(); d]; d];
            eval_block(&self.n_t, w, -1.0, &mut l, 0, 0);
            eval_block(&self.m_t, w, 1.0, &mut l, 0, n);
            eval_block(&self.y, w, 1.0, &mut l, n, 0);
            eval_block(&self.x, w, 1.0, &mut l, n, n);
            eval_block(&self.x_t, w, -1.0, &mut r, 0, 0);
            eval_block(&self.m, w, 1.0, &mut r, 0, n);
            eval_block(&self.y_t, w, 1.0, &mut r, n, 0);
            eval_block(&self.n, w, 1.0, &mut r, n, n);
            for i in 0..d {
                for j in 0..d {
                    let mut acc = dd_zero();
                    for k in 0..d {
                        acc += l[i][k] * r[k][j];
                    }
                    if i == j {
                        acc.re -= TwoFloat::from(1.0);
                    }
                    worst = worst.max(dd_norm(acc));
                }
            }
        }
        worst
    }
}

/// Bezout residual over the 50-point check grid `[1e-3, 1e3]`.
pub fn verify_bezout<D: Bezout>(dcf: &D) -> f64 {
    dcf.bezout_residual(&check_grid())
}

/// Factorization shifted by a stable `Q`: `X + Q M̃`, `X̃ + M Q`,
/// `Y − Q Ñ`, `Ỹ − N Q`.
pub fn shift_dcf(dcf: &PlatoonDcf, q: &TfMatrix) -> Result<PlatoonDcf> {
    if !q.is_stable() {
        return Err(Error::UnstableParameter);
    }
    let mut out = dcf.clone();
    out.x = dcf.x.add(&q.mul(&dcf.m_t)?)?;
    out.x_t = dcf.x_t.add(&dcf.m.mul(q)?)?;
    out.y = dcf.y.sub(&q.mul(&dcf.n_t)?)?;
    out.y_t = dcf.y_t.sub(&dcf.n.mul(q)?)?;
    Ok(out)
}
