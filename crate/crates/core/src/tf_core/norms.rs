//! H2 and H∞ system norms.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::freq::logspace;
use super::linalg;
use super::matrix::TfMatrix;
use super::rational::RationalFn;
use super::statespace::StateSpace;
use super::TfError;

/// Relative stopping tolerance of the level-set iteration.
const HINF_REL_TOL: f64 = 5e-7;
/// Absolute tolerance on γ.
pub const HINF_ABS_TOL: f64 = 1e-6;

fn check_h2(f: &RationalFn) -> Result<(), TfError> {
    if f.is_zero() {
        return Ok(());
    }
    if !f.is_strictly_proper() {
        return Err(TfError::NotStrictlyProper);
    }
    if !f.is_stable() {
        return Err(TfError::UnstableSystem);
    }
    Ok(())
}

/// H2 norm of a stable, strictly proper scalar via the observability Gramian.
pub fn h2_norm(f: &RationalFn) -> Result<f64, TfError> {
    Ok(h2_norm_sq(f)?.sqrt())
}

pub fn h2_norm_sq(f: &RationalFn) -> Result<f64, TfError> {
    check_h2(f)?;
    if f.is_zero() {
        return Ok(0.0);
    }
    let ss = StateSpace::from_rational(f)?;
    h2_norm_sq_ss(&ss)
}

pub fn h2_norm_sq_ss(ss: &StateSpace) -> Result<f64, TfError> {
    if ss.d.iter().any(|&x| x != 0.0) {
        return Err(TfError::NotStrictlyProper);
    }
    if ss.order() == 0 {
        return Ok(0.0);
    }
    if !ss.is_stable() {
        return Err(TfError::UnstableSystem);
    }
    let ctc = ss.c.transpose() * &ss.c;
    let wo = linalg::lyapunov(&ss.a.transpose(), &ctc);
    Ok((ss.b.transpose() * wo * &ss.b).trace().max(0.0))
}

/// Matrix H2 norm: square root of the sum of squared entry norms.
pub fn h2_norm_tfm(m: &TfMatrix) -> Result<f64, TfError> {
    let mut acc = 0.0;
    for e in m.entries() {
        acc += h2_norm_sq(e)?;
    }
    Ok(acc.sqrt())
}

/// H2 inner product `(1/2π) ∫ f(jω) conj(g(jω)) dω` of two stable, strictly
/// proper scalars, by a Sylvester equation on their realizations.
pub fn h2_inner(f: &RationalFn, g: &RationalFn) -> Result<f64, TfError> {
    check_h2(f)?;
    check_h2(g)?;
    if f.is_zero() || g.is_zero() {
        return Ok(0.0);
    }
    let sf = StateSpace::from_rational(f)?;
    let sg = StateSpace::from_rational(g)?;
    // Aᶠᵀ Y + Y Aᵍ + Cᶠᵀ Cᵍ = 0,  <f,g> = Bᶠᵀ Y Bᵍ
    let rhs = -(sf.c.transpose() * &sg.c);
    let y = linalg::solve_sylvester(&sf.a.transpose(), &sg.a, &rhs);
    Ok((sf.b.transpose() * y * &sg.b)[(0, 0)])
}

/// Largest singular value of a complex matrix.
pub fn sigma_max(m: &DMatrix<Complex64>) -> f64 {
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    m.clone().singular_values().max()
}

/// Frequencies at which a grid search for the peak gain should look.
fn peak_search_grid(poles: &[Complex64], n: usize) -> Vec<f64> {
    let mut lo: f64 = 1e-3;
    let mut hi: f64 = 1e3;
    let mut extra = vec![0.0];
    for p in poles {
        let m = p.norm();
        if m > 0.0 {
            lo = lo.min(m * 1e-2);
            hi = hi.max(m * 1e2);
            extra.push(m);
        }
        if p.im.abs() > 0.0 {
            extra.push(p.im.abs());
        }
    }
    let mut g = logspace(lo.log10(), hi.log10(), n);
    g.extend(extra);
    g
}

/// Peak of `σ_max` over a frequency list, with the maximizing frequency.
pub fn grid_peak<F: Fn(f64) -> DMatrix<Complex64>>(eval: F, freqs: &[f64]) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    for &w in freqs {
        let s = sigma_max(&eval(w));
        if s > best.0 || (s.is_nan() && !best.0.is_nan()) {
            best = (s, w);
        }
    }
    best
}

/// Hamiltonian-type matrix whose imaginary-axis eigenvalues mark the
/// frequencies where some singular value of `G(jω)` equals `γ`.
fn hamiltonian(ss: &StateSpace, gamma: f64) -> Option<DMatrix<f64>> {
    let n = ss.order();
    let (a, b, c, d) = (&ss.a, &ss.b, &ss.c, &ss.d);
    let g2 = gamma * gamma;
    let r = d.transpose() * d - DMatrix::identity(d.ncols(), d.ncols()) * g2;
    let s = d * d.transpose() - DMatrix::identity(d.nrows(), d.nrows()) * g2;
    let ri = r.try_inverse()?;
    let si = s.try_inverse()?;
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    let a11 = a - b * &ri * d.transpose() * c;
    let a12 = -(b * &ri * b.transpose()) * gamma;
    let a21 = (c.transpose() * &si * c) * gamma;
    let a22 = -a.transpose() + c.transpose() * d * &ri * b.transpose();
    h.view_mut((0, 0), (n, n)).copy_from(&a11);
    h.view_mut((0, n), (n, n)).copy_from(&a12);
    h.view_mut((n, 0), (n, n)).copy_from(&a21);
    h.view_mut((n, n), (n, n)).copy_from(&a22);
    Some(h)
}

/// Nonnegative imaginary parts of the (numerically) imaginary eigenvalues.
fn imaginary_axis_crossings(h: &DMatrix<f64>) -> Vec<f64> {
    let scale = h.norm().max(1.0);
    let mut out: Vec<f64> = h
        .complex_eigenvalues()
        .iter()
        .filter(|l| l.re.abs() <= 1e-7 * (scale.sqrt() + l.norm()))
        .map(|l| l.im.abs())
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * (1.0 + b.abs()));
    out
}

/// Outcome of an H∞ computation: the certified value, the dense-grid peak
/// it was initialized from, and the peak frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HinfReport {
    pub norm: f64,
    pub grid_peak: f64,
    pub peak_freq: f64,
    pub iterations: usize,
}

/// H∞ norm of a stable proper realization. The dense-grid peak gives a lower
/// bound; it is then raised by the level-set iteration (test γ slightly
/// above the bound, read off the imaginary-axis crossings, re-evaluate
/// between them) until the Hamiltonian test certifies no crossing.
pub fn hinf_norm_ss(ss: &StateSpace) -> Result<HinfReport, TfError> {
    if ss.order() > 0 && !ss.is_stable() {
        return Err(TfError::UnstableSystem);
    }
    let dpeak = sigma_max(&ss.d.map(|x| Complex64::new(x, 0.0)));
    if ss.order() == 0 {
        return Ok(HinfReport {
            norm: dpeak,
            grid_peak: dpeak,
            peak_freq: f64::INFINITY,
            iterations: 0,
        });
    }
    let grid = peak_search_grid(&ss.poles(), 400);
    let (gpeak, mut wpk) = grid_peak(|w| ss.eval_jw(w), &grid);
    let mut lb = gpeak.max(dpeak);
    if lb == dpeak && dpeak > gpeak {
        wpk = f64::INFINITY;
    }
    if lb == 0.0 {
        return Ok(HinfReport {
            norm: 0.0,
            grid_peak: 0.0,
            peak_freq: 0.0,
            iterations: 0,
        });
    }
    let mut iters = 0;
    loop {
        iters += 1;
        let gamma = lb * (1.0 + 2.0 * HINF_REL_TOL) + 0.5 * HINF_ABS_TOL.min(lb * 1e-3);
        let Some(h) = hamiltonian(ss, gamma) else {
            break;
        };
        let cross = imaginary_axis_crossings(&h);
        if cross.is_empty() || iters > 60 {
            break;
        }
        let mut cands = cross.clone();
        for win in cross.windows(2) {
            cands.push(0.5 * (win[0] + win[1]));
            cands.push((win[0] * win[1]).sqrt());
        }
        let (v, w) = grid_peak(|w| ss.eval_jw(w), &cands);
        if v <= lb * (1.0 + 1e-12) {
            break;
        }
        lb = v;
        wpk = w;
    }
    Ok(HinfReport {
        norm: lb,
        grid_peak: gpeak,
        peak_freq: wpk,
        iterations: iters,
    })
}

pub fn hinf_norm(f: &RationalFn) -> Result<f64, TfError> {
    if !f.is_proper() {
        return Err(TfError::ImproperSystem);
    }
    if !f.is_stable() {
        return Err(TfError::UnstableSystem);
    }
    Ok(hinf_norm_ss(&StateSpace::from_rational(f)?)?.norm)
}

pub fn hinf_norm_tfm(m: &TfMatrix) -> Result<f64, TfError> {
    Ok(hinf_report_tfm(m)?.norm)
}

pub fn hinf_report_tfm(m: &TfMatrix) -> Result<HinfReport, TfError> {
    if !m.is_proper() {
        return Err(TfError::ImproperSystem);
    }
    if !m.is_stable() {
        return Err(TfError::UnstableSystem);
    }
    hinf_norm_ss(&StateSpace::from_tf_matrix(m)?)
}

/// Dense-grid estimate of the H∞ norm (no certification).
pub fn hinf_grid_tfm(m: &TfMatrix, freqs: &[f64]) -> f64 {
    grid_peak(|w| m.eval_jw(w), freqs).0
}
