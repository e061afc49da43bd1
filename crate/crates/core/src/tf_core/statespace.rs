//! State-space realizations `ẋ = Ax + Bu, y = Cx + Du`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::linalg;
use super::matrix::TfMatrix;
use super::rational::RationalFn;
use super::{TfError, EPS_STAB};

/// Rank tolerance (relative) used when truncating uncontrollable and
/// unobservable directions.
const MINIMAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self, TfError> {
        let n = a.nrows();
        if a.ncols() != n
            || b.nrows() != n
            || c.ncols() != n
            || d.nrows() != c.nrows()
            || d.ncols() != b.ncols()
        {
            return Err(TfError::DimensionMismatch);
        }
        Ok(StateSpace { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Controller-form realization of a proper scalar function, balanced by a
    /// diagonal similarity. Minimal whenever `f` is reduced.
    pub fn from_rational(f: &RationalFn) -> Result<Self, TfError> {
        if !f.is_proper() {
            return Err(TfError::ImproperSystem);
        }
        let den = f.den();
        let n = den.degree().unwrap_or(0);
        let lead = den.leading();
        let dcoef = if f.is_zero() { 0.0 } else { f.num().coeff(n) / lead };
        if n == 0 {
            return Ok(StateSpace {
                a: DMatrix::zeros(0, 0),
                b: DMatrix::zeros(0, 1),
                c: DMatrix::zeros(1, 0),
                d: DMatrix::from_element(1, 1, dcoef),
            });
        }
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -den.coeff(j) / lead;
        }
        let mut b = DMatrix::<f64>::zeros(n, 1);
        b[(n - 1, 0)] = 1.0;
        let mut c = DMatrix::<f64>::zeros(1, n);
        for j in 0..n {
            c[(0, j)] = f.num().coeff(j) / lead - dcoef * den.coeff(j) / lead;
        }
        let scale = linalg::balance_in_place(&mut a);
        for i in 0..n {
            b[(i, 0)] /= scale[i];
            c[(0, i)] *= scale[i];
        }
        Ok(StateSpace {
            a,
            b,
            c,
            d: DMatrix::from_element(1, 1, dcoef),
        })
    }

    /// Realization of a proper TFM: entrywise realizations stacked in block
    /// diagonal form, then reduced to a minimal one.
    pub fn from_tf_matrix(m: &TfMatrix) -> Result<Self, TfError> {
        let (p, q) = (m.rows(), m.cols());
        let mut parts = Vec::new();
        let mut total = 0;
        for i in 0..p {
            for j in 0..q {
                let e = m.get(i, j);
                if e.is_zero() {
                    continue;
                }
                let ss = StateSpace::from_rational(e)?;
                total += ss.order();
                parts.push((i, j, ss));
            }
        }
        let mut a = DMatrix::zeros(total, total);
        let mut b = DMatrix::zeros(total, q);
        let mut c = DMatrix::zeros(p, total);
        let mut d = DMatrix::zeros(p, q);
        let mut off = 0;
        for (i, j, ss) in &parts {
            let k = ss.order();
            a.view_mut((off, off), (k, k)).copy_from(&ss.a);
            b.view_mut((off, *j), (k, 1)).copy_from(&ss.b);
            c.view_mut((*i, off), (1, k)).copy_from(&ss.c);
            d[(*i, *j)] = ss.d[(0, 0)];
            off += k;
        }
        Ok(StateSpace { a, b, c, d }.minimal())
    }

    /// Remove uncontrollable, then unobservable, directions.
    pub fn minimal(&self) -> StateSpace {
        if self.order() == 0 {
            return self.clone();
        }
        let qc = linalg::krylov_basis(&self.a, &self.b, MINIMAL_TOL);
        let a1 = qc.transpose() * &self.a * &qc;
        let b1 = qc.transpose() * &self.b;
        let c1 = &self.c * &qc;
        if a1.nrows() == 0 {
            return StateSpace {
                a: a1,
                b: b1,
                c: c1,
                d: self.d.clone(),
            };
        }
        let qo = linalg::krylov_basis(&a1.transpose(), &c1.transpose(), MINIMAL_TOL);
        StateSpace {
            a: qo.transpose() * &a1 * &qo,
            b: qo.transpose() * &b1,
            c: &c1 * &qo,
            d: self.d.clone(),
        }
    }

    pub fn poles(&self) -> Vec<Complex64> {
        if self.order() == 0 {
            return Vec::new();
        }
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.re < -EPS_STAB)
    }

    /// `C (sI − A)⁻¹ B + D`.
    pub fn eval(&self, s: Complex64) -> DMatrix<Complex64> {
        let n = self.order();
        let dc = self.d.map(|x| Complex64::new(x, 0.0));
        if n == 0 {
            return dc;
        }
        let mut m = self.a.map(|x| Complex64::new(-x, 0.0));
        for i in 0..n {
            m[(i, i)] += s;
        }
        let bc = self.b.map(|x| Complex64::new(x, 0.0));
        let x = m.lu().solve(&bc).unwrap_or_else(|| DMatrix::from_element(n, bc.ncols(), Complex64::new(f64::NAN, 0.0)));
        self.c.map(|x| Complex64::new(x, 0.0)) * x + dc
    }

    pub fn eval_jw(&self, w: f64) -> DMatrix<Complex64> {
        self.eval(Complex64::new(0.0, w))
    }
}

pub fn to_state_space(f: &RationalFn) -> Result<StateSpace, TfError> {
    StateSpace::from_rational(f)
}

pub fn tfm_to_state_space(m: &TfMatrix) -> Result<StateSpace, TfError> {
    StateSpace::from_tf_matrix(m)
}
