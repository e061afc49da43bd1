//! Matrices of rational functions with verified sparsity tags.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::rational::RationalFn;
use super::TfError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Full,
    Diagonal,
    LowerTriangular,
    LowerBidiagonal,
}

impl Structure {
    /// Whether position `(i, j)` may hold a nonzero entry.
    pub fn allows(self, i: usize, j: usize) -> bool {
        match self {
            Structure::Full => true,
            Structure::Diagonal => i == j,
            Structure::LowerTriangular => i >= j,
            Structure::LowerBidiagonal => i == j || i == j + 1,
        }
    }
}

/// Dense `rows × cols` grid of rational functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<RationalFn>,
    structure: Structure,
}

impl TfMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TfMatrix {
            rows,
            cols,
            entries: vec![RationalFn::zero(); rows * cols],
            structure: Structure::Full,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = TfMatrix::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = RationalFn::one();
        }
        m.structure = Structure::Diagonal;
        m
    }

    pub fn from_fn<F>(rows: usize, cols: usize, mut f: F) -> Result<Self, TfError>
    where
        F: FnMut(usize, usize) -> Result<RationalFn, TfError>,
    {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j)?);
            }
        }
        Ok(TfMatrix {
            rows,
            cols,
            entries,
            structure: Structure::Full,
        })
    }

    pub fn diag(elems: &[RationalFn]) -> Self {
        let n = elems.len();
        let mut m = TfMatrix::zeros(n, n);
        for (i, e) in elems.iter().enumerate() {
            m.entries[i * n + i] = e.clone();
        }
        m.structure = Structure::Diagonal;
        m
    }

    pub fn column(elems: &[RationalFn]) -> Self {
        TfMatrix {
            rows: elems.len(),
            cols: 1,
            entries: elems.to_vec(),
            structure: Structure::Full,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn get(&self, i: usize, j: usize) -> &RationalFn {
        &self.entries[i * self.cols + j]
    }

    /// Replace an entry; the tag falls back to `Full` if the position is
    /// excluded by the current structure.
    pub fn set(&mut self, i: usize, j: usize, v: RationalFn) {
        if !v.is_zero() && !self.structure.allows(i, j) {
            self.structure = Structure::Full;
        }
        self.entries[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[RationalFn] {
        &self.entries
    }

    /// Attach a structure tag after checking that every excluded position
    /// holds the exact zero function.
    pub fn with_structure(mut self, s: Structure) -> Result<Self, TfError> {
        if s != Structure::Full && self.rows != self.cols {
            return Err(TfError::StructureViolation(format!(
                "{s:?} needs a square matrix"
            )));
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !s.allows(i, j) && !self.get(i, j).is_zero() {
                    return Err(TfError::StructureViolation(format!(
                        "entry ({i},{j}) nonzero under {s:?}"
                    )));
                }
            }
        }
        self.structure = s;
        Ok(self)
    }

    /// Tightest tag satisfied by the exact zero pattern.
    pub fn detect_structure(&self) -> Structure {
        if self.rows != self.cols {
            return Structure::Full;
        }
        for s in [
            Structure::Diagonal,
            Structure::LowerBidiagonal,
            Structure::LowerTriangular,
        ] {
            let ok = (0..self.rows)
                .all(|i| (0..self.cols).all(|j| s.allows(i, j) || self.get(i, j).is_zero()));
            if ok {
                return s;
            }
        }
        Structure::Full
    }

    /// Re-tag with the detected structure.
    pub fn retag(mut self) -> Self {
        self.structure = self.detect_structure();
        self
    }

    fn check_same_shape(&self, o: &TfMatrix) -> Result<(), TfError> {
        if self.rows != o.rows || self.cols != o.cols {
            return Err(TfError::DimensionMismatch);
        }
        Ok(())
    }

    pub fn add(&self, o: &TfMatrix) -> Result<TfMatrix, TfError> {
        self.check_same_shape(o)?;
        let entries = self
            .entries
            .iter()
            .zip(&o.entries)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TfMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
            structure: Structure::Full,
        }
        .retag())
    }

    pub fn sub(&self, o: &TfMatrix) -> Result<TfMatrix, TfError> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> TfMatrix {
        TfMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.neg()).collect(),
            structure: self.structure,
        }
    }

    pub fn scale_fn(&self, f: &RationalFn) -> Result<TfMatrix, TfError> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.mul(f))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TfMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
            structure: self.structure,
        }
        .retag())
    }

    pub fn mul(&self, o: &TfMatrix) -> Result<TfMatrix, TfError> {
        if self.cols != o.rows {
            return Err(TfError::DimensionMismatch);
        }
        let mut out = TfMatrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for j in 0..o.cols {
                let mut acc = RationalFn::zero();
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    let b = o.get(k, j);
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.add(&a.mul(b)?)?;
                }
                out.entries[i * o.cols + j] = acc;
            }
        }
        Ok(out.retag())
    }

    pub fn transpose(&self) -> TfMatrix {
        let mut out = TfMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.entries[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        out.retag()
    }

    /// Stack `self` on top of `o`.
    pub fn vstack(&self, o: &TfMatrix) -> Result<TfMatrix, TfError> {
        if self.cols != o.cols {
            return Err(TfError::DimensionMismatch);
        }
        let mut entries = self.entries.clone();
        entries.extend(o.entries.iter().cloned());
        Ok(TfMatrix {
            rows: self.rows + o.rows,
            cols: self.cols,
            entries,
            structure: Structure::Full,
        })
    }

    /// Column `j` as an `rows × 1` matrix.
    pub fn col(&self, j: usize) -> TfMatrix {
        TfMatrix::column(&(0..self.rows).map(|i| self.get(i, j).clone()).collect::<Vec<_>>())
    }

    /// Inverse of a lower-triangular matrix by forward substitution.
    pub fn inv_lower_triangular(&self) -> Result<TfMatrix, TfError> {
        if self.rows != self.cols {
            return Err(TfError::DimensionMismatch);
        }
        let n = self.rows;
        for i in 0..n {
            for j in i + 1..n {
                if !self.get(i, j).is_zero() {
                    return Err(TfError::StructureViolation("not lower triangular".into()));
                }
            }
        }
        let mut inv = TfMatrix::zeros(n, n);
        for i in 0..n {
            let dinv = self.get(i, i).inv()?;
            inv.entries[i * n + i] = dinv.clone();
            for j in 0..i {
                let mut acc = RationalFn::zero();
                for k in j..i {
                    let a = self.get(i, k);
                    let b = inv.get(k, j);
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.add(&a.mul(b)?)?;
                }
                inv.entries[i * n + j] = acc.mul(&dinv)?.neg();
            }
        }
        Ok(inv.retag())
    }

    pub fn eval(&self, s: Complex64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(s))
    }

    pub fn eval_jw(&self, w: f64) -> DMatrix<Complex64> {
        self.eval(Complex64::new(0.0, w))
    }

    pub fn is_stable(&self) -> bool {
        self.entries.iter().all(|e| e.is_stable())
    }

    pub fn is_proper(&self) -> bool {
        self.entries.iter().all(|e| e.is_proper())
    }

    pub fn max_degree(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.den().degree().unwrap_or(0).max(e.num().degree().unwrap_or(0)))
            .max()
            .unwrap_or(0)
    }

    /// Largest off-diagonal magnitude over the frequency points.
    pub fn max_offdiag_on_grid(&self, freqs: &[f64]) -> f64 {
        let mut m: f64 = 0.0;
        for &w in freqs {
            let v = self.eval_jw(w);
            for i in 0..self.rows {
                for j in 0..self.cols {
                    if i != j {
                        m = m.max(v[(i, j)].norm());
                    }
                }
            }
        }
        m
    }

    /// Largest entrywise deviation from `o` over the frequency points.
    pub fn max_abs_diff_on_grid(&self, o: &TfMatrix, freqs: &[f64]) -> f64 {
        let mut m: f64 = 0.0;
        for &w in freqs {
            let a = self.eval_jw(w);
            let b = o.eval_jw(w);
            m = m.max((a - b).iter().fold(0.0, |acc, z| acc.max(z.norm())));
        }
        m
    }
}
