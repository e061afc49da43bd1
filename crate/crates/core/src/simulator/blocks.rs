//! Fixed-step LTI blocks and sample-delay lines.
//!
//! Every block is discretized with the bilinear substitution
//! `s ← (2/dt)(z − 1)/(z + 1)`. Because that substitution is a field
//! homomorphism, products and sums of rational maps survive discretization
//! exactly, which is what keeps the structural zeros of the closed loop at
//! rounding level in the time domain.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tf_core::{RationalFn, StateSpace};

/// Discrete state-space block with one input and one or more outputs:
/// `y[n] = C x[n] + D u[n]`, `x[n+1] = A x[n] + B u[n]`.
#[derive(Clone, Debug)]
pub struct Block {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DMatrix<f64>,
    d: DVector<f64>,
    x: DVector<f64>,
    scratch: DVector<f64>,
}

impl Block {
    fn from_continuous(ss: &StateSpace, dt: f64) -> Result<Self> {
        let n = ss.order();
        let tau = 0.5 * dt;
        let id = DMatrix::<f64>::identity(n, n);
        let lhs = &id - &ss.a * tau;
        let inv = lhs
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter(format!("block has a pole at s = {}", 1.0 / tau)))?;
        let b = ss.b.column(0).into_owned();
        let a = &inv * (&id + &ss.a * tau);
        let c = &ss.c * &inv;
        let d = ss.d.column(0) + &c * &b * tau;
        Ok(Block { a, b: &inv * b * dt, c, d, x: DVector::zeros(n), scratch: DVector::zeros(n) })
    }

    /// Single-output block for a proper rational function.
    pub fn scalar(f: &RationalFn, dt: f64) -> Result<Self> {
        Self::from_continuous(&StateSpace::from_rational(f)?, dt)
    }

    /// Block for a plant with relative degree at least one whose outputs
    /// are `f` and its derivative, realized on one shared state.
    pub fn with_derivative(f: &RationalFn, dt: f64) -> Result<Self> {
        if !f.is_strictly_proper() {
            return Err(Error::InvalidParameter("plant must be strictly proper to expose a velocity".into()));
        }
        let mut ss = StateSpace::from_rational(f)?;
        let cv = &ss.c * &ss.a;
        let dv = &ss.c * &ss.b;
        let n = ss.order();
        let mut c = DMatrix::zeros(2, n);
        c.row_mut(0).copy_from(&ss.c.row(0));
        c.row_mut(1).copy_from(&cv.row(0));
        ss.c = c;
        ss.d = DMatrix::from_column_slice(2, 1, &[ss.d[(0, 0)], dv[(0, 0)]]);
        Self::from_continuous(&ss, dt)
    }

    /// Part of output `i` fixed by the current state.
    pub fn free(&self, i: usize) -> f64 {
        self.c.row(i).transpose().dot(&self.x)
    }

    /// Feedthrough of output `i`.
    pub fn gain(&self, i: usize) -> f64 {
        self.d[i]
    }

    pub fn output(&self, i: usize, u: f64) -> f64 {
        self.free(i) + self.gain(i) * u
    }

    pub fn advance(&mut self, u: f64) {
        self.scratch.gemv(1.0, &self.a, &self.x, 0.0);
        self.scratch.axpy(u, &self.b, 1.0);
        std::mem::swap(&mut self.x, &mut self.scratch);
    }
}

/// Number of `dt` samples in `delay_s`; errors unless it is an integer.
pub fn delay_samples(delay_s: f64, dt_s: f64) -> Result<usize> {
    let r = delay_s / dt_s;
    if !r.is_finite() || r < 0.0 || (r - r.round()).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::NonIntegerDelay { delay_s, dt_s });
    }
    Ok(r.round() as usize)
}

/// A pure delay of a whole number of samples.
#[derive(Clone, Debug)]
pub struct DelayLine(VecDeque<f64>);

impl DelayLine {
    pub fn new(delay_s: f64, dt_s: f64) -> Result<Self> {
        Ok(DelayLine(VecDeque::from(vec![0.0; delay_samples(delay_s, dt_s)?])))
    }

    pub fn free(&self) -> f64 {
        self.0.front().copied().unwrap_or(0.0)
    }

    /// 1 for a zero delay, else 0.
    pub fn gain(&self) -> f64 {
        if self.0.is_empty() {
            1.0
        } else {
            0.0
        }
    }

    pub fn output(&self, u: f64) -> f64 {
        self.free() + self.gain() * u
    }

    pub fn advance(&mut self, u: f64) {
        if self.0.pop_front().is_some() {
            self.0.push_back(u);
        }
    }
}
