//! Leader-information controllers: the diagonal Youla parameterization, the
//! per-vehicle realization, closed-loop maps and the local design problems.

mod bounds;
mod closed_loop;
mod controller;
mod design;
mod qi;
pub mod socp;

pub use bounds::{string_stability_bounds, BoundEntry, BoundReport};
pub use closed_loop::{closed_form_maps, closed_loop, closed_loop_direct, direct_response, ClosedLoopMaps, DirectResponse};
pub use controller::{build_controller, controller_tfm, recursion_tfm, ControllerDelays, LeaderInfoController};
pub use design::{
    full_q_h2_optimum, h2_design, hinf_design_all, homogeneous_h2_optimal, leader_effort_h2, local_hinf_design,
    local_optimal_qjj,
    two_parameter_optimum, DesignNorm, H2Design, HomogeneousH2, LocalDesign, TwoParameterReport,
};
pub use qi::{kgk, qi_offdiag, qi_offdiag_at, qi_subspace_check, s_member, QI_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tf_core::{Polynomial, RationalFn};

/// `{1, 1/(λs+1), …, 1/(λs+1)^d}`; each design parameter is a real
/// combination of these.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QBasis {
    pub degree: usize,
    pub lambda: f64,
}

impl Default for QBasis {
    fn default() -> Self {
        QBasis { degree: 8, lambda: 0.1 }
    }
}

impl QBasis {
    pub fn new(degree: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("basis pole λ must be positive, got {lambda}")));
        }
        Ok(QBasis { degree, lambda })
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn element(&self, i: usize) -> RationalFn {
        RationalFn::new_unreduced(Polynomial::one(), Polynomial::linear(self.lambda, 1.0).powi(i as u32))
            .expect("nonzero denominator")
    }

    pub fn elements(&self) -> Vec<RationalFn> {
        (0..self.len()).map(|i| self.element(i)).collect()
    }

    /// Same span, better conditioned: `1` and `(1−λs)^{i−1}/(1+λs)^i`, which
    /// are orthogonal in H2. Column i holds element i's coefficients in the
    /// original basis, from `1−λs = 2 − (1+λs)`.
    pub fn orthogonal_elements(&self) -> (Vec<RationalFn>, nalgebra::DMatrix<f64>) {
        let d = self.degree;
        let mut t = nalgebra::DMatrix::zeros(d + 1, d + 1);
        t[(0, 0)] = 1.0;
        let mut binom = vec![1.0f64];
        for i in 1..=d {
            // (2 − u)^{i−1} / u^i = Σ_k C(i−1,k) 2^{i−1−k} (−1)^k u^{k−i}
            for (k, c) in binom.iter().enumerate() {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                t[(i - k, i)] += sign * c * 2f64.powi((i - 1 - k) as i32);
            }
            let mut next = vec![1.0; binom.len() + 1];
            for k in 1..binom.len() {
                next[k] = binom[k - 1] + binom[k];
            }
            binom = next;
        }
        let lag = Polynomial::linear(self.lambda, 1.0);
        let all = Polynomial::linear(-self.lambda, 1.0);
        let elems = (0..=d)
            .map(|i| {
                if i == 0 {
                    RationalFn::one()
                } else {
                    RationalFn::new_unreduced(all.powi(i as u32 - 1), lag.powi(i as u32)).expect("nonzero denominator")
                }
            })
            .collect();
        (elems, t)
    }

    /// `Σ c_i/(λs+1)^i` over the common denominator `(λs+1)^d`.
    pub fn combine(&self, c: &[f64]) -> Result<RationalFn> {
        assert_eq!(c.len(), self.len(), "coefficient count must match the basis");
        let d = self.degree as u32;
        let lag = Polynomial::linear(self.lambda, 1.0);
        let mut num = Polynomial::zero();
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0.0 {
                num = num.add(&lag.powi(d - i as u32).scale(ci));
            }
        }
        Ok(RationalFn::new(num, lag.powi(d))?)
    }
}


/// Diagonal Youla parameter `D{Q_11, …, Q_nn}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalYoula {
    pub q: Vec<RationalFn>,
}

impl DiagonalYoula {
    pub fn new(q: Vec<RationalFn>) -> Result<Self> {
        let d = DiagonalYoula { q };
        d.validate()?;
        Ok(d)
    }

    pub fn zeros(n: usize) -> Self {
        DiagonalYoula { q: vec![RationalFn::zero(); n] }
    }

    pub fn uniform(n: usize, q: RationalFn) -> Result<Self> {
        DiagonalYoula::new(vec![q; n])
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.iter().all(|q| q.is_stable() && q.is_proper()) {
            Ok(())
        } else {
            Err(Error::UnstableParameter)
        }
    }

    pub fn to_tfm(&self) -> crate::tf_core::TfMatrix {
        crate::tf_core::TfMatrix::diag(&self.q)
    }
}

/// Relative size of the largest entry of `vals` that should be zero; used by
/// every structural check so tolerances read the same everywhere.
pub(crate) fn rel_offdiag(vals: &[(f64, bool)]) -> f64 {
    let scale = vals.iter().filter(|v| !v.1).map(|v| v.0).fold(0.0, f64::max).max(1e-300);
    vals.iter().filter(|v| v.1).map(|v| v.0).fold(0.0, f64::max) / scale
}
