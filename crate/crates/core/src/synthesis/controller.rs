use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DiagonalYoula, QBasis};
use crate::coprime::PlatoonDcf;
use crate::error::{Error, Result};
use crate::platoon_model::Headway;
use crate::tf_core::{RationalFn, Structure, TfMatrix};

/// Pure delays the controller expects around it. `measurement_s` sits on
/// every `z_k` branch, `feedforward_s` on every broadcast `u_{k-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerDelays {
    pub measurement_s: f64,
    pub feedforward_s: f64,
}

/// A leader-information controller in both its factored form `Y_Q⁻¹X_Q`
/// and its per-vehicle form
/// `u_k = Φ_k⁻¹Φ_{k-1} H⁻¹ u_{k-1} + H⁻¹K_k z_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderInfoController {
    pub n: usize,
    pub headway: Headway,
    pub q: DiagonalYoula,
    pub yq: TfMatrix,
    pub xq: TfMatrix,
    /// `K_k`; improper when `h > 0`, only `H⁻¹K_k` is ever realized.
    pub local_k: Vec<RationalFn>,
    /// `H⁻¹K_k`, the block each vehicle runs on its spacing error.
    pub local_hk: Vec<RationalFn>,
    /// `Φ_k⁻¹Φ_{k-1}` for `k = 2..=n`.
    pub feedforward: Vec<RationalFn>,
    /// `Φ_0..Φ_n` of the plant the controller was designed for.
    pub phis: Vec<RationalFn>,
    pub design_g_wp: RationalFn,
    pub alpha: f64,
    pub basis: Option<QBasis>,
    pub delays: Option<ControllerDelays>,
}

pub fn build_controller(dcf: &PlatoonDcf, q: &DiagonalYoula) -> Result<LeaderInfoController> {
    let n = dcf.size();
    if q.len() != n {
        return Err(Error::InvalidParameter(format!("Youla parameter has {} entries, platoon has {n}", q.len())));
    }
    q.validate()?;
    let s = &dcf.scalar;
    let hw = dcf.headway;
    let h = hw.tf();
    let hinv = hw.pow(-1);
    let phi = |k: usize| dcf.phi(k);
    // (Y − Q H Ñ) and (X + Q H M̃) per vehicle
    let mut yk = Vec::with_capacity(n);
    let mut xk = Vec::with_capacity(n);
    for qk in &q.q {
        let y = s.y.sub(&RationalFn::product(&[qk, &h, &s.n])?)?;
        if y.is_zero() {
            return Err(Error::SingularYFactor);
        }
        yk.push(y);
        xk.push(s.x.add(&RationalFn::product(&[qk, &h, &s.m])?)?);
    }
    let yq = TfMatrix::from_fn(n, n, |i, j| {
        if i == j {
            yk[i].mul(phi(i + 1))
        } else if i == j + 1 {
            // (−H⁻¹Y + Q_ii Ñ) Φ_{i-1}
            let e = q.q[i].mul(&s.n)?.sub(&hinv.mul(&s.y)?)?;
            e.mul(phi(j + 1))
        } else {
            Ok(RationalFn::zero())
        }
    })?
    .with_structure(Structure::LowerBidiagonal)?;
    let xq = TfMatrix::from_fn(n, n, |i, j| {
        if i == j {
            hinv.mul(&s.x)?.add(&q.q[i].mul(&s.m)?)
        } else {
            Ok(RationalFn::zero())
        }
    })?
    .with_structure(Structure::Diagonal)?;
    let mut local_k = Vec::with_capacity(n);
    let mut local_hk = Vec::with_capacity(n);
    for k in 0..n {
        let kk = xk[k].div(&yk[k].mul(phi(k + 1))?)?;
        local_hk.push(xq.get(k, k).div(yq.get(k, k))?);
        local_k.push(kk);
    }
    let feedforward = (2..=n)
        .map(|k| phi(k - 1).div(phi(k)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(LeaderInfoController {
        n,
        headway: hw,
        q: q.clone(),
        yq,
        xq,
        local_k,
        local_hk,
        feedforward,
        phis: dcf.phis.clone(),
        design_g_wp: s.g_wp.clone(),
        alpha: s.alpha,
        basis: None,
        delays: None,
    })
}

impl LeaderInfoController {
    /// `K(jω)` from the per-vehicle recursion. Works where the multiplied-out
    /// rational entries would be of unmanageable degree.
    pub fn eval_jw(&self, w: f64) -> DMatrix<Complex64> {
        let n = self.n;
        let hinv = self.headway.pow(-1).eval_jw(w);
        let mut k = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.local_hk[i].eval_jw(w);
            if i > 0 {
                let f = self.feedforward[i - 1].eval_jw(w) * hinv;
                for j in 0..i {
                    k[(i, j)] = f * k[(i - 1, j)];
                }
            }
        }
        k
    }

    /// `Y_Q(jω)⁻¹ X_Q(jω)`; `None` if `Y_Q(jω)` is singular.
    pub fn factored_eval_jw(&self, w: f64) -> Option<DMatrix<Complex64>> {
        let y = self.yq.eval_jw(w);
        y.lu().solve(&self.xq.eval_jw(w))
    }
}

/// `K_Q = Y_Q⁻¹ X_Q`.
pub fn controller_tfm(c: &LeaderInfoController) -> Result<TfMatrix> {
    if (0..c.n).any(|k| c.yq.get(k, k).is_zero()) {
        return Err(Error::SingularFactor);
    }
    let yinv = c.yq.inv_lower_triangular()?;
    Ok(yinv.mul(&c.xq)?.with_structure(Structure::LowerTriangular)?)
}

/// The same map assembled from the per-vehicle recursion alone.
pub fn recursion_tfm(c: &LeaderInfoController) -> Result<TfMatrix> {
    let n = c.n;
    let hinv = c.headway.pow(-1);
    let mut k = TfMatrix::zeros(n, n);
    for i in 0..n {
        k.set(i, i, c.local_hk[i].clone());
        if i > 0 {
            let f = c.feedforward[i - 1].mul(&hinv)?;
            for j in 0..i {
                let prev = k.get(i - 1, j).clone();
                k.set(i, j, f.mul(&prev)?);
            }
        }
    }
    Ok(k.with_structure(Structure::LowerTriangular)?)
}
