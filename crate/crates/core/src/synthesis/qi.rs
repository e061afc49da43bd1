//! The controller subspace `S = {Φ⁻¹T⁻¹D : D diagonal}`: exactly the maps
//! for which `TΦK` is diagonal.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::platoon_model::{build_T, build_T_inv, build_plant, PlatoonConfig};
use crate::tf_core::freq::design_grid;
use crate::tf_core::{RationalFn, TfMatrix};

pub const QI_TOL: f64 = 1e-8;

fn t_phi(cfg: &PlatoonConfig, w: f64) -> Result<DMatrix<Complex64>> {
    let t = build_T(cfg.n, cfg.headway)?.eval_jw(w);
    let phi = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        cfg.n,
        (1..=cfg.n).map(|k| cfg.phi(k).eval_jw(w)),
    ));
    Ok(t * phi)
}

/// Worst ratio, over frequencies, of the off-diagonal part of `m(jω)` to
/// its largest entry.
fn offdiag_ratio<F: Fn(f64) -> Result<DMatrix<Complex64>>>(m: F, freqs: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &w in freqs {
        let v = m(w)?;
        let mut vals = Vec::with_capacity(v.len());
        for i in 0..v.nrows() {
            for j in 0..v.ncols() {
                vals.push((v[(i, j)].norm(), i != j));
            }
        }
        worst = worst.max(super::rel_offdiag(&vals));
    }
    Ok(worst)
}

/// Off-diagonal size of `TΦK` relative to its diagonal on the design grid.
pub fn qi_offdiag(cfg: &PlatoonConfig, k: &TfMatrix) -> Result<f64> {
    offdiag_ratio(|w| Ok(t_phi(cfg, w)? * k.eval_jw(w)), &design_grid())
}

/// Off-diagonal size of `TΦK(jω)` relative to its largest entry, for a
/// controller response already evaluated at `ω`.
pub fn qi_offdiag_at(cfg: &PlatoonConfig, k: &DMatrix<Complex64>, w: f64) -> Result<f64> {
    offdiag_ratio(|w| Ok(t_phi(cfg, w)? * k), &[w])
}

/// `K ∈ S`, judged on the design grid.
pub fn qi_subspace_check(cfg: &PlatoonConfig, k: &TfMatrix) -> Result<bool> {
    if k.rows() != cfg.n || k.cols() != cfg.n {
        return Ok(false);
    }
    Ok(qi_offdiag(cfg, k)? <= QI_TOL)
}

/// The member `Φ⁻¹T⁻¹D{d_1, …, d_n}`.
pub fn s_member(cfg: &PlatoonConfig, d: &[RationalFn]) -> Result<TfMatrix> {
    let phi_inv = (1..=cfg.n).map(|k| cfg.phi(k).inv()).collect::<std::result::Result<Vec<_>, _>>()?;
    let m = TfMatrix::diag(&phi_inv).mul(&build_T_inv(cfg.n, cfg.headway)?)?.mul(&TfMatrix::diag(d))?;
    Ok(m.retag())
}

/// `KGK ∈ S`, formed pointwise so no high-degree products are built.
pub fn kgk(cfg: &PlatoonConfig, k: &TfMatrix) -> Result<bool> {
    let g = build_plant(cfg)?;
    let r = offdiag_ratio(
        |w| {
            let kv = k.eval_jw(w);
            Ok(t_phi(cfg, w)? * &kv * g.eval_jw(w) * &kv)
        },
        &design_grid(),
    )?;
    Ok(r <= QI_TOL)
}
