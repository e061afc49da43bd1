use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DiagonalYoula;
use crate::coprime::{shift_dcf, PlatoonDcf};
use crate::error::{Error, Result};
use crate::platoon_model::{build_plant, PlatoonConfig};
use crate::tf_core::freq::check_grid;
use crate::tf_core::{RationalFn, Structure, TfMatrix};

/// Agreement required between the generic product formulas and the
/// per-entry closed forms.
const CLOSED_FORM_TOL: f64 = 1e-8;

/// Maps from the leader input `w_0` and the follower disturbances `w` to the
/// spacing errors `z` and controls `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopMaps {
    pub t_zw0: TfMatrix,
    pub t_uw0: TfMatrix,
    pub t_zw: TfMatrix,
    pub t_uw: TfMatrix,
}

impl ClosedLoopMaps {
    pub fn size(&self) -> usize {
        self.t_zw.rows()
    }

    pub fn is_stable(&self) -> bool {
        [&self.t_zw0, &self.t_uw0, &self.t_zw, &self.t_uw].iter().all(|m| m.is_stable())
    }

    /// `[T_{z_k w_j}; T_{u_k w_j}]` with `j = 0` the leader, `k ≥ 1`.
    pub fn pair(&self, k: usize, j: usize) -> TfMatrix {
        let (z, u) = if j == 0 {
            (self.t_zw0.get(k - 1, 0), self.t_uw0.get(k - 1, 0))
        } else {
            (self.t_zw.get(k - 1, j - 1), self.t_uw.get(k - 1, j - 1))
        };
        TfMatrix::column(&[z.clone(), u.clone()])
    }

    /// Largest entrywise gap to `other` on `freqs`, each frequency scaled by
    /// the largest entry of `other` there.
    pub fn max_rel_gap(&self, other: &ClosedLoopMaps, freqs: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b) in [
            (&self.t_zw0, &other.t_zw0),
            (&self.t_uw0, &other.t_uw0),
            (&self.t_zw, &other.t_zw),
            (&self.t_uw, &other.t_uw),
        ] {
            for &w in freqs {
                let (ea, eb) = (a.eval_jw(w), b.eval_jw(w));
                let scale = eb.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1e-300);
                let gap = (&ea - &eb).iter().fold(0.0f64, |m, z| m.max(z.norm()));
                worst = worst.max(gap / scale);
            }
        }
        worst
    }
}

/// All four maps from the shifted factorization:
/// `T_zw = −Ỹ_Q Ñ`, `T_uw = −X̃_Q Ñ`, `T_zw0 = Ỹ_Q M̃ V_1 G_0`,
/// `T_uw0 = X̃_Q M̃ V_1 G_0`. A diagonal `q` is also checked against the
/// per-entry closed forms.
pub fn closed_loop(cfg: &PlatoonConfig, dcf: &PlatoonDcf, q: &TfMatrix) -> Result<ClosedLoopMaps> {
    let n = dcf.size();
    if q.rows() != n || q.cols() != n {
        return Err(Error::InvalidParameter(format!("Youla parameter must be {n}×{n}")));
    }
    if cfg.n != n {
        return Err(Error::InvalidParameter("configuration and factorization sizes differ".into()));
    }
    let sh = shift_dcf(dcf, q)?;
    // M̃ V_1 G_0 = e_1 Φ_0 N_℘, since M̃_℘ g = N_℘
    let mut col = vec![RationalFn::zero(); n];
    col[0] = dcf.phi(0).mul(&dcf.scalar.n)?;
    let col = TfMatrix::column(&col);
    let maps = ClosedLoopMaps {
        t_zw0: sh.y_t.mul(&col)?,
        t_uw0: sh.x_t.mul(&col)?,
        t_zw: sh.y_t.mul(&dcf.n_t)?.neg().retag(),
        t_uw: sh.x_t.mul(&dcf.n_t)?.neg().retag(),
    };
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || q.get(i, j).is_zero()));
    if diagonal {
        let dq = DiagonalYoula { q: (0..n).map(|i| q.get(i, i).clone()).collect() };
        let cf = closed_form_maps(dcf, &dq)?;
        let gap = maps.max_rel_gap(&cf, &check_grid());
        if gap > CLOSED_FORM_TOL {
            return Err(Error::ClosedFormMismatch(gap));
        }
    }
    Ok(maps)
}

/// Per-entry closed forms for a diagonal Youla parameter.
pub fn closed_form_maps(dcf: &PlatoonDcf, q: &DiagonalYoula) -> Result<ClosedLoopMaps> {
    let n = dcf.size();
    q.validate()?;
    let s = &dcf.scalar;
    let hw = dcf.headway;
    let h = hw.tf();
    // Ỹ − H N Q_jj and X̃ + H M Q_jj
    let mut yq = Vec::with_capacity(n);
    let mut xq = Vec::with_capacity(n);
    for qj in &q.q {
        yq.push(s.y.sub(&RationalFn::product(&[&h, &s.n, qj])?)?);
        xq.push(s.x.add(&RationalFn::product(&[&h, &s.m, qj])?)?);
    }
    let phi = |k: usize| dcf.phi(k);
    let mut zw0 = vec![RationalFn::zero(); n];
    zw0[0] = RationalFn::product(&[&yq[0], &s.n, phi(0)])?;
    let base = RationalFn::product(&[&xq[0], &s.n, phi(0)])?;
    let uw0 = (1..=n)
        .map(|k| RationalFn::product(&[&base, &phi(k).inv()?, &hw.pow(-(k as i32))]))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let t_zw = TfMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Ok(RationalFn::product(&[&yq[j], &s.n, &h, phi(j + 1)])?.neg())
        } else if i == j + 1 {
            RationalFn::product(&[&yq[i], &s.n, phi(j + 1)])
        } else {
            Ok(RationalFn::zero())
        }
    })?
    .with_structure(Structure::LowerBidiagonal)?;
    let t_uw = TfMatrix::from_fn(n, n, |k, j| {
        if k == j {
            Ok(xq[j].mul(&s.n)?.neg())
        } else if k > j {
            let dq = q.q[j].sub(&q.q[j + 1])?;
            if dq.is_zero() {
                return Ok(RationalFn::zero());
            }
            let e = RationalFn::product(&[
                &s.m,
                &dq,
                &s.n,
                phi(j + 1),
                &phi(k + 1).inv()?,
                &hw.pow(j as i32 + 1 - k as i32),
            ])?;
            Ok(e.neg())
        } else {
            Ok(RationalFn::zero())
        }
    })?
    .retag();
    Ok(ClosedLoopMaps {
        t_zw0: TfMatrix::column(&zw0),
        t_uw0: TfMatrix::column(&uw0),
        t_zw,
        t_uw,
    })
}

/// Closed-loop responses at one frequency from plant and controller
/// responses. Used as the independent oracle for the factored formulas.
#[derive(Clone, Debug)]
pub struct DirectResponse {
    pub t_zw0: DMatrix<Complex64>,
    pub t_uw0: DMatrix<Complex64>,
    pub t_zw: DMatrix<Complex64>,
    pub t_uw: DMatrix<Complex64>,
    /// `(I + GK)⁻¹`.
    pub sensitivity: DMatrix<Complex64>,
}

/// `z = (I+GK)⁻¹(V_1 G_0 w_0 − G w)`, `u = K z`, by direct inversion.
pub fn direct_response(g: &DMatrix<Complex64>, k: &DMatrix<Complex64>, g0: Complex64) -> Option<DirectResponse> {
    let n = g.nrows();
    let s = (DMatrix::identity(n, n) + g * k).try_inverse()?;
    let t_zw = -(&s * g);
    let t_uw = k * &t_zw;
    let mut v1 = DMatrix::zeros(n, 1);
    v1[(0, 0)] = g0;
    let t_zw0 = &s * v1;
    let t_uw0 = k * &t_zw0;
    Some(DirectResponse { t_zw0, t_uw0, t_zw, t_uw, sensitivity: s })
}

/// Direct closed loop of the rational plant of `cfg` with controller `k` at
/// `s = jω`.
pub fn closed_loop_direct(cfg: &PlatoonConfig, k: &TfMatrix, w: f64) -> Result<DirectResponse> {
    let g = build_plant(cfg)?.eval_jw(w);
    let g0 = cfg.phi(0).mul(&cfg.base_plant_g_wp)?.eval_jw(w);
    direct_response(&g, &k.eval_jw(w), g0).ok_or(Error::SingularFactor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coprime::{platoon_dcf, scalar_dcf};
    use crate::platoon_model::{default_g_wp, PlatoonConfig};
    use crate::synthesis::{build_controller, controller_tfm};

    fn lag(a: f64, b: f64) -> RationalFn {
        RationalFn::first_order_lag(1.0, a).unwrap().scale(b)
    }

    fn setup(cfg: &PlatoonConfig) -> PlatoonDcf {
        let s = scalar_dcf(&cfg.base_plant_g_wp, 1.0).unwrap();
        platoon_dcf(cfg, &s).unwrap()
    }

    fn zero_beyond(m: &TfMatrix, keep: impl Fn(usize, usize) -> bool) -> bool {
        (0..m.rows()).all(|i| (0..m.cols()).all(|j| keep(i, j) || m.get(i, j).is_zero()))
    }

    #[test]
    fn diagonal_parameter_gives_sparse_maps() {
        let cfg = PlatoonConfig::reference_string(4, 0.5, false, 3).unwrap();
        let d = setup(&cfg);
        let q = DiagonalYoula::new(vec![lag(1.0, 0.3), lag(3.0, -0.4), lag(0.5, 1.0), RationalFn::constant(0.2)]).unwrap();
        let maps = closed_loop(&cfg, &d, &q.to_tfm()).unwrap();
        assert!(maps.is_stable());
        let g = check_grid();
        // the generic products carry rounding residue where the closed forms are exact zeros
        let small = |m: &TfMatrix, i: usize, j: usize| {
            g.iter().all(|&w| m.get(i, j).eval_jw(w).norm() < 1e-9)
        };
        for k in 1..4 {
            assert!(small(&maps.t_zw0, k, 0));
        }
        for i in 0..4 {
            for j in 0..4 {
                if i > j + 1 || i < j {
                    assert!(small(&maps.t_zw, i, j), "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn identical_parameters_make_control_map_diagonal() {
        let cfg = PlatoonConfig::reference_string(3, 0.5, false, 3).unwrap();
        let d = setup(&cfg);
        let q = DiagonalYoula::uniform(3, lag(2.0, 0.5)).unwrap();
        let cf = closed_form_maps(&d, &q).unwrap();
        assert!(zero_beyond(&cf.t_uw, |i, j| i == j));
        let maps = closed_loop(&cfg, &d, &q.to_tfm()).unwrap();
        assert!(maps.t_uw.max_offdiag_on_grid(&check_grid()) < 1e-9);
    }

    #[test]
    fn factored_maps_match_direct_inversion() {
        let cfg = PlatoonConfig::reference_string(3, 0.5, false, 3).unwrap();
        let d = setup(&cfg);
        let q = DiagonalYoula::new(vec![lag(1.0, 0.3), lag(3.0, -0.4), lag(0.5, 1.0)]).unwrap();
        let maps = closed_loop(&cfg, &d, &q.to_tfm()).unwrap();
        let k = controller_tfm(&build_controller(&d, &q).unwrap()).unwrap();
        for w in check_grid() {
            let dr = closed_loop_direct(&cfg, &k, w).unwrap();
            for (a, b) in [
                (maps.t_zw.eval_jw(w), &dr.t_zw),
                (maps.t_uw.eval_jw(w), &dr.t_uw),
                (maps.t_zw0.eval_jw(w), &dr.t_zw0),
                (maps.t_uw0.eval_jw(w), &dr.t_uw0),
            ] {
                let scale = b.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                assert!((&a - b).iter().all(|z| z.norm() <= 1e-8 * scale), "w={w}");
            }
        }
    }

    #[test]
    fn full_parameter_is_accepted() {
        let cfg = PlatoonConfig::homogeneous(2, 0.0, default_g_wp(0.0, 0).unwrap()).unwrap();
        let d = setup(&cfg);
        let mut q = TfMatrix::zeros(2, 2);
        q.set(0, 1, lag(1.0, 0.5));
        let maps = closed_loop(&cfg, &d, &q).unwrap();
        // the off-diagonal entry breaks the leader-information structure
        let g = check_grid();
        assert!(g.iter().any(|&w| maps.t_zw.get(0, 1).eval_jw(w).norm() > 1e-6));
    }
}
