//! Radio delays on the broadcast controls: how they break the leader
//! information structure, and the compensation that restores it by
//! delaying every measurement by the same amount.
//!
//! Delays are represented by Padé approximants here; the simulator applies
//! the exact sample delays.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platoon_model::PlatoonConfig;
use crate::synthesis::{controller_tfm, qi_subspace_check, ControllerDelays, LeaderInfoController};
use crate::tf_core::{pade_approx, RationalFn, TfMatrix};

/// One delay pair shared by the whole string.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayConfig {
    /// Radio delay on every broadcast `u_{k-1}`.
    pub theta_s: f64,
    /// Actuator delay inside every vehicle.
    pub phi_s: f64,
    pub pade_order: usize,
}

impl DelayConfig {
    pub fn new(theta_s: f64, phi_s: f64, pade_order: usize) -> Result<Self> {
        for (v, name) in [(theta_s, "theta_s"), (phi_s, "phi_s")] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if pade_order == 0 && theta_s + phi_s > 0.0 {
            return Err(Error::InvalidParameter("a nonzero delay needs pade_order >= 1".into()));
        }
        Ok(DelayConfig { theta_s, phi_s, pade_order })
    }

    pub fn none() -> Self {
        DelayConfig { theta_s: 0.0, phi_s: 0.0, pade_order: 0 }
    }

    /// Padé approximant of `e^{-ts}`; exactly 1 for `t = 0`.
    pub fn pade(&self, t: f64) -> Result<RationalFn> {
        if t == 0.0 {
            Ok(RationalFn::one())
        } else {
            Ok(pade_approx(t, self.pade_order)?)
        }
    }

    /// `cfg` with its base plant replaced by `g · pade(delay)`. `g` must be
    /// delay-free.
    pub fn with_plant_delay(&self, cfg: &PlatoonConfig, g: &RationalFn, delay_s: f64) -> Result<PlatoonConfig> {
        let mut out = cfg.clone();
        out.base_plant_g_wp = g.mul(&self.pade(delay_s)?)?;
        out.pade_order = self.pade_order;
        out.validate()?;
        Ok(out)
    }
}

/// The controller as implemented over delayed radio links: every hop of the
/// broadcast chain adds one radio delay, so entry `(i, j)` carries
/// `pade(θ)^{i-j}`.
pub fn delayed_controller_tfm(c: &LeaderInfoController, d: &DelayConfig) -> Result<TfMatrix> {
    let k = controller_tfm(c)?;
    if d.theta_s == 0.0 {
        return Ok(k);
    }
    let p = d.pade(d.theta_s)?;
    let mut powers = vec![RationalFn::one()];
    for i in 1..c.n {
        powers.push(powers[i - 1].mul(&p)?);
    }
    let mut out = TfMatrix::zeros(c.n, c.n);
    for i in 0..c.n {
        for j in 0..=i {
            out.set(i, j, k.get(i, j).mul(&powers[i - j])?);
        }
    }
    Ok(out.retag())
}

/// Tags `c` with the compensation delays: `measurement_s` on every `z_k`
/// (defaults to `θ`), `θ` on every received broadcast. Valid only if `c`
/// was designed for a plant that already contains the `φ + θ` delay, since
/// the compensated loop behaves as if every vehicle carried it.
pub fn compensated_controller(
    c: &LeaderInfoController,
    d: &DelayConfig,
    measurement_s: Option<f64>,
) -> Result<LeaderInfoController> {
    let measurement_s = measurement_s.unwrap_or(d.theta_s);
    let total = d.phi_s + d.theta_s;
    if total > 0.0 && !has_delay_factor(&c.design_g_wp, &d.pade(total)?) {
        return Err(Error::MismatchedPlantDelay);
    }
    let mut out = c.clone();
    out.delays = if d.theta_s == 0.0 && measurement_s == 0.0 {
        None
    } else {
        Some(ControllerDelays { measurement_s, feedforward_s: d.theta_s })
    };
    Ok(out)
}

/// Every right-half-plane zero of the Padé factor is a zero of `g`.
fn has_delay_factor(g: &RationalFn, pade: &RationalFn) -> bool {
    pade.zeros().iter().all(|z| {
        let scale = g.num().coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs())) * z.norm().max(1.0).powi(g.num().degree_i() as i32);
        g.num().eval_c(*z).norm() <= 1e-6 * scale
    })
}

/// Map from spacing errors to applied controls of a tagged controller,
/// with the delays as Padé rationals: `P_ff (K − B) + P_m B`, `B` the
/// per-vehicle blocks `H⁻¹K_k`. Without tags this is `K`.
pub fn applied_controller_tfm(c: &LeaderInfoController, pade_order: usize) -> Result<TfMatrix> {
    let k = controller_tfm(c)?;
    let Some(t) = c.delays else {
        return Ok(k);
    };
    let d = DelayConfig::new(t.feedforward_s, 0.0, pade_order)?;
    let p_ff = d.pade(t.feedforward_s)?;
    let p_m = d.pade(t.measurement_s)?;
    let mut out = TfMatrix::zeros(c.n, c.n);
    for i in 0..c.n {
        for j in 0..=i {
            let e = if i == j {
                c.local_hk[i].mul(&p_m)?
            } else {
                k.get(i, j).mul(&p_ff)?
            };
            out.set(i, j, e);
        }
    }
    Ok(out.retag())
}

/// `K(jω)` as seen at the actuators when a pure delay `τ` acts as `lag(τ)`
/// and each radio hop takes `link_s`. Tagged controllers see their
/// measurement delay on `z_k` and one hop on the feedforward part;
/// untagged ones pick up a hop per vehicle of distance.
pub fn applied_response(
    c: &LeaderInfoController,
    link_s: f64,
    w: f64,
    lag: impl Fn(f64) -> Complex64,
) -> DMatrix<Complex64> {
    let k = c.eval_jw(w);
    let n = c.n;
    match c.delays {
        Some(t) => {
            let (m, l) = (lag(t.measurement_s), lag(link_s));
            DMatrix::from_fn(n, n, |i, j| if i == j { k[(i, i)] * m } else { k[(i, j)] * l })
        }
        None => {
            let l = lag(link_s);
            DMatrix::from_fn(n, n, |i, j| if i > j { k[(i, j)] * l.powu((i - j) as u32) } else { k[(i, j)] })
        }
    }
}

/// `K` lies in the leader-information subspace of `cfg`'s plant.
pub fn membership_in_s(k: &TfMatrix, cfg: &PlatoonConfig) -> Result<bool> {
    qi_subspace_check(cfg, k)
}

/// Off-diagonal size of `T_{zw_0}`'s would-be zeros relative to its first
/// entry, for plant `cfg` and controller `k`, at frequency `w`.
pub fn leader_map_offdiag(cfg: &PlatoonConfig, k: &TfMatrix, w: f64) -> Result<f64> {
    let r = crate::synthesis::closed_loop_direct(cfg, k, w)?;
    let first = r.t_zw0[(0, 0)].norm().max(1e-300);
    Ok((1..cfg.n).map(|i| r.t_zw0[(i, 0)].norm()).fold(0.0, f64::max) / first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coprime::{platoon_dcf, scalar_dcf};
    use crate::platoon_model::{default_g_wp, REF_PHI_S, REF_THETA_S};
    use crate::synthesis::{build_controller, DiagonalYoula, QBasis};
    use crate::tf_core::freq::{check_grid, design_grid};

    fn lag(a: f64, b: f64) -> RationalFn {
        RationalFn::first_order_lag(1.0, a).unwrap().scale(b)
    }

    /// Controller for `cfg` at factorization pole `alpha` with a fixed
    /// nontrivial diagonal parameter.
    fn controller(cfg: &PlatoonConfig, alpha: f64) -> LeaderInfoController {
        let s = scalar_dcf(&cfg.base_plant_g_wp, alpha).unwrap();
        let d = platoon_dcf(cfg, &s).unwrap();
        let q = (0..cfg.n).map(|k| lag(1.0 + k as f64, 0.2)).collect();
        build_controller(&d, &DiagonalYoula::new(q).unwrap()).unwrap()
    }

    #[test]
    fn zero_delay_changes_nothing() {
        let cfg = PlatoonConfig::reference_string(3, 0.5, false, 3).unwrap();
        let c = controller(&cfg, 1.0);
        let d = DelayConfig::none();
        let k = delayed_controller_tfm(&c, &d).unwrap();
        assert!(k.max_abs_diff_on_grid(&controller_tfm(&c).unwrap(), &check_grid()) == 0.0);
        assert_eq!(compensated_controller(&c, &d, None).unwrap(), c);
    }

    #[test]
    fn delay_powers_accumulate_down_the_string() {
        let cfg = PlatoonConfig::reference_string(3, 0.5, false, 3).unwrap();
        let c = controller(&cfg, 1.0);
        let d = DelayConfig::new(0.03, 0.0, 3).unwrap();
        let k = controller_tfm(&c).unwrap();
        let kd = delayed_controller_tfm(&c, &d).unwrap();
        let want = k.get(2, 0).mul(&pade_approx(0.06, 3).unwrap()).unwrap();
        let low: Vec<f64> = design_grid().into_iter().filter(|&w| w <= 10.0).collect();
        assert!(kd.get(2, 0).max_rel_diff(&want, &low) < 1e-4);
        assert!(kd.get(1, 1).max_rel_diff(k.get(1, 1), &check_grid()) < 1e-12);
    }

    #[test]
    fn radio_delay_leaves_the_subspace() {
        let cfg = PlatoonConfig::reference_string(3, 0.5, false, 3).unwrap();
        let c = controller(&cfg, 1.0);
        let k = controller_tfm(&c).unwrap();
        assert!(membership_in_s(&k, &cfg).unwrap());
        assert!(membership_in_s(&TfMatrix::zeros(3, 3), &cfg).unwrap());
        let mut prev = 0.0;
        for theta in [0.01, 0.03, 0.1] {
            let kd = delayed_controller_tfm(&c, &DelayConfig::new(theta, 0.0, 3).unwrap()).unwrap();
            assert!(!membership_in_s(&kd, &cfg).unwrap());
            let off = leader_map_offdiag(&cfg, &kd, 1.0).unwrap();
            assert!(off > prev, "θ={theta}: {off} vs {prev}");
            prev = off;
        }
    }

    #[test]
    fn series_filters_cannot_undo_the_delay() {
        let cfg = PlatoonConfig::reference_string(3, 0.5, false, 3).unwrap();
        let c = controller(&cfg, 1.0);
        let k = controller_tfm(&c).unwrap();
        let p = pade_approx(0.03, 3).unwrap();
        let b = QBasis::default();
        let mut filters = b.elements();
        filters.push(b.combine(&[1.5, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap());
        // lead-like filters that advance the phase near the crossover
        filters.push(RationalFn::from_coeffs(&[1.0, 0.03], &[1.0, 0.003]).unwrap());
        for f in &filters {
            let r = f.mul(&p).unwrap();
            let mut kf = TfMatrix::zeros(3, 3);
            for i in 0..3 {
                for j in 0..=i {
                    kf.set(i, j, k.get(i, j).mul(&r.powi((i - j) as i32).unwrap()).unwrap());
                }
            }
            assert!(!membership_in_s(&kf, &cfg).unwrap());
        }
    }

    #[test]
    fn compensation_restores_the_structure() {
        let g = default_g_wp(0.0, 0).unwrap();
        for (n, theta) in [(2, 0.01), (3, REF_THETA_S), (4, 0.1), (5, REF_THETA_S)] {
            let undelayed = PlatoonConfig::reference_string(n, 0.5, false, 3).unwrap();
            let d = DelayConfig::new(theta, REF_PHI_S, 3).unwrap();
            let design = d.with_plant_delay(&undelayed, &g, d.phi_s + d.theta_s).unwrap();
            let physical = d.with_plant_delay(&undelayed, &g, d.phi_s).unwrap();
            let c = compensated_controller(&controller(&design, 8.0), &d, None).unwrap();
            let k = applied_controller_tfm(&c, 3).unwrap();
            assert!(membership_in_s(&k, &physical).unwrap(), "n={n} θ={theta}");
            let off = check_grid().iter().map(|&w| leader_map_offdiag(&physical, &k, w).unwrap()).fold(0.0, f64::max);
            assert!(off < 1e-6, "θ={theta}: {off}");
            // mismatched measurement delay breaks it again
            let bad = compensated_controller(&controller(&design, 8.0), &d, Some(2.0 * theta)).unwrap();
            assert!(!membership_in_s(&applied_controller_tfm(&bad, 3).unwrap(), &physical).unwrap());
        }
    }

    #[test]
    fn compensation_needs_the_delay_in_the_design() {
        let cfg = PlatoonConfig::reference_string(3, 0.5, false, 3).unwrap();
        let c = controller(&cfg, 1.0);
        let d = DelayConfig::new(0.03, 0.1, 3).unwrap();
        assert_eq!(compensated_controller(&c, &d, None), Err(Error::MismatchedPlantDelay));
    }
}
