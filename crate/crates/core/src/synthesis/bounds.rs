//! Upper bounds on how disturbances propagate toward the back of the string,
//! compared with the actual closed-loop gains.

use serde::{Deserialize, Serialize};

use super::ClosedLoopMaps;
use crate::error::Result;
use crate::platoon_model::PlatoonConfig;
use crate::tf_core::{hinf_norm, hinf_norm_tfm, RationalFn};

const SLACK_TOL: f64 = 1e-6;
const K_INDEPENDENCE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    /// Disturbance source, 0 for the leader.
    pub j: usize,
    /// Affected vehicle, `k > j`.
    pub k: usize,
    /// `‖[T_{z_k w_j}; T_{u_k w_j}]‖∞`.
    pub actual: f64,
    pub bound: f64,
}

impl BoundEntry {
    pub fn slack(&self) -> f64 {
        self.bound - self.actual
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
    pub all_hold: bool,
    pub min_slack: f64,
    /// For `h = 0` identical followers: whether each source's bound is the
    /// same for every `k ≥ j+2`. `None` for other strings.
    pub k_independent: Option<bool>,
}

fn ninf(f: &RationalFn) -> Result<f64> {
    if f.is_zero() {
        Ok(0.0)
    } else {
        Ok(hinf_norm(f)?)
    }
}

pub fn string_stability_bounds(cfg: &PlatoonConfig, maps: &ClosedLoopMaps) -> Result<BoundReport> {
    let n = maps.size();
    let hw = cfg.headway;
    let phi: Vec<RationalFn> = (0..=n).map(|k| cfg.phi(k)).collect();
    let phi_inv = phi.iter().map(|p| p.inv()).collect::<std::result::Result<Vec<_>, _>>()?;
    // L_j = ‖[T_{z_j w_j}; T_{u_j w_j}]‖∞
    let l: Vec<f64> = (1..=n).map(|j| Ok(hinf_norm_tfm(&maps.pair(j, j))?)).collect::<Result<_>>()?;
    let lj = |j: usize| l[j - 1];
    let hinv_norm = ninf(&hw.pow(-1))?;
    let mut entries = Vec::new();
    let actual = |k: usize, j: usize| -> Result<f64> { Ok(hinf_norm_tfm(&maps.pair(k, j))?) };

    // leader disturbance
    for k in 1..=n {
        let f = RationalFn::product(&[&phi_inv[k], &phi[0], &hw.pow(-(k as i32))])?;
        entries.push(BoundEntry { j: 0, k, actual: actual(k, 0)?, bound: ninf(&f)? * lj(1) });
    }
    // follower disturbances
    for j in 1..n {
        let r = ninf(&phi[j].mul(&phi_inv[j + 1])?)?;
        let bound = hinv_norm.max(r) * lj(j) + r * lj(j + 1);
        entries.push(BoundEntry { j, k: j + 1, actual: actual(j + 1, j)?, bound });
        for k in j + 2..=n {
            let f = RationalFn::product(&[&phi[j], &phi_inv[k], &hw.pow((j + 1) as i32 - k as i32)])?;
            let bound = ninf(&f)? * (lj(j) + lj(j + 1));
            entries.push(BoundEntry { j, k, actual: actual(k, j)?, bound });
        }
    }

    let min_slack = entries.iter().map(|e| e.slack()).fold(f64::INFINITY, f64::min);
    let k_independent = if hw.h_seconds == 0.0 && cfg.is_homogeneous() {
        let ok = (1..n).all(|j| {
            let b: Vec<f64> = entries.iter().filter(|e| e.j == j && e.k >= j + 2).map(|e| e.bound).collect();
            b.windows(2).all(|w| (w[0] - w[1]).abs() <= K_INDEPENDENCE_TOL * w[0].abs().max(1e-300))
        });
        Some(ok)
    } else {
        None
    };
    Ok(BoundReport { all_hold: min_slack >= -SLACK_TOL, min_slack, entries, k_independent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coprime::{platoon_dcf, scalar_dcf};
    use crate::platoon_model::default_g_wp;
    use crate::synthesis::{closed_loop, DiagonalYoula};

    fn report(cfg: &PlatoonConfig, q: DiagonalYoula) -> BoundReport {
        let s = scalar_dcf(&cfg.base_plant_g_wp, 1.0).unwrap();
        let d = platoon_dcf(cfg, &s).unwrap();
        let maps = closed_loop(cfg, &d, &q.to_tfm()).unwrap();
        string_stability_bounds(cfg, &maps).unwrap()
    }

    #[test]
    fn bounds_hold_for_central_controller() {
        for h in [0.0, 0.5] {
            let cfg = PlatoonConfig::reference_string(4, h, false, 3).unwrap();
            let r = report(&cfg, DiagonalYoula::zeros(4));
            assert!(r.all_hold, "h={h}: {r:?}");
            assert_eq!(r.entries.len(), 4 + 3 + 2 + 1);
        }
    }

    #[test]
    fn constant_spacing_bounds_do_not_grow_with_distance() {
        let cfg = PlatoonConfig::homogeneous(6, 0.0, default_g_wp(0.0, 0).unwrap()).unwrap();
        let lag = RationalFn::first_order_lag(1.0, 2.0).unwrap().scale(0.5);
        let r = report(&cfg, DiagonalYoula::uniform(6, lag).unwrap());
        assert_eq!(r.k_independent, Some(true));
        let b = |k| r.entries.iter().find(|e| e.j == 1 && e.k == k).unwrap().bound;
        assert!((b(3) - b(6)).abs() < 1e-9 * b(3));
        assert!(r.all_hold);
    }

    #[test]
    fn positive_headway_bounds_decay() {
        let cfg = PlatoonConfig::homogeneous(5, 0.5, default_g_wp(0.0, 0).unwrap()).unwrap();
        let r = report(&cfg, DiagonalYoula::zeros(5));
        assert_eq!(r.k_independent, None);
        let b = |k| r.entries.iter().find(|e| e.j == 1 && e.k == k).unwrap().bound;
        assert!(b(4) <= b(3) * (1.0 + 1e-9) && b(5) <= b(4) * (1.0 + 1e-9));
        assert!(r.all_hold);
    }
}
