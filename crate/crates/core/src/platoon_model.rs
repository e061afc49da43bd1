//! Vehicle models, spacing-policy filter and the structured matrices that
//! assemble the platoon plant `G = T Φ g`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tf_core::freq::check_grid;
use crate::tf_core::{pade_approx, Polynomial, RationalFn, Structure, TfError, TfMatrix};

/// Masses, actuator lags and zero locations of the six-vehicle reference
/// string, indexed by follower 1..=6.
pub const REFERENCE_MASS_KG: [f64; 6] = [8.0, 4.0, 1.0, 3.0, 2.0, 7.0];
pub const REFERENCE_TAU_S: [f64; 6] = [0.1, 0.2, 0.05, 0.1, 0.1, 0.3];
pub const REFERENCE_SIGMA: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
/// Actuator and radio delays of the reference string.
pub const REF_PHI_S: f64 = 0.1;
pub const REF_THETA_S: f64 = 0.03;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub index: usize,
    pub mass_kg: f64,
    pub actuator_tau_s: f64,
    pub zero_sigma: f64,
    pub actuation_delay_s: f64,
    pub comm_delay_s: f64,
}

impl VehicleParams {
    pub fn new(index: usize, mass_kg: f64, actuator_tau_s: f64, zero_sigma: f64) -> Self {
        VehicleParams {
            index,
            mass_kg,
            actuator_tau_s,
            zero_sigma,
            actuation_delay_s: 0.0,
            comm_delay_s: 0.0,
        }
    }

    pub fn with_delays(mut self, actuation_s: f64, comm_s: f64) -> Self {
        self.actuation_delay_s = actuation_s;
        self.comm_delay_s = comm_s;
        self
    }

    /// The default leader: `Φ_0(0) = 1`, so `u_0` reads as acceleration.
    pub fn default_leader() -> Self {
        VehicleParams::new(0, 1.0, 0.1, 1.0)
    }

    /// Unit vehicle with `Φ = 1`.
    pub fn identity(index: usize) -> Self {
        VehicleParams::new(index, 1.0, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "vehicle {}: {name} must be positive, got {v}",
                    self.index
                )))
            }
        };
        pos(self.mass_kg, "mass_kg")?;
        pos(self.actuator_tau_s, "actuator_tau_s")?;
        pos(self.zero_sigma, "zero_sigma")?;
        for (v, name) in [
            (self.actuation_delay_s, "actuation_delay_s"),
            (self.comm_delay_s, "comm_delay_s"),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "vehicle {}: {name} must be nonnegative, got {v}",
                    self.index
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Headway {
    pub h_seconds: f64,
}

impl Headway {
    pub fn new(h_seconds: f64) -> Result<Self> {
        if !(h_seconds >= 0.0 && h_seconds.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "headway must be nonnegative, got {h_seconds}"
            )));
        }
        Ok(Headway { h_seconds })
    }

    pub fn constant_spacing() -> Self {
        Headway { h_seconds: 0.0 }
    }

    /// `H(s) = h s + 1`.
    pub fn tf(&self) -> RationalFn {
        RationalFn::new_unreduced(Polynomial::linear(self.h_seconds, 1.0), Polynomial::one())
            .expect("nonzero denominator")
    }

    /// `H^k` for any integer `k`.
    pub fn pow(&self, k: i32) -> RationalFn {
        if self.h_seconds == 0.0 || k == 0 {
            return RationalFn::one();
        }
        let p = Polynomial::linear(self.h_seconds, 1.0).powi(k.unsigned_abs());
        let r = if k > 0 {
            RationalFn::new_unreduced(p, Polynomial::one())
        } else {
            RationalFn::new_unreduced(Polynomial::one(), p)
        };
        r.expect("nonzero denominator")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlatoonConfig {
    pub n: usize,
    pub leader: VehicleParams,
    pub followers: Vec<VehicleParams>,
    pub headway: Headway,
    pub base_plant_g_wp: RationalFn,
    /// Standstill spacing; carried for reporting, never enters the dynamics.
    pub delta_m: f64,
    pub pade_order: usize,
}

impl PlatoonConfig {
    pub fn new(
        leader: VehicleParams,
        followers: Vec<VehicleParams>,
        headway: Headway,
        base_plant_g_wp: RationalFn,
        pade_order: usize,
    ) -> Result<Self> {
        let cfg = PlatoonConfig {
            n: followers.len(),
            leader,
            followers,
            headway,
            base_plant_g_wp,
            delta_m: 0.0,
            pade_order,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n != self.followers.len() {
            return Err(Error::InvalidParameter(format!(
                "need n >= 1 followers matching the list (n = {}, {} listed)",
                self.n,
                self.followers.len()
            )));
        }
        Headway::new(self.headway.h_seconds)?;
        if !self.base_plant_g_wp.is_strictly_proper() {
            return Err(TfError::NotStrictlyProper.into());
        }
        self.leader.validate()?;
        for (k, v) in self.followers.iter().enumerate() {
            v.validate()?;
            if v.index != k + 1 {
                return Err(Error::InvalidParameter(format!(
                    "follower at position {} carries index {}",
                    k + 1,
                    v.index
                )));
            }
            if !build_phi(v)?.is_unimodular() {
                return Err(Error::InvalidParameter(format!("Φ_{} is not unimodular", k + 1)));
            }
        }
        Ok(())
    }

    /// `Φ_k` for `k = 0..=n` (0 is the leader).
    pub fn phi(&self, k: usize) -> RationalFn {
        let v = if k == 0 { &self.leader } else { &self.followers[k - 1] };
        build_phi(v).expect("validated parameters")
    }

    /// Follower factors `Φ_1..Φ_n`.
    pub fn phis(&self) -> Vec<RationalFn> {
        (1..=self.n).map(|k| self.phi(k)).collect()
    }

    /// All followers share one `Φ` (identical vehicles up to the leader).
    pub fn is_homogeneous(&self) -> bool {
        let f = self.phis();
        f.iter().all(|p| p.max_rel_diff(&RationalFn::one(), &check_grid()) < 1e-12)
    }

    /// Loop latency `φ + θ` shared by the string (largest over vehicles).
    pub fn loop_latency_s(&self) -> f64 {
        std::iter::once(&self.leader)
            .chain(&self.followers)
            .map(|v| v.actuation_delay_s + v.comm_delay_s)
            .fold(0.0, f64::max)
    }

    /// `n` identical unit vehicles behind a unit leader.
    pub fn homogeneous(n: usize, h: f64, g_wp: RationalFn) -> Result<Self> {
        PlatoonConfig::new(
            VehicleParams::identity(0),
            (1..=n).map(VehicleParams::identity).collect(),
            Headway::new(h)?,
            g_wp,
            0,
        )
    }

    /// First `n` vehicles of the reference string. With `with_delay`, every
    /// vehicle carries `φ = 0.1 s`, `θ = 0.03 s` and the base plant absorbs
    /// a Padé approximant of `e^{-(φ+θ)s}`.
    pub fn reference_string(n: usize, h: f64, with_delay: bool, pade_order: usize) -> Result<Self> {
        if n == 0 || n > 6 {
            return Err(Error::InvalidParameter(format!(
                "the reference string has 1..=6 followers, asked for {n}"
            )));
        }
        let (phi, theta) = if with_delay { (REF_PHI_S, REF_THETA_S) } else { (0.0, 0.0) };
        let followers = (0..n)
            .map(|k| {
                VehicleParams::new(k + 1, REFERENCE_MASS_KG[k], REFERENCE_TAU_S[k], REFERENCE_SIGMA[k])
                    .with_delays(phi, theta)
            })
            .collect();
        let leader = VehicleParams::default_leader().with_delays(phi, theta);
        let g = default_g_wp(if with_delay { phi + theta } else { 0.0 }, pade_order)?;
        PlatoonConfig::new(leader, followers, Headway::new(h)?, g, pade_order)
    }
}

/// `1/s²`, optionally times the Padé approximant of a delay.
pub fn default_g_wp(delay_s: f64, pade_order: usize) -> Result<RationalFn> {
    let di = RationalFn::from_coeffs(&[1.0], &[0.0, 0.0, 1.0])?;
    if delay_s == 0.0 {
        return Ok(di);
    }
    Ok(pade_approx(delay_s, pade_order)?.mul(&di)?)
}

/// `Φ = (s+σ)/(m(τs+1))`.
pub fn build_phi(v: &VehicleParams) -> Result<RationalFn> {
    v.validate()?;
    Ok(RationalFn::new(
        Polynomial::linear(1.0, v.zero_sigma),
        Polynomial::linear(v.mass_kg * v.actuator_tau_s, v.mass_kg),
    )?)
}

/// `G_k = Φ_k g`. Delay factors are not added here; they live in `g`.
pub fn build_vehicle_tf(v: &VehicleParams, g_wp: &RationalFn) -> Result<RationalFn> {
    if !g_wp.is_strictly_proper() {
        return Err(TfError::NotStrictlyProper.into());
    }
    Ok(build_phi(v)?.mul(g_wp)?)
}

/// Spacing-error map: `H` on the diagonal, `-1` below it.
#[allow(non_snake_case)]
pub fn build_T(n: usize, headway: Headway) -> Result<TfMatrix> {
    check_n(n)?;
    let h = headway.tf();
    let m = TfMatrix::from_fn(n, n, |i, j| {
        Ok(if i == j {
            h.clone()
        } else if i == j + 1 {
            RationalFn::constant(-1.0)
        } else {
            RationalFn::zero()
        })
    })?;
    Ok(m.with_structure(Structure::LowerBidiagonal)?)
}

/// Inverse of [`build_T`]: lower-triangular Toeplitz with `H^{-(i-j+1)}`.
#[allow(non_snake_case)]
pub fn build_T_inv(n: usize, headway: Headway) -> Result<TfMatrix> {
    check_n(n)?;
    let elems: Vec<RationalFn> = (1..=n as i32).map(|k| headway.pow(-k)).collect();
    let inv = structured_matrix(StructKind::Toeplitz, &elems)?;
    let prod = build_T(n, headway)?.mul(&inv)?;
    let err = prod.max_abs_diff_on_grid(&TfMatrix::identity(n), &check_grid());
    if err > 1e-8 {
        return Err(Error::InvalidParameter(format!("T·T⁻¹ deviates from I by {err:.3e}")));
    }
    Ok(inv)
}

/// Checks that `H⁻¹T` is unimodular: its entries and those of its inverse
/// `H T⁻¹` are stable and proper with every pole at `-1/h`.
#[allow(non_snake_case)]
pub fn check_HinvT_unimodular(n: usize, headway: Headway) -> Result<bool> {
    if headway.h_seconds <= 0.0 {
        return Err(Error::RequiresPositiveHeadway);
    }
    let hinv = headway.pow(-1);
    let a = build_T(n, headway)?.scale_fn(&hinv)?;
    let ainv = build_T_inv(n, headway)?.scale_fn(&headway.tf())?;
    let p = -1.0 / headway.h_seconds;
    // repeated roots are ill-conditioned, so compare against (s - p)^deg
    let poles_ok = |m: &TfMatrix| {
        m.entries().iter().all(|e| {
            let d = e.den().monic();
            let want = Polynomial::linear(1.0, -p).powi(d.degree_i() as u32);
            d.sub(&want).norm_inf() <= 1e-9 * want.norm_inf()
        })
    };
    let ok = a.is_stable()
        && a.is_proper()
        && ainv.is_stable()
        && ainv.is_proper()
        && poles_ok(&a)
        && poles_ok(&ainv)
        && a.mul(&ainv)?.max_abs_diff_on_grid(&TfMatrix::identity(n), &check_grid()) < 1e-8;
    Ok(ok)
}

/// `G = T D{G_1..G_n}`: `H G_k` on the diagonal, `-G_k` below it.
pub fn build_plant(cfg: &PlatoonConfig) -> Result<TfMatrix> {
    cfg.validate()?;
    let h = cfg.headway.tf();
    let g: Vec<RationalFn> = cfg
        .followers
        .iter()
        .map(|v| build_vehicle_tf(v, &cfg.base_plant_g_wp))
        .collect::<Result<_>>()?;
    let n = cfg.n;
    let m = TfMatrix::from_fn(n, n, |i, j| {
        if i == j {
            h.mul(&g[j])
        } else if i == j + 1 {
            Ok(g[j].neg())
        } else {
            Ok(RationalFn::zero())
        }
    })?;
    Ok(m.with_structure(Structure::LowerBidiagonal)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructKind {
    /// `D{d_1..d_n}`: diagonal.
    Diagonal,
    /// `T{t_1..t_n}`: lower-triangular Toeplitz, `(i,j) = t_{i-j+1}`.
    Toeplitz,
    /// `R{r_1..r_n}`: lower triangular, row `i` constant equal to `r_i`.
    Rows,
}

pub fn structured_matrix(kind: StructKind, elems: &[RationalFn]) -> Result<TfMatrix> {
    let n = elems.len();
    check_n(n)?;
    let m = TfMatrix::from_fn(n, n, |i, j| {
        Ok(match kind {
            StructKind::Diagonal if i == j => elems[i].clone(),
            StructKind::Toeplitz if i >= j => elems[i - j].clone(),
            StructKind::Rows if i >= j => elems[i].clone(),
            _ => RationalFn::zero(),
        })
    })?;
    Ok(m.retag())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("platoon needs at least one follower".into()));
    }
    Ok(())
}
