//! The six-vehicle reference run: a time-headway string with actuation and
//! radio delays, one H∞ design per vehicle, delay compensation, then a
//! minute of simulated motion.
//!
//! The waveforms are our own choice: the leader accelerates at 1 m/s² on
//! `[2, 7)` s and brakes at 1 m/s² on `[12, 17)` s; vehicle 4 gets a
//! 0.5 m/s² input pulse on `[35, 37)` s. Before 35 s only the leader acts.

use std::collections::BTreeMap;

use super::{simulate, Pulse, Signal, SimResult, SimScenario};
use crate::coprime::{platoon_dcf, scalar_dcf};
use crate::delay::{compensated_controller, DelayConfig};
use crate::error::Result;
use crate::platoon_model::{PlatoonConfig, REF_PHI_S, REF_THETA_S};
use crate::synthesis::{build_controller, hinf_design_all, DiagonalYoula, LeaderInfoController, LocalDesign, QBasis};
use crate::tf_core::freq::design_grid;

pub const REFERENCE_HEADWAY_S: f64 = 0.5;
/// Factorization gain for the delayed design plant.
pub const REFERENCE_ALPHA: f64 = 8.0;
pub const DISTURBED_VEHICLE: usize = 4;
pub const DISTURBANCE_START_S: f64 = 35.0;
const N: usize = 6;
const PADE_ORDER: usize = 3;

/// Compensated controller for the reference string and the per-vehicle
/// designs behind it.
pub fn reference_controller() -> Result<(LeaderInfoController, Vec<LocalDesign>)> {
    let design_cfg = PlatoonConfig::reference_string(N, REFERENCE_HEADWAY_S, true, PADE_ORDER)?;
    let s = scalar_dcf(&design_cfg.base_plant_g_wp, REFERENCE_ALPHA)?;
    let dcf = platoon_dcf(&design_cfg, &s)?;
    let basis = QBasis::default();
    let designs = hinf_design_all(&dcf, basis, &design_grid())?;
    let q = DiagonalYoula::new(designs.iter().map(|d| d.q.clone()).collect())?;
    let mut c = build_controller(&dcf, &q)?;
    c.basis = Some(basis);
    let c = compensated_controller(&c, &DelayConfig::new(REF_THETA_S, REF_PHI_S, PADE_ORDER)?, None)?;
    Ok((c, designs))
}

/// The canonical scenario around a given controller for the reference string.
pub fn reference_scenario(controller: LeaderInfoController) -> Result<SimScenario> {
    let cfg = PlatoonConfig::reference_string(N, REFERENCE_HEADWAY_S, false, PADE_ORDER)?;
    let mut disturbances = BTreeMap::new();
    disturbances.insert(DISTURBED_VEHICLE, Signal::pulse(DISTURBANCE_START_S, DISTURBANCE_START_S + 2.0, 0.5));
    Ok(SimScenario {
        cfg,
        controller,
        delays: DelayConfig::new(REF_THETA_S, REF_PHI_S, PADE_ORDER)?,
        dt_s: 1e-3,
        duration_s: 60.0,
        u0_profile: Signal::Pulses {
            pulses: vec![
                Pulse { start_s: 2.0, end_s: 7.0, amplitude: 1.0 },
                Pulse { start_s: 12.0, end_s: 17.0, amplitude: -1.0 },
            ],
        },
        disturbances,
    })
}

pub fn run_reference_example() -> Result<SimResult> {
    let (c, _) = reference_controller()?;
    simulate(&reference_scenario(c)?)
}
