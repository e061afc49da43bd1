//! Scenario files: one JSON document describing the string, the design
//! settings, the delays and the simulated inputs. Unknown keys are errors
//! and every physical quantity carries its unit in the key.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use platoon_core::delay::DelayConfig;
use platoon_core::platoon_model::{Headway, PlatoonConfig, VehicleParams};
use platoon_core::simulator::{SimScenario, Signal};
use platoon_core::synthesis::{DesignNorm, LeaderInfoController, QBasis};
use platoon_core::tf_core::freq::logspace;
use platoon_core::tf_core::RationalFn;
use platoon_core::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub platoon: PlatoonSection,
    #[serde(default)]
    pub design: DesignSection,
    #[serde(default)]
    pub delays: DelaySection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatoonSection {
    /// Number of followers; must match `vehicles`.
    pub n: usize,
    pub headway_s: f64,
    /// Defaults to a unit-mass leader with `τ = 0.1 s`, `σ = 1`.
    #[serde(default)]
    pub leader: Option<VehicleSpec>,
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub g_wp: PlantSpec,
    #[serde(default = "default_pade_order")]
    pub pade_order: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub mass_kg: f64,
    pub actuator_tau_s: f64,
    /// Zero of `Φ` at `s = −σ`.
    pub zero_sigma_rad_s: f64,
}

/// The shared delay-free factor `g` of every vehicle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    /// `1/s²`.
    #[default]
    DoubleIntegrator,
    /// Ascending coefficients.
    Rational { num: Vec<f64>, den: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default = "default_norm")]
    pub norm: DesignNorm,
    /// Coprime-factorization gain; 1 without delays, 8 with them if unset.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_degree")]
    pub basis_degree: usize,
    #[serde(default = "default_lambda")]
    pub basis_lambda_s: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_grid_min")]
    pub grid_min_rad_s: f64,
    #[serde(default = "default_grid_max")]
    pub grid_max_rad_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DelaySection {
    /// Radio delay on every broadcast.
    #[serde(default)]
    pub theta_s: f64,
    /// Actuation delay on every vehicle, the leader included.
    #[serde(default)]
    pub phi_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    /// Leader acceleration command.
    #[serde(default)]
    pub u0: Signal,
    /// Input disturbances keyed by follower index.
    #[serde(default)]
    pub disturbances: BTreeMap<usize, Signal>,
}

fn default_pade_order() -> usize {
    3
}
fn default_norm() -> DesignNorm {
    DesignNorm::Hinf
}
fn default_degree() -> usize {
    QBasis::default().degree
}
fn default_lambda() -> f64 {
    QBasis::default().lambda
}
fn default_grid_points() -> usize {
    200
}
fn default_grid_min() -> f64 {
    1e-3
}
fn default_grid_max() -> f64 {
    1e3
}
fn default_dt() -> f64 {
    1e-3
}
fn default_duration() -> f64 {
    60.0
}

impl Default for DesignSection {
    fn default() -> Self {
        DesignSection {
            norm: default_norm(),
            alpha: None,
            basis_degree: default_degree(),
            basis_lambda_s: default_lambda(),
            grid_points: default_grid_points(),
            grid_min_rad_s: default_grid_min(),
            grid_max_rad_s: default_grid_max(),
        }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            dt_s: default_dt(),
            duration_s: default_duration(),
            u0: Signal::Zero,
            disturbances: BTreeMap::new(),
        }
    }
}

impl VehicleSpec {
    fn params(&self, index: usize) -> VehicleParams {
        VehicleParams::new(index, self.mass_kg, self.actuator_tau_s, self.zero_sigma_rad_s)
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn has_delays(&self) -> bool {
        self.delays.theta_s > 0.0 || self.delays.phi_s > 0.0
    }

    pub fn delay_config(&self) -> Result<DelayConfig> {
        DelayConfig::new(self.delays.theta_s, self.delays.phi_s, self.platoon.pade_order)
    }

    pub fn alpha(&self) -> f64 {
        self.design.alpha.unwrap_or(if self.has_delays() { 8.0 } else { 1.0 })
    }

    pub fn basis(&self) -> Result<QBasis> {
        QBasis::new(self.design.basis_degree, self.design.basis_lambda_s)
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        let d = &self.design;
        if d.grid_points < 2 || !(d.grid_min_rad_s > 0.0) || !(d.grid_max_rad_s > d.grid_min_rad_s) {
            return Err(Error::InvalidParameter("need grid_points >= 2 and 0 < grid_min_rad_s < grid_max_rad_s".into()));
        }
        Ok(logspace(d.grid_min_rad_s.log10(), d.grid_max_rad_s.log10(), d.grid_points))
    }

    /// The string without any pure delay.
    pub fn physical(&self) -> Result<PlatoonConfig> {
        let p = &self.platoon;
        if p.n != p.vehicles.len() {
            return Err(Error::InvalidParameter(format!("n = {} but {} vehicles listed", p.n, p.vehicles.len())));
        }
        let g = match &p.g_wp {
            PlantSpec::DoubleIntegrator => RationalFn::from_coeffs(&[1.0], &[0.0, 0.0, 1.0])?,
            PlantSpec::Rational { num, den } => RationalFn::from_coeffs(num, den)?,
        };
        let leader = p.leader.map_or_else(VehicleParams::default_leader, |v| v.params(0));
        let (phi, theta) = (self.delays.phi_s, self.delays.theta_s);
        let with = |v: VehicleParams| v.with_delays(phi, theta);
        let followers = p.vehicles.iter().enumerate().map(|(k, v)| with(v.params(k + 1))).collect();
        PlatoonConfig::new(with(leader), followers, Headway::new(p.headway_s)?, g, p.pade_order)
    }

    /// The plant a design targets: Padé approximant of the whole loop delay
    /// absorbed into `g`.
    pub fn design_plant(&self) -> Result<PlatoonConfig> {
        self.with_delay(self.delays.phi_s + self.delays.theta_s)
    }

    /// The physical plant with only the actuation delay, as Padé.
    pub fn loop_plant(&self) -> Result<PlatoonConfig> {
        self.with_delay(self.delays.phi_s)
    }

    fn with_delay(&self, delay_s: f64) -> Result<PlatoonConfig> {
        let cfg = self.physical()?;
        if delay_s == 0.0 {
            return Ok(cfg);
        }
        self.delay_config()?.with_plant_delay(&cfg, &cfg.base_plant_g_wp, delay_s)
    }

    pub fn sim_scenario(&self, controller: LeaderInfoController, dt_override: Option<f64>) -> Result<SimScenario> {
        let s = &self.simulation;
        let mut sc = SimScenario::new(self.physical()?, controller, self.delay_config()?);
        sc.dt_s = dt_override.unwrap_or(s.dt_s);
        sc.duration_s = s.duration_s;
        sc.u0_profile = s.u0.clone();
        sc.disturbances = s.disturbances.clone();
        sc.validate()?;
        Ok(sc)
    }
}
