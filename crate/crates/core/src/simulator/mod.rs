//! Fixed-step simulation of the closed-loop platoon running the distributed
//! recursion, with true sample delays on the actuators and on the radio link.

mod blocks;
mod export;
mod metrics;
mod reference;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use blocks::{delay_samples, Block, DelayLine};
pub use export::{svg_panels, write_csv, write_outputs, write_svg_panels, CSV_NAME, PANEL_NAMES};
pub use metrics::{metrics, sinusoid_amplitude, MetricsReport};
pub use reference::{
    reference_controller, reference_scenario, run_reference_example, DISTURBED_VEHICLE, DISTURBANCE_START_S,
    REFERENCE_ALPHA, REFERENCE_HEADWAY_S,
};

use crate::delay::{applied_response, DelayConfig};
use crate::error::{Error, Result};
use crate::platoon_model::PlatoonConfig;
use crate::platoon_model::build_plant;
use crate::synthesis::{controller_tfm, direct_response, DirectResponse, LeaderInfoController};
use crate::tf_core::RationalFn;

const DIVERGENCE_LIMIT: f64 = 1e9;
/// Slack when comparing sample instants with signal breakpoints.
const EDGE_TOL_S: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub start_s: f64,
    pub end_s: f64,
    pub amplitude: f64,
}

/// An input signal, evaluated at sample instants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    #[default]
    Zero,
    /// Sum of rectangular pulses, each active on `[start_s, end_s)`.
    Pulses { pulses: Vec<Pulse> },
    Sine { amplitude: f64, omega_rad_s: f64 },
    /// Held samples; zero past the last one.
    Samples { dt_s: f64, values: Vec<f64> },
}

impl Signal {
    pub fn pulse(start_s: f64, end_s: f64, amplitude: f64) -> Self {
        Signal::Pulses { pulses: vec![Pulse { start_s, end_s, amplitude }] }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Signal::Zero => 0.0,
            Signal::Pulses { pulses } => pulses
                .iter()
                .filter(|p| t >= p.start_s - EDGE_TOL_S && t < p.end_s - EDGE_TOL_S)
                .map(|p| p.amplitude)
                .sum(),
            Signal::Sine { amplitude, omega_rad_s } => amplitude * (omega_rad_s * t).sin(),
            Signal::Samples { dt_s, values } => {
                let i = ((t + EDGE_TOL_S) / dt_s).floor();
                if i < 0.0 {
                    0.0
                } else {
                    values.get(i as usize).copied().unwrap_or(0.0)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        match self {
            Signal::Pulses { pulses } if pulses.iter().any(|p| !(p.end_s >= p.start_s) || !p.amplitude.is_finite()) => {
                bad("pulse must satisfy start_s <= end_s with a finite amplitude")
            }
            Signal::Sine { amplitude, omega_rad_s } if !amplitude.is_finite() || !omega_rad_s.is_finite() => {
                bad("sine parameters must be finite")
            }
            Signal::Samples { dt_s, values } if !(*dt_s > 0.0) || values.iter().any(|v| !v.is_finite()) => {
                bad("sampled signal needs dt_s > 0 and finite values")
            }
            _ => Ok(()),
        }
    }
}

/// `cfg` describes the delay-free part of the vehicles (`Φ_k g`); the
/// physical delays come from `delays`: `phi_s` before every actuator,
/// leader included, and `theta_s` on every radio link.
#[derive(Clone, Debug)]
pub struct SimScenario {
    pub cfg: PlatoonConfig,
    pub controller: LeaderInfoController,
    pub delays: DelayConfig,
    pub dt_s: f64,
    pub duration_s: f64,
    pub u0_profile: Signal,
    /// Input disturbances `w_k`, keyed by follower index `1..=n`.
    pub disturbances: BTreeMap<usize, Signal>,
}

impl SimScenario {
    pub fn new(cfg: PlatoonConfig, controller: LeaderInfoController, delays: DelayConfig) -> Self {
        SimScenario {
            cfg,
            controller,
            delays,
            dt_s: 1e-3,
            duration_s: 60.0,
            u0_profile: Signal::Zero,
            disturbances: BTreeMap::new(),
        }
    }

    /// The fully rational loop the controller was designed against: the
    /// Padé approximant of the whole `φ + θ` moved into every plant, no
    /// pure delays, compensation tags dropped.
    pub fn rational_counterpart(&self) -> Result<SimScenario> {
        let mut out = self.clone();
        let total = self.delays.phi_s + self.delays.theta_s;
        out.cfg = self.delays.with_plant_delay(&self.cfg, &self.cfg.base_plant_g_wp, total)?;
        out.delays = DelayConfig::none();
        out.controller.delays = None;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s > 0.0) || !(self.duration_s >= 0.0) || !self.duration_s.is_finite() {
            return Err(Error::InvalidParameter("need dt_s > 0 and a finite duration_s >= 0".into()));
        }
        if self.controller.n != self.cfg.n {
            return Err(Error::InvalidParameter(format!(
                "controller is for {} vehicles, platoon has {}",
                self.controller.n, self.cfg.n
            )));
        }
        if let Some(k) = self.disturbances.keys().find(|&&k| k == 0 || k > self.cfg.n) {
            return Err(Error::InvalidParameter(format!("disturbance on vehicle {k}, followers are 1..={}", self.cfg.n)));
        }
        self.u0_profile.validate()?;
        self.disturbances.values().try_for_each(Signal::validate)
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    /// Spacing error; identically zero for the leader.
    pub z: Vec<f64>,
    /// Control input as applied at the actuator (before the actuation delay).
    pub u: Vec<f64>,
    /// Input disturbance.
    pub w: Vec<f64>,
}

impl Trace {
    fn with_capacity(n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        Trace { y: v(), v: v(), z: v(), u: v(), w: v() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub t: Vec<f64>,
    pub headway_s: f64,
    pub leader: Trace,
    /// Followers `1..=n`.
    pub vehicles: Vec<Trace>,
}

impl SimResult {
    pub fn n(&self) -> usize {
        self.vehicles.len()
    }

    /// Trace of vehicle `k`, 0 being the leader.
    pub fn vehicle(&self, k: usize) -> &Trace {
        if k == 0 {
            &self.leader
        } else {
            &self.vehicles[k - 1]
        }
    }
}

/// One follower: its plant, delays and controller blocks. `*_nom` run the
/// undelayed recursion whose output is what gets broadcast when the
/// controller is compensated.
struct Follower {
    plant: Block,
    act: DelayLine,
    meas: DelayLine,
    link: Option<DelayLine>,
    ff: Option<Block>,
    local: Block,
    ff_nom: Option<Block>,
    local_nom: Option<Block>,
    w: Signal,
}

fn check(name: &str, k: usize, value: f64, t: f64) -> Result<()> {
    if value.is_finite() && value.abs() <= DIVERGENCE_LIMIT {
        Ok(())
    } else {
        Err(Error::Divergence { signal: format!("{name}_{k}"), value, t })
    }
}

pub fn simulate(sc: &SimScenario) -> Result<SimResult> {
    sc.validate()?;
    let cfg = &sc.cfg;
    let c = &sc.controller;
    let n = cfg.n;
    let dt = sc.dt_s;
    let h = cfg.headway.h_seconds;
    let hinv = cfg.headway.pow(-1);
    let phys = |k: usize| -> Result<Block> { Block::with_derivative(&cfg.phi(k).mul(&cfg.base_plant_g_wp)?, dt) };
    let (measurement_s, tagged) = match c.delays {
        Some(t) => (t.measurement_s, true),
        None => (0.0, false),
    };

    let mut leader = phys(0)?;
    let mut leader_act = DelayLine::new(sc.delays.phi_s, dt)?;
    let mut fs = Vec::with_capacity(n);
    for k in 1..=n {
        let ff_tf: Option<RationalFn> = if k >= 2 { Some(c.feedforward[k - 2].mul(&hinv)?) } else { None };
        let ff = ff_tf.as_ref().map(|f| Block::scalar(f, dt)).transpose()?;
        let local = Block::scalar(&c.local_hk[k - 1], dt)?;
        fs.push(Follower {
            plant: phys(k)?,
            act: DelayLine::new(sc.delays.phi_s, dt)?,
            meas: DelayLine::new(measurement_s, dt)?,
            link: if k >= 2 { Some(DelayLine::new(sc.delays.theta_s, dt)?) } else { None },
            ff_nom: if tagged { ff.clone() } else { None },
            local_nom: if tagged { Some(local.clone()) } else { None },
            ff,
            local,
            w: sc.disturbances.get(&k).cloned().unwrap_or_default(),
        });
    }

    let steps = (sc.duration_s / dt).round() as usize;
    let cap = steps + 1;
    let mut t_grid = Vec::with_capacity(cap);
    let mut lt = Trace::with_capacity(cap);
    let mut traces: Vec<Trace> = (0..n).map(|_| Trace::with_capacity(cap)).collect();

    for step in 0..=steps {
        let t = step as f64 * dt;
        t_grid.push(t);
        let u0 = sc.u0_profile.at(t);
        let a0 = leader_act.output(u0);
        let (y0, v0) = (leader.output(0, a0), leader.output(1, a0));
        check("y", 0, y0, t)?;
        leader_act.advance(u0);
        leader.advance(a0);
        lt.y.push(y0);
        lt.v.push(v0);
        lt.z.push(0.0);
        lt.u.push(u0);
        lt.w.push(0.0);

        let mut prev_y = y0;
        let mut prev_b = 0.0;
        for (i, f) in fs.iter_mut().enumerate() {
            let k = i + 1;
            let w = f.w.at(t);
            let rx = f.link.as_ref().map_or(0.0, |l| l.output(prev_b));
            let ff = f.ff.as_ref().map_or(0.0, |b| b.output(0, rx));
            // Everything below is affine in the unknown z_k; collect the
            // constant and the coefficient, then solve the loop.
            let c0 = ff + f.local.free(0) + f.local.gain(0) * f.meas.free();
            let c1 = f.local.gain(0) * f.meas.gain();
            let a0 = f.act.free() + f.act.gain() * (c0 + w);
            let a1 = f.act.gain() * c1;
            let spacing_free = f.plant.output(0, a0) + h * f.plant.output(1, a0);
            let spacing_gain = (f.plant.gain(0) + h * f.plant.gain(1)) * a1;
            let z = (prev_y - spacing_free) / (1.0 + spacing_gain);

            let zm = f.meas.output(z);
            let u = ff + f.local.output(0, zm);
            let a = f.act.output(u + w);
            let y = f.plant.output(0, a);
            let v = f.plant.output(1, a);
            let b = match (&f.ff_nom, &f.local_nom) {
                (ffn, Some(ln)) => ffn.as_ref().map_or(0.0, |x| x.output(0, prev_b)) + ln.output(0, z),
                _ => u,
            };
            for (name, x) in [("z", z), ("y", y), ("v", v), ("u", u), ("broadcast", b)] {
                check(name, k, x, t)?;
            }

            if let Some(l) = f.link.as_mut() {
                l.advance(prev_b);
            }
            if let Some(x) = f.ff.as_mut() {
                x.advance(rx);
            }
            f.meas.advance(z);
            f.local.advance(zm);
            f.act.advance(u + w);
            f.plant.advance(a);
            if let Some(x) = f.ff_nom.as_mut() {
                x.advance(prev_b);
            }
            if let Some(x) = f.local_nom.as_mut() {
                x.advance(z);
            }

            let tr = &mut traces[i];
            tr.y.push(y);
            tr.v.push(v);
            tr.z.push(z);
            tr.u.push(u);
            tr.w.push(w);
            prev_y = y;
            prev_b = b;
        }
    }
    Ok(SimResult { t: t_grid, headway_s: h, leader: lt, vehicles: traces })
}

/// Steady-state response at `jω` of exactly the loop `simulate` runs, with
/// each pure delay as the factor `e^{−jωτ}`.
pub fn frequency_response(sc: &SimScenario, w: f64) -> Result<DirectResponse> {
    sc.validate()?;
    let cfg = &sc.cfg;
    let d = &sc.delays;
    let lag = |tau: f64| Complex64::from_polar(1.0, -w * tau);
    let act = lag(d.phi_s);
    let g = build_plant(cfg)?.eval_jw(w) * act;
    let g0 = cfg.phi(0).mul(&cfg.base_plant_g_wp)?.eval_jw(w) * act;
    let applied = applied_response(&sc.controller, d.theta_s, w, lag);
    direct_response(&g, &applied, g0).ok_or(Error::SingularFactor)
}

/// How a controller is realized when driven open loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControllerForm {
    /// Per-vehicle blocks chained through the broadcasts.
    Recursion,
    /// Every entry of `K_Q = Y_Q⁻¹X_Q` as its own block.
    Factored,
}

/// Controls produced by `c` (delay tags ignored) for given spacing-error
/// sequences `z[k][step]`.
pub fn controller_response(c: &LeaderInfoController, z: &[Vec<f64>], dt_s: f64, form: ControllerForm) -> Result<Vec<Vec<f64>>> {
    let n = c.n;
    if z.len() != n || z.windows(2).any(|p| p[0].len() != p[1].len()) {
        return Err(Error::InvalidParameter(format!("need {n} spacing-error sequences of equal length")));
    }
    let len = z.first().map_or(0, Vec::len);
    let mut out = vec![Vec::with_capacity(len); n];
    match form {
        ControllerForm::Recursion => {
            let hinv = c.headway.pow(-1);
            let mut local = c.local_hk.iter().map(|f| Block::scalar(f, dt_s)).collect::<Result<Vec<_>>>()?;
            let mut ff = c.feedforward.iter().map(|f| Block::scalar(&f.mul(&hinv)?, dt_s)).collect::<Result<Vec<_>>>()?;
            for step in 0..len {
                let mut prev = 0.0;
                for k in 0..n {
                    let mut u = local[k].output(0, z[k][step]);
                    local[k].advance(z[k][step]);
                    if k > 0 {
                        u += ff[k - 1].output(0, prev);
                        ff[k - 1].advance(prev);
                    }
                    out[k].push(u);
                    prev = u;
                }
            }
        }
        ControllerForm::Factored => {
            let k = controller_tfm(c)?;
            let mut blocks: Vec<Vec<Block>> = (0..n)
                .map(|i| (0..=i).map(|j| Block::scalar(k.get(i, j), dt_s)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            for step in 0..len {
                for (i, row) in blocks.iter_mut().enumerate() {
                    let mut u = 0.0;
                    for (j, b) in row.iter_mut().enumerate() {
                        u += b.output(0, z[j][step]);
                        b.advance(z[j][step]);
                    }
                    out[i].push(u);
                }
            }
        }
    }
    Ok(out)
}
