use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use platoon_core::coprime::{platoon_dcf, scalar_dcf, verify_bezout, PlatoonDcf};
use platoon_core::delay::{applied_response, compensated_controller};
use platoon_core::platoon_model::{build_plant, PlatoonConfig};
use platoon_core::simulator::{
    frequency_response, metrics, reference_controller, reference_scenario, simulate, sinusoid_amplitude,
    write_outputs, MetricsReport, Signal, SimResult, SimScenario, CSV_NAME, DISTURBANCE_START_S, DISTURBED_VEHICLE,
};
use platoon_core::synthesis::{
    build_controller, closed_form_maps, direct_response, h2_design, hinf_design_all, homogeneous_h2_optimal,
    qi_offdiag_at, string_stability_bounds, DesignNorm, DiagonalYoula, LeaderInfoController, QI_TOL,
};
use platoon_core::tf_core::freq::check_grid;
use platoon_core::Error;

use crate::scenario::ScenarioFile;

pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_SCHEMA: u8 = 2;
pub const EXIT_DESIGN: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;

pub const CONTROLLER_NAME: &str = "controller.json";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    /// Bad input maps to the schema code, a blown-up run to the divergence
    /// code, anything else to `otherwise`.
    fn core(e: Error, otherwise: u8) -> Self {
        let code = match e {
            Error::Divergence { .. } => EXIT_DIVERGENCE,
            Error::InvalidParameter(_) | Error::NonIntegerDelay { .. } => EXIT_SCHEMA,
            _ => otherwise,
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn design_err(e: Error) -> Failure {
    Failure::core(e, EXIT_DESIGN)
}

fn schema_err(e: Error) -> Failure {
    Failure::core(e, EXIT_SCHEMA)
}

/// What `synth` writes: the controller plus the costs it achieved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerFile {
    pub norm: DesignNorm,
    /// Per-vehicle certified H∞ norms, or per-row H2 costs.
    pub local_costs: Vec<f64>,
    pub controller: LeaderInfoController,
}

pub fn load_scenario(path: &Path) -> CmdResult<ScenarioFile> {
    let text = fs::read_to_string(path).map_err(|e| Failure::new(EXIT_SCHEMA, format!("{}: {e}", path.display())))?;
    ScenarioFile::parse(&text).map_err(|e| Failure::new(EXIT_SCHEMA, format!("{}: {e}", path.display())))
}

pub fn load_controller(path: &Path) -> CmdResult<ControllerFile> {
    let text = fs::read_to_string(path).map_err(|e| Failure::new(EXIT_SCHEMA, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_SCHEMA, format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_SCHEMA, format!("{}: {e}", dir.display())))?;
    }
    let text = serde_json::to_string_pretty(value).expect("controller serializes");
    fs::write(path, text + "\n").map_err(|e| Failure::new(EXIT_SCHEMA, format!("{}: {e}", path.display())))
}

fn factorization(f: &ScenarioFile, alpha: f64) -> CmdResult<(PlatoonConfig, PlatoonDcf)> {
    let cfg = f.design_plant().map_err(schema_err)?;
    let s = scalar_dcf(&cfg.base_plant_g_wp, alpha).map_err(design_err)?;
    let dcf = platoon_dcf(&cfg, &s).map_err(design_err)?;
    Ok((cfg, dcf))
}

#[derive(Clone, Debug, Default)]
pub struct SynthOptions {
    pub norm: Option<DesignNorm>,
    pub basis_degree: Option<usize>,
    pub grid_points: Option<usize>,
    pub alpha: Option<f64>,
}

pub fn synth(scenario: &Path, opts: &SynthOptions, out: &Path) -> CmdResult {
    let mut f = load_scenario(scenario)?;
    let d = &mut f.design;
    d.norm = opts.norm.unwrap_or(d.norm);
    d.basis_degree = opts.basis_degree.unwrap_or(d.basis_degree);
    d.grid_points = opts.grid_points.unwrap_or(d.grid_points);
    d.alpha = opts.alpha.or(d.alpha);
    let basis = f.basis().map_err(schema_err)?;
    let grid = f.grid().map_err(schema_err)?;
    let (cfg, dcf) = factorization(&f, f.alpha())?;
    println!(
        "designing {} vehicles, h = {} s, {} norm, basis degree {} (λ = {} s), α = {}",
        cfg.n,
        cfg.headway.h_seconds,
        norm_name(f.design.norm),
        basis.degree,
        basis.lambda,
        f.alpha()
    );
    let (q, costs) = match f.design.norm {
        DesignNorm::Hinf => {
            let designs = hinf_design_all(&dcf, basis, &grid).map_err(design_err)?;
            for d in &designs {
                let flag = if d.basis_too_small { "  [coefficient at bound]" } else { "" };
                println!("vehicle {}: local H∞ norm {:.6} (grid {:.6}){flag}", d.j, d.norm, d.grid_norm);
            }
            let costs = designs.iter().map(|d| d.norm).collect();
            (DiagonalYoula::new(designs.into_iter().map(|d| d.q).collect()).map_err(design_err)?, costs)
        }
        DesignNorm::H2 => {
            let d = h2_design(&dcf, basis).map_err(design_err)?;
            let costs: Vec<f64> = d.row_costs_sq.iter().map(|c| c.sqrt()).collect();
            for (k, c) in costs.iter().enumerate() {
                println!("row {}: H2 cost {c:.6}", k + 1);
            }
            println!("total H2 cost {:.6}", d.cost);
            if cfg.is_homogeneous() && cfg.headway.h_seconds == 0.0 {
                let hom = homogeneous_h2_optimal(&cfg, &dcf, basis).map_err(design_err)?;
                println!(
                    "identical-vehicle bound: per channel {:.6e}, (2n-1) x per channel {:.6e}, assembled {:.6e} (squared costs)",
                    hom.per_channel_sq, hom.bound_sq, hom.full_cost_sq
                );
                // Row 1 has no upstream channel, so its cost differs even
                // though every local problem is the same.
                let spread = d.q.q.iter().map(|q| q.max_rel_diff(&d.q.q[0], &check_grid())).fold(0.0, f64::max);
                println!("local parameters agree across vehicles to {spread:.3e}");
            }
            (d.q, costs)
        }
    };
    let mut c = build_controller(&dcf, &q).map_err(design_err)?;
    c.basis = Some(basis);
    if f.has_delays() {
        c = compensated_controller(&c, &f.delay_config().map_err(schema_err)?, None).map_err(design_err)?;
    }
    write_json(&ControllerFile { norm: f.design.norm, local_costs: costs, controller: c }, out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn norm_name(n: DesignNorm) -> &'static str {
    match n {
        DesignNorm::H2 => "H2",
        DesignNorm::Hinf => "H∞",
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &'static str, value: f64, limit: f64) -> Self {
        Check { name, value, limit, pass: value <= limit }
    }
}

fn offdiag(m: &DMatrix<Complex64>, keep: impl Fn(usize, usize) -> bool) -> f64 {
    let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !keep(i, j) {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// The full structural battery for `c` on the string of `f`.
pub fn verify_checks(c: &LeaderInfoController, f: &ScenarioFile) -> CmdResult<Vec<Check>> {
    let grid = check_grid();
    let phys = f.physical().map_err(schema_err)?;
    if c.n != phys.n {
        return Err(Failure::new(EXIT_SCHEMA, format!("controller is for {} vehicles, scenario has {}", c.n, phys.n)));
    }
    let (design, dcf) = factorization(f, c.alpha)?;
    let plant_loop = f.loop_plant().map_err(schema_err)?;
    let d = f.delay_config().map_err(schema_err)?;
    let mut checks = Vec::new();

    let phi_gap = (0..=phys.n).map(|k| phys.phi(k).max_rel_diff(&c.phis[k], &grid)).fold(0.0, f64::max);
    let g_gap = design.base_plant_g_wp.max_rel_diff(&c.design_g_wp, &grid);
    checks.push(Check::below("controller matches the plant", phi_gap.max(g_gap), 1e-9));
    checks.push(Check::below("Bezout residual", verify_bezout(&dcf), 1e-8));
    let q_ok = c.q.validate().is_ok();
    checks.push(Check { name: "Youla parameter stable", value: if q_ok { 0.0 } else { 1.0 }, limit: 0.0, pass: q_ok });

    let lag = |w: f64| {
        let d = d.clone();
        move |tau: f64| {
            if tau == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                d.pade(tau).map(|p| p.eval_jw(w)).unwrap_or(Complex64::new(f64::NAN, 0.0))
            }
        }
    };
    let plant = build_plant(&plant_loop).map_err(schema_err)?;
    let g0_tf = plant_loop.phi(0).mul(&plant_loop.base_plant_g_wp).map_err(|e| schema_err(e.into()))?;
    let (mut realization, mut member, mut sens, mut lead, mut band) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &w in &grid {
        let k = c.eval_jw(w);
        if let Some(kf) = c.factored_eval_jw(w) {
            let scale = kf.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1e-300);
            realization = realization.max((&k - &kf).iter().fold(0.0f64, |a, z| a.max(z.norm())) / scale);
        } else {
            realization = f64::INFINITY;
        }
        let ka = applied_response(c, d.theta_s, w, lag(w));
        member = member.max(qi_offdiag_at(&plant_loop, &ka, w).map_err(design_err)?);
        match direct_response(&plant.eval_jw(w), &ka, g0_tf.eval_jw(w)) {
            Some(r) => {
                sens = sens.max(offdiag(&r.sensitivity, |i, j| i == j));
                lead = lead.max(offdiag(&r.t_zw0, |i, _| i == 0));
                band = band.max(offdiag(&r.t_zw, |i, j| i == j || i == j + 1));
            }
            None => sens = f64::INFINITY,
        }
    }
    checks.push(Check::below("recursion matches Y_Q^-1 X_Q", realization, 1e-8));
    checks.push(Check::below("controller in the leader-information subspace", member, QI_TOL));
    checks.push(Check::below("(I + GK)^-1 diagonal", sens, 1e-7));
    checks.push(Check::below("leader disturbance reaches z_1 only", lead, 1e-6));
    checks.push(Check::below("T_zw lower bidiagonal", band, 1e-7));

    // The factored closed forms keep degrees low enough for designed controllers;
    // the generic product overflows the degree cap.
    let bounds = closed_form_maps(&dcf, &c.q).and_then(|m| string_stability_bounds(&design, &m));
    match bounds {
        Ok(r) => checks.push(Check { name: "propagation bounds (min slack)", value: r.min_slack, limit: -1e-6, pass: r.all_hold }),
        Err(e) => {
            println!("propagation bounds not computable: {e}");
            checks.push(Check { name: "propagation bounds (min slack)", value: f64::NAN, limit: -1e-6, pass: false });
        }
    }
    Ok(checks)
}

pub fn verify(controller: &Path, scenario: &Path) -> CmdResult {
    let c = load_controller(controller)?.controller;
    let f = load_scenario(scenario)?;
    let checks = verify_checks(&c, &f)?;
    for ch in &checks {
        let relation = if ch.name.contains("slack") { ">=" } else { "<=" };
        println!(
            "{} {:<46} {:.3e} ({relation} {:.1e})",
            if ch.pass { "PASS" } else { "FAIL" },
            ch.name,
            ch.value,
            ch.limit
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(Failure::new(EXIT_VERIFY, format!("{failed} of {} checks failed", checks.len())));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

fn print_metrics(m: &MetricsReport) {
    for (k, p) in m.peak_z.iter().enumerate() {
        let settle = m.settling_s[k].map_or("-".to_string(), |s| format!("{s:.3} s"));
        println!("z_{}: peak {:.6e} m, settles {settle}, peak u {:.6e}", k + 1, p, m.peak_u[k]);
    }
    for (k, a) in m.amplification.iter().enumerate() {
        if let Some(a) = a {
            println!("max|z_{}| / max|z_{}| = {a:.3e}", k + 2, k + 1);
        }
    }
}

/// Steady-state gains of sinusoidal inputs against the loop's frequency
/// response.
fn print_probes(sc: &SimScenario, r: &SimResult) -> CmdResult {
    let mut sources: Vec<(usize, &Signal)> = vec![(0, &sc.u0_profile)];
    sources.extend(sc.disturbances.iter().map(|(k, s)| (*k, s)));
    for (j, s) in sources {
        let Signal::Sine { amplitude, omega_rad_s: w } = *s else { continue };
        if amplitude == 0.0 || w <= 0.0 {
            continue;
        }
        let from = (sc.duration_s - 10.0 * std::f64::consts::TAU / w).max(0.5 * sc.duration_s);
        let fr = frequency_response(sc, w).map_err(design_err)?;
        for k in j.max(1)..=(j + 1).min(sc.cfg.n) {
            let got = sinusoid_amplitude(&r.t, &r.vehicle(k).z, w, from) / amplitude.abs();
            let want = if j == 0 { fr.t_zw0[(k - 1, 0)].norm() } else { fr.t_zw[(k - 1, j - 1)].norm() };
            println!(
                "probe w_{j} at {w} rad/s -> z_{k}: simulated gain {got:.6e}, |T(jw)| {want:.6e}, rel. error {:.3e}",
                (got - want).abs() / want.max(1e-300)
            );
        }
    }
    Ok(())
}

pub fn simulate_cmd(controller: &Path, scenario: &Path, out: &Path, dt: Option<f64>) -> CmdResult {
    let c = load_controller(controller)?.controller;
    let f = load_scenario(scenario)?;
    let sc = f.sim_scenario(c, dt).map_err(schema_err)?;
    let started = Instant::now();
    let r = simulate(&sc).map_err(design_err)?;
    println!("simulated {} s at dt = {} s in {:.2?}", sc.duration_s, sc.dt_s, started.elapsed());
    write_outputs(&r, out).map_err(|e| Failure::new(EXIT_SCHEMA, format!("{}: {e}", out.display())))?;
    println!("wrote {} and four panels to {}", CSV_NAME, out.display());
    print_metrics(&metrics(&r));
    print_probes(&sc, &r)
}

fn peak_between(x: &[f64], t: &[f64], lo: f64, hi: f64) -> f64 {
    x.iter().zip(t).filter(|(_, t)| **t >= lo && **t < hi).fold(0.0f64, |m, (v, _)| m.max(v.abs()))
}

pub fn example(out: &Path, dt: Option<f64>) -> CmdResult {
    let started = Instant::now();
    let (c, designs) = reference_controller().map_err(design_err)?;
    println!("designed 6 local H∞ controllers in {:.2?}", started.elapsed());
    for d in &designs {
        println!("vehicle {}: local H∞ norm {:.6}", d.j, d.norm);
    }
    write_json(
        &ControllerFile { norm: DesignNorm::Hinf, local_costs: designs.iter().map(|d| d.norm).collect(), controller: c.clone() },
        &out.join(CONTROLLER_NAME),
    )?;
    let mut sc = reference_scenario(c).map_err(design_err)?;
    if let Some(dt) = dt {
        sc.dt_s = dt;
    }
    let started = Instant::now();
    let r = simulate(&sc).map_err(design_err)?;
    println!("simulated {} s at dt = {} s in {:.2?}", sc.duration_s, sc.dt_s, started.elapsed());
    write_outputs(&r, out).map_err(|e| Failure::new(EXIT_SCHEMA, format!("{}: {e}", out.display())))?;
    println!("wrote {}, {} and four panels to {}", CONTROLLER_NAME, CSV_NAME, out.display());
    print_metrics(&metrics(&r));
    let z = |k: usize, lo: f64, hi: f64| peak_between(&r.vehicle(k).z, &r.t, lo, hi);
    let t_end = f64::INFINITY;
    let lead = (2..=sc.cfg.n).map(|k| z(k, 0.0, DISTURBANCE_START_S)).fold(0.0, f64::max) / z(1, 0.0, DISTURBANCE_START_S);
    let j = DISTURBED_VEHICLE;
    println!("leader phase: max_k>=2 |z_k| / max|z_1| = {lead:.3e}");
    println!(
        "pulse on w_{j}: max|z_{}| / max|z_{j}| = {:.3e}, max|z_{}| = {:.3e} m",
        j + 2,
        z(j + 2, DISTURBANCE_START_S, t_end) / z(j, DISTURBANCE_START_S, t_end),
        j + 1,
        z(j + 1, DISTURBANCE_START_S, t_end)
    );
    Ok(())
}

/// Default output directory for a command.
pub fn out_or(out: Option<PathBuf>, default: &str) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(default))
}
