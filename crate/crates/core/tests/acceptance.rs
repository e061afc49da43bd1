//! Acceptance run: one PASS/FAIL line per criterion, with the measured value
//! next to its tolerance. Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use platoon_core::coprime::{platoon_dcf, platoon_dcf_unchecked, scalar_dcf, scalar_dcf_unchecked, verify_bezout, PlatoonDcf};
use platoon_core::delay::{applied_response, DelayConfig};
use platoon_core::platoon_model::{build_plant, default_g_wp, PlatoonConfig, REF_PHI_S, REF_THETA_S};
use platoon_core::simulator::{
    reference_controller, reference_scenario, simulate, SimResult, DISTURBANCE_START_S, DISTURBED_VEHICLE,
    REFERENCE_ALPHA, REFERENCE_HEADWAY_S,
};
use platoon_core::synthesis::{
    build_controller, closed_form_maps, closed_loop_direct, controller_tfm, direct_response, full_q_h2_optimum,
    h2_design, homogeneous_h2_optimal, qi_offdiag_at, string_stability_bounds, two_parameter_optimum, DesignNorm,
    DiagonalYoula, LeaderInfoController, QBasis, QI_TOL,
};
use platoon_core::tf_core::freq::{check_grid, design_grid, logspace};
use platoon_core::tf_core::norms::h2_norm_sq;
use platoon_core::tf_core::{hinf_norm, Polynomial, RationalFn};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn dcf(cfg: &PlatoonConfig, alpha: f64) -> PlatoonDcf {
    platoon_dcf(cfg, &scalar_dcf(&cfg.base_plant_g_wp, alpha).unwrap()).unwrap()
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn max_off(m: &DMatrix<Complex64>, keep: impl Fn(usize, usize) -> bool) -> f64 {
    let mut out = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !keep(i, j) {
                out = out.max(m[(i, j)].norm());
            }
        }
    }
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn random_q(rng: &mut ChaCha8Rng, n: usize) -> DiagonalYoula {
    let q = (0..n)
        .map(|_| {
            let lag = RationalFn::first_order_lag(1.0, rng.gen_range(0.5..5.0)).unwrap();
            lag.scale(rng.gen_range(-1.0..1.0)).add(&RationalFn::constant(rng.gen_range(-1.0..1.0))).unwrap()
        })
        .collect();
    DiagonalYoula::new(q).unwrap()
}

fn bezout_at_default_pole() -> Outcome {
    let mut worst = 0.0f64;
    let mut strong = 0.0f64;
    let mut parts = Vec::new();
    for h in [0.0, 0.5] {
        let cfg = PlatoonConfig::reference_string(6, h, true, 3).unwrap();
        let s = scalar_dcf_unchecked(&cfg.base_plant_g_wp, 1.0).unwrap();
        let r = verify_bezout(&platoon_dcf_unchecked(&cfg, &s).unwrap());
        let r8 = verify_bezout(&dcf(&cfg, REFERENCE_ALPHA));
        parts.push(format!("h={h}: {r:.2e}"));
        worst = worst.max(r);
        strong = strong.max(r8);
    }
    outcome(
        worst < 1e-8,
        format!("residual at α=1 {} (< 1e-8); at α={REFERENCE_ALPHA} {strong:.2e}", parts.join(", ")),
    )
}

fn random_designs_are_diagonal() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = 2 + case % 3;
        let cfg = PlatoonConfig::reference_string(n, if case % 2 == 0 { 0.0 } else { 0.5 }, false, 3).unwrap();
        let d = dcf(&cfg, 1.0);
        let k = controller_tfm(&build_controller(&d, &random_q(&mut rng, n)).unwrap()).unwrap();
        for w in check_grid() {
            let r = closed_loop_direct(&cfg, &k, w).unwrap();
            worst = worst.max(max_off(&r.sensitivity, |i, j| i == j));
        }
    }
    outcome(worst < 1e-7, format!("max off-diagonal of (I+GK)^-1 {worst:.2e} (< 1e-7) over 20 random Q"))
}

fn closed_forms_match_direct() -> Outcome {
    let cfg = PlatoonConfig::reference_string(4, 0.5, false, 3).unwrap();
    let d = dcf(&cfg, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let q = random_q(&mut rng, 4);
        let k = controller_tfm(&build_controller(&d, &q).unwrap()).unwrap();
        let cf = closed_form_maps(&d, &q).unwrap();
        for w in check_grid() {
            let r = closed_loop_direct(&cfg, &k, w).unwrap();
            for (a, b) in [
                (cf.t_zw.eval_jw(w), &r.t_zw),
                (cf.t_uw.eval_jw(w), &r.t_uw),
                (cf.t_zw0.eval_jw(w), &r.t_zw0),
                (cf.t_uw0.eval_jw(w), &r.t_uw0),
            ] {
                worst = worst.max(max_abs(&(&a - b)) / max_abs(b).max(1e-300));
            }
        }
    }
    outcome(worst < 1e-8, format!("max entrywise gap {worst:.2e} (< 1e-8, relative to each map)"))
}

fn diagonal_matches_two_parameter() -> Outcome {
    let grid = design_grid();
    let (mut worst, mut substituted) = (0.0f64, 0.0f64);
    let mut parts = Vec::new();
    for h in [0.0, REFERENCE_HEADWAY_S] {
        let d = dcf(&PlatoonConfig::reference_string(3, h, false, 3).unwrap(), 1.0);
        for j in 1..=3 {
            let r = two_parameter_optimum(&d, j, DesignNorm::Hinf, QBasis::default(), &grid).unwrap();
            parts.push(format!("h={h} j={j}: {:.4}/{:.4}", r.diagonal_cost, r.joint_cost));
            worst = worst.max(r.rel_gap);
            substituted = substituted.max(rel(r.substituted_cost, r.joint_cost));
        }
    }
    outcome(
        worst < 1e-3,
        format!(
            "max relative gap {worst:.2e} (< 1e-3); diagonal/joint {}; Q_jj - Q_j,j+1 H^-1 vs joint {substituted:.1e}",
            parts.join(", ")
        ),
    )
}

fn homogeneous_h2() -> Outcome {
    let basis = QBasis::default();
    let (mut gap, mut consistency) = (0.0f64, 0.0f64);
    for n in [2, 3] {
        let cfg = PlatoonConfig::homogeneous(n, 0.0, default_g_wp(0.0, 3).unwrap()).unwrap();
        let d = dcf(&cfg, 1.0);
        let diag = h2_design(&d, basis).unwrap().cost.powi(2);
        let (_, full) = full_q_h2_optimum(&d, basis).unwrap();
        let hom = homogeneous_h2_optimal(&cfg, &d, basis).unwrap();
        gap = gap.max(rel(diag, full));
        consistency = consistency.max(rel(diag, hom.bound_sq)).max(rel(hom.full_cost_sq, hom.bound_sq));
    }
    outcome(
        gap < 1e-2 && consistency < 1e-6,
        format!("diagonal vs full {gap:.2e} (< 1e-2); (2n-1) x per-channel consistency {consistency:.2e} (< 1e-6)"),
    )
}

fn propagation_bounds(reference: &LeaderInfoController) -> Outcome {
    let design = PlatoonConfig::reference_string(6, REFERENCE_HEADWAY_S, true, 3).unwrap();
    let d = dcf(&design, REFERENCE_ALPHA);
    let r = string_stability_bounds(&design, &closed_form_maps(&d, &reference.q).unwrap()).unwrap();

    let cfg = PlatoonConfig::homogeneous(6, 0.0, default_g_wp(0.0, 3).unwrap()).unwrap();
    let hd = dcf(&cfg, 1.0);
    let q_o = homogeneous_h2_optimal(&cfg, &hd, QBasis::default()).unwrap().q_o;
    let hr = string_stability_bounds(&cfg, &closed_form_maps(&hd, &DiagonalYoula::uniform(6, q_o).unwrap()).unwrap()).unwrap();
    let b: Vec<f64> = (3..=6).map(|k| hr.entries.iter().find(|e| e.j == 1 && e.k == k).unwrap().bound).collect();
    let spread = b.iter().map(|x| rel(*x, b[0])).fold(0.0, f64::max);
    outcome(
        r.min_slack >= -1e-6 && hr.min_slack >= -1e-6 && spread < 1e-10,
        format!(
            "designed min slack {:.3e} over {} pairs (>= -1e-6); identical-vehicle bound spread for k-j in 2..5 {spread:.1e} (< 1e-10)",
            r.min_slack,
            r.entries.len()
        ),
    )
}

fn sup_gap(a: &SimResult, b: &SimResult) -> f64 {
    let (mut gap, mut scale) = (0.0f64, 0.0f64);
    for (va, vb) in a.vehicles.iter().zip(&b.vehicles) {
        for (x, y) in va.z.iter().zip(&vb.z) {
            gap = gap.max((x - y).abs());
            scale = scale.max(x.abs());
        }
    }
    gap / scale
}

/// Worst (S-membership, sensitivity off-diagonal, leader off-diagonal) over
/// the grid with the delays as Padé lags on the physical plant.
fn structure(c: &LeaderInfoController) -> (f64, f64, f64) {
    let d = DelayConfig::new(REF_THETA_S, REF_PHI_S, 3).unwrap();
    let phys = PlatoonConfig::reference_string(6, REFERENCE_HEADWAY_S, false, 3).unwrap();
    let plant_loop = d.with_plant_delay(&phys, &phys.base_plant_g_wp, REF_PHI_S).unwrap();
    let g = build_plant(&plant_loop).unwrap();
    let g0 = plant_loop.phi(0).mul(&plant_loop.base_plant_g_wp).unwrap();
    let (mut member, mut sens, mut lead) = (0.0f64, 0.0f64, 0.0f64);
    for w in check_grid() {
        let lag = |tau: f64| d.pade(tau).unwrap().eval_jw(w);
        let k = applied_response(c, REF_THETA_S, w, lag);
        member = member.max(qi_offdiag_at(&plant_loop, &k, w).unwrap());
        let r = direct_response(&g.eval_jw(w), &k, g0.eval_jw(w)).unwrap();
        sens = sens.max(max_off(&r.sensitivity, |i, j| i == j));
        lead = lead.max(max_off(&r.t_zw0, |i, _| i == 0));
    }
    (member, sens, lead)
}

fn delay_compensation(reference: &LeaderInfoController) -> Outcome {
    let mut raw = reference.clone();
    raw.delays = None;
    let (m_raw, s_raw, _) = structure(&raw);
    let (m, s, lead) = structure(reference);
    let sc = reference_scenario(reference.clone()).unwrap();
    let gap = sup_gap(&simulate(&sc).unwrap(), &simulate(&sc.rational_counterpart().unwrap()).unwrap());
    outcome(
        m_raw > QI_TOL && s_raw > 1e-7 && lead < 1e-6 && gap < 0.05,
        format!(
            "uncompensated: S-membership {m_raw:.2e}, (I+GK)^-1 off-diagonal {s_raw:.2e} (must exceed {QI_TOL:.0e}, 1e-7); \
             compensated: leader off-diagonal {lead:.2e} (< 1e-6), S-membership {m:.1e}, (I+GK)^-1 off-diagonal {s:.1e}; \
             exact vs rational sup-norm {:.2}% (< 5%)",
            100.0 * gap
        ),
    )
}

fn peak_between(r: &SimResult, k: usize, lo: f64, hi: f64) -> f64 {
    r.t.iter()
        .zip(&r.vehicles[k - 1].z)
        .filter(|(t, _)| **t >= lo && **t < hi)
        .fold(0.0f64, |a, (_, z)| a.max(z.abs()))
}

fn reference_run(reference: &LeaderInfoController) -> Outcome {
    let sc = reference_scenario(reference.clone()).unwrap();
    let start = Instant::now();
    let r = simulate(&sc).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (t0, t1) = (DISTURBANCE_START_S, sc.duration_s + 1.0);
    let z = |k| peak_between(&r, k, t0, t1);
    let (z4, z5, z6) = (z(DISTURBED_VEHICLE), z(DISTURBED_VEHICLE + 1), z(DISTURBED_VEHICLE + 2));
    let z1 = peak_between(&r, 1, 0.0, t0);
    let leak = (2..=6).map(|k| peak_between(&r, k, 0.0, t0)).fold(0.0, f64::max);
    outcome(
        z4 > 0.0 && z5 > 0.0 && z6 < 1e-4 * z4 && leak < 1e-4 * z1 && secs < 60.0,
        format!(
            "w4: max z4 {z4:.3}, z5 {z5:.3}, z6/z4 {:.1e} (< 1e-4); leader only: max z_k/z1 {:.1e} (< 1e-4); run {secs:.1} s (< 60 s)",
            z6 / z4,
            leak / z1
        ),
    )
}

fn random_stable(rng: &mut ChaCha8Rng) -> RationalFn {
    let mut roots = Vec::new();
    for _ in 0..rng.gen_range(0..3) {
        roots.push(Complex64::new(-rng.gen_range(0.1..10.0), 0.0));
    }
    for _ in 0..rng.gen_range(if roots.is_empty() { 1 } else { 0 }..3) {
        let (wn, zeta): (f64, f64) = (rng.gen_range(0.1..10.0), rng.gen_range(0.3..1.0));
        let p = Complex64::new(-zeta * wn, wn * (1.0 - zeta * zeta).sqrt());
        roots.push(p);
        roots.push(p.conj());
    }
    let den = Polynomial::from_roots(&roots);
    let num: Vec<f64> = (0..roots.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
    RationalFn::new(Polynomial::new(num), den).unwrap()
}

fn norms_against_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grid = logspace(-3.0, 3.0, 2000);
    let mut hinf_worst = 0.0f64;
    let mut systems = 0;
    while systems < 100 {
        let f = random_stable(&mut rng);
        if f.is_zero() {
            continue;
        }
        let sampled = grid.iter().fold(f.eval_jw(0.0).norm(), |a, &w| a.max(f.eval_jw(w).norm()));
        hinf_worst = hinf_worst.max(rel(hinf_norm(&f).unwrap(), sampled));
        systems += 1;
    }
    let mut h2_worst = 0.0f64;
    for a in [0.01, 0.3, 1.0, 7.0, 250.0] {
        let f = RationalFn::from_coeffs(&[1.0], &[a, 1.0]).unwrap();
        h2_worst = h2_worst.max(rel(h2_norm_sq(&f).unwrap(), 1.0 / (2.0 * a)));
    }
    outcome(
        hinf_worst < 1e-4 && h2_worst < 1e-8,
        format!("H∞ vs 2000-point grid {hinf_worst:.2e} (< 1e-4, 100 systems); H2 vs 1/(2a) {h2_worst:.2e} (< 1e-8)"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let (reference, _) = reference_controller().unwrap();
    println!("reference design: {:.1} s", start.elapsed().as_secs_f64());

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("Bezout validity, delayed six-vehicle string", Box::new(bezout_at_default_pole)),
        ("diagonal sensitivity for random diagonal Q", Box::new(random_designs_are_diagonal)),
        ("closed-form maps equal direct computation", Box::new(closed_forms_match_direct)),
        ("diagonal optimum equals two-parameter optimum", Box::new(diagonal_matches_two_parameter)),
        ("identical-vehicle H2 optimum", Box::new(homogeneous_h2)),
        ("propagation bounds", Box::new(|| propagation_bounds(&reference))),
        ("delay compensation", Box::new(|| delay_compensation(&reference))),
        ("reference run structure", Box::new(|| reference_run(&reference))),
        ("norm computations", Box::new(norms_against_oracles)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {} {name}: {} [{:.1} s]", i + 1, o.detail, t.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
