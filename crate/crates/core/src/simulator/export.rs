//! Trajectory CSV and hand-written SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::SimResult;

pub const CSV_NAME: &str = "trajectories.csv";
pub const PANEL_NAMES: [&str; 4] = ["inputs.svg", "spacing_error.svg", "position.svg", "velocity.svg"];

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 340.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 110.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;
/// Min/max buckets per series; keeps files small without losing pulses.
const BUCKETS: usize = 1200;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Columns `t`, then `y_k, v_k, z_k, u_k` for `k = 0..=n` (the leader first,
/// its `z` is zero), then the disturbances `w_1..w_n`.
pub fn write_csv<W: io::Write>(r: &SimResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = r.n();
    let mut header = vec!["t".to_string()];
    for k in 0..=n {
        header.extend(["y", "v", "z", "u"].iter().map(|s| format!("{s}_{k}")));
    }
    header.extend((1..=n).map(|k| format!("w_{k}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for (i, t) in r.t.iter().enumerate() {
        row.clear();
        row.push(t.to_string());
        for k in 0..=n {
            let tr = r.vehicle(k);
            row.extend([tr.y[i], tr.v[i], tr.z[i], tr.u[i]].iter().map(f64::to_string));
        }
        row.extend(r.vehicles.iter().map(|tr| tr.w[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

struct Series<'a> {
    label: String,
    data: &'a [f64],
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn panel(title: &str, ylabel: &str, t: &[f64], series: &[Series]) -> String {
    let (t0, t1) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let t1 = if t1 > t0 { t1 } else { t0 + 1.0 };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for &v in s.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) || hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1e-300) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        lo = c - 1.0;
        hi = c + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - t0) / (t1 - t0) * pw;
    let py = |y: f64| MARGIN_T + (hi - y) / (hi - lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{title}</text>"#, MARGIN_L + pw / 2.0);
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for (step, horizontal) in [(nice_step(t1 - t0), false), (nice_step(hi - lo), true)] {
        let (a, b) = if horizontal { (lo, hi) } else { (t0, t1) };
        let mut v = (a / step).ceil() * step;
        while v <= b + 1e-9 * step {
            if horizontal {
                let y = py(v);
                let _ = writeln!(
                    s,
                    r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                    MARGIN_L + pw,
                    MARGIN_L - 6.0,
                    y + 4.0,
                    label(v)
                );
            } else {
                let x = px(v);
                let _ = writeln!(
                    s,
                    r##"<line x1="{x:.2}" y1="{MARGIN_T}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                    MARGIN_T + ph,
                    MARGIN_T + ph + 16.0,
                    label(v)
                );
            }
            v += step;
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">t (s)</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{ylabel}</text>"#,
        MARGIN_T + ph / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = String::new();
        let len = ser.data.len().min(t.len());
        let per = len.div_ceil(BUCKETS).max(1);
        for start in (0..len).step_by(per) {
            let end = (start + per).min(len);
            let chunk = &ser.data[start..end];
            let (mut imin, mut imax) = (0, 0);
            for (j, v) in chunk.iter().enumerate() {
                if *v < chunk[imin] {
                    imin = j;
                }
                if *v > chunk[imax] {
                    imax = j;
                }
            }
            let (first, second) = if imin <= imax { (imin, imax) } else { (imax, imin) };
            for j in if first == second { vec![first] } else { vec![first, second] } {
                let _ = write!(pts, "{:.2},{:.2} ", px(t[start + j]), py(chunk[j]));
            }
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{}"/>"#, pts.trim_end());
        let ly = MARGIN_T + 14.0 + 16.0 * i as f64;
        let lx = MARGIN_L + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

/// The four panels: leader acceleration with the disturbances, spacing
/// errors, positions and velocities. Returned as `(file name, svg)`.
pub fn svg_panels(r: &SimResult) -> Vec<(&'static str, String)> {
    let n = r.n();
    let mut inputs = vec![Series { label: "u_0".into(), data: &r.leader.u }];
    inputs.extend(
        r.vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.w.iter().any(|x| *x != 0.0))
            .map(|(i, v)| Series { label: format!("w_{}", i + 1), data: &v.w }),
    );
    let per = |f: fn(&super::Trace) -> &[f64], from: usize| -> Vec<Series> {
        (from..=n).map(|k| Series { label: format!("{k}"), data: f(r.vehicle(k)) }).collect()
    };
    vec![
        (PANEL_NAMES[0], panel("Leader acceleration and disturbances", "m/s^2", &r.t, &inputs)),
        (PANEL_NAMES[1], panel("Spacing errors z_k", "m", &r.t, &per(|v| &v.z, 1))),
        (PANEL_NAMES[2], panel("Positions y_k", "m", &r.t, &per(|v| &v.y, 0))),
        (PANEL_NAMES[3], panel("Velocities v_k", "m/s", &r.t, &per(|v| &v.v, 0))),
    ]
}

pub fn write_svg_panels(r: &SimResult, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, svg) in svg_panels(r) {
        fs::write(dir.join(name), svg)?;
    }
    Ok(())
}

/// CSV plus the four panels into `dir`.
pub fn write_outputs(r: &SimResult, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(r, fs::File::create(dir.join(CSV_NAME))?).map_err(io::Error::other)?;
    write_svg_panels(r, dir)
}
