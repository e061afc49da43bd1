use serde::{Deserialize, Serialize};

use super::SimResult;

/// Settling band, as a fraction of the channel peak.
const SETTLING_BAND: f64 = 0.02;
/// Channels whose peak is below this fraction of the largest peak are
/// rounding noise.
const NOISE_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `max_t |z_k|` for `k = 1..=n`.
    pub peak_z: Vec<f64>,
    pub peak_u: Vec<f64>,
    /// `z_k` rises above the rounding floor.
    pub active: Vec<bool>,
    /// Time after which `|z_k|` stays within 2% of its peak; `None` for an
    /// inactive channel.
    pub settling_s: Vec<Option<f64>>,
    /// `max|z_{k+1}| / max|z_k|` for `k = 1..n`; `None` when `z_k` is inactive.
    pub amplification: Vec<Option<f64>>,
}

fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn metrics(r: &SimResult) -> MetricsReport {
    let peak_z: Vec<f64> = r.vehicles.iter().map(|v| peak(&v.z)).collect();
    let peak_u = r.vehicles.iter().map(|v| peak(&v.u)).collect();
    let top = peak_z.iter().fold(0.0f64, |m, p| m.max(*p));
    let active: Vec<bool> = peak_z.iter().map(|&p| p > 0.0 && p > NOISE_FLOOR * top).collect();
    let settling_s = r
        .vehicles
        .iter()
        .zip(peak_z.iter().zip(&active))
        .map(|(v, (&p, &on))| {
            if !on {
                return None;
            }
            let last = v.z.iter().rposition(|x| x.abs() > SETTLING_BAND * p).unwrap_or(0);
            Some(r.t.get(last + 1).copied().unwrap_or(r.t[last]))
        })
        .collect();
    let amplification = (1..peak_z.len()).map(|k| active[k - 1].then(|| peak_z[k] / peak_z[k - 1])).collect();
    MetricsReport { peak_z, peak_u, active, settling_s, amplification }
}

/// Amplitude of the `ω` component of `x`, fitted by least squares over the
/// samples with `t ≥ from_s`.
pub fn sinusoid_amplitude(t: &[f64], x: &[f64], omega: f64, from_s: f64) -> f64 {
    let (mut ss, mut cc, mut sc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &xi) in t.iter().zip(x).filter(|(ti, _)| **ti >= from_s) {
        let (s, c) = (omega * ti).sin_cos();
        ss += s * s;
        cc += c * c;
        sc += s * c;
        xs += xi * s;
        xc += xi * c;
    }
    let det = ss * cc - sc * sc;
    if det == 0.0 {
        return 0.0;
    }
    let a = (xs * cc - xc * sc) / det;
    let b = (xc * ss - xs * sc) / det;
    a.hypot(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::Trace;

    fn result(z: Vec<Vec<f64>>) -> SimResult {
        let len = z[0].len();
        SimResult {
            t: (0..len).map(|i| i as f64 * 0.1).collect(),
            headway_s: 0.0,
            leader: Trace::default(),
            vehicles: z.into_iter().map(|z| Trace { u: vec![0.0; z.len()], z, ..Trace::default() }).collect(),
        }
    }

    #[test]
    fn zero_run_has_zero_peaks() {
        let m = metrics(&result(vec![vec![0.0; 5]; 3]));
        assert_eq!(m.peak_z, vec![0.0; 3]);
        assert_eq!(m.active, vec![false; 3]);
        assert_eq!(m.settling_s, vec![None; 3]);
        assert_eq!(m.amplification, vec![None, None]);
    }

    #[test]
    fn peaks_settling_and_ratios() {
        let m = metrics(&result(vec![vec![0.0, 2.0, -1.0, 0.01, 0.0], vec![0.0, 0.5, 0.0, 0.0, 0.0]]));
        assert_eq!(m.peak_z, vec![2.0, 0.5]);
        assert_eq!(m.amplification, vec![Some(0.25)]);
        let noisy = metrics(&result(vec![vec![0.0, 1.0, 0.0], vec![0.0, 1e-13, 0.0], vec![0.0; 3]]));
        assert_eq!(noisy.active, vec![true, false, false]);
        assert_eq!(noisy.amplification, vec![Some(1e-13), None]);
        assert!((m.settling_s[0].unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn amplitude_fit_recovers_a_phase_shifted_sine() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let x: Vec<f64> = t.iter().map(|t| 0.7 * (2.0 * t + 0.4).sin() + 1e-3).collect();
        assert!((sinusoid_amplitude(&t, &x, 2.0, 5.0) - 0.7).abs() < 1e-3);
    }
}
