//! Minimax of affine vector norms, `min_c max_k ‖b_k + A_k c‖₂`, by a
//! log-barrier method on the epigraph form `‖b_k + A_k c‖ ≤ t`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct MinimaxProblem {
    /// `(A_k, b_k)` per sample.
    pub blocks: Vec<(DMatrix<f64>, DVector<f64>)>,
    /// Box `|c_i| ≤ bound` keeping the iterates finite.
    pub bound: f64,
    /// Weight on `‖c‖²` relative to `t`; breaks ties toward small `c`.
    pub reg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxSolution {
    pub c: DVector<f64>,
    /// `max_k ‖b_k + A_k c‖` at the returned `c`.
    pub value: f64,
    /// Some coefficient ended within 1% of the box.
    pub at_bound: bool,
    pub newton_steps: usize,
}

const GAP_REL: f64 = 1e-10;
const MAX_NEWTON: usize = 200;

pub fn solve_minimax(p: &MinimaxProblem) -> Result<MinimaxSolution> {
    let Some((a0, _)) = p.blocks.first() else {
        return Err(Error::Optimizer("no samples".into()));
    };
    let nv = a0.ncols();
    if p.blocks.iter().any(|(a, b)| a.ncols() != nv || a.nrows() != b.len()) {
        return Err(Error::Optimizer("inconsistent block dimensions".into()));
    }
    // c = c' ⊘ d with d normalizing each column's largest sample norm
    let d: Vec<f64> = (0..nv)
        .map(|i| {
            let m = p.blocks.iter().fold(0.0f64, |m, (a, _)| m.max(a.column(i).norm()));
            if m > 0.0 {
                m
            } else {
                1.0
            }
        })
        .collect();
    let blocks: Vec<(DMatrix<f64>, DVector<f64>)> = p
        .blocks
        .iter()
        .map(|(a, b)| {
            let mut a = a.clone();
            for (i, di) in d.iter().enumerate() {
                a.column_mut(i).scale_mut(1.0 / di);
            }
            (a, b.clone())
        })
        .collect();
    let bnd: Vec<f64> = d.iter().map(|di| p.bound * di).collect();
    let regw: Vec<f64> = d.iter().map(|di| p.reg / (di * di)).collect();

    let b0 = blocks.iter().fold(0.0f64, |m, (_, b)| m.max(b.norm()));
    if b0 == 0.0 {
        return Ok(MinimaxSolution { c: DVector::zeros(nv), value: 0.0, at_bound: false, newton_steps: 0 });
    }
    let dim = nv + 1;
    let mut x = DVector::zeros(dim);
    x[nv] = 1.1 * b0;
    let m_cons = (blocks.len() + nv) as f64;

    let barrier = |x: &DVector<f64>, tau: f64| -> Option<f64> {
        let c = x.rows(0, nv);
        let t = x[nv];
        let mut f = tau * t + tau * (0..nv).map(|i| regw[i] * c[i] * c[i]).sum::<f64>();
        for (a, b) in &blocks {
            let v = b + a * c;
            let g = t * t - v.norm_squared();
            if !(g > 0.0) || t <= 0.0 {
                return None;
            }
            f -= g.ln();
        }
        for i in 0..nv {
            let g = bnd[i] * bnd[i] - c[i] * c[i];
            if !(g > 0.0) {
                return None;
            }
            f -= g.ln();
        }
        Some(f)
    };

    let mut tau = m_cons / x[nv];
    let mut steps = 0;
    loop {
        for _ in 0..MAX_NEWTON {
            let c = x.rows(0, nv).into_owned();
            let t = x[nv];
            let mut grad = DVector::zeros(dim);
            let mut hess = DMatrix::zeros(dim, dim);
            grad[nv] = tau;
            for i in 0..nv {
                grad[i] += 2.0 * tau * regw[i] * c[i];
                hess[(i, i)] += 2.0 * tau * regw[i];
            }
            for (a, b) in &blocks {
                let v = b + a * &c;
                let g = t * t - v.norm_squared();
                let atv = a.transpose() * &v;
                // ∇(−log g) with ∇g = (−2Aᵀv, 2t)
                for i in 0..nv {
                    grad[i] += 2.0 * atv[i] / g;
                }
                grad[nv] -= 2.0 * t / g;
                let ata = a.transpose() * a;
                let g2 = g * g;
                for i in 0..nv {
                    for j in 0..nv {
                        hess[(i, j)] += 4.0 * atv[i] * atv[j] / g2 + 2.0 * ata[(i, j)] / g;
                    }
                    hess[(i, nv)] -= 4.0 * t * atv[i] / g2;
                    hess[(nv, i)] -= 4.0 * t * atv[i] / g2;
                }
                hess[(nv, nv)] += 4.0 * t * t / g2 - 2.0 / g;
            }
            for i in 0..nv {
                let g = bnd[i] * bnd[i] - c[i] * c[i];
                grad[i] += 2.0 * c[i] / g;
                hess[(i, i)] += 2.0 * (bnd[i] * bnd[i] + c[i] * c[i]) / (g * g);
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    let lu = hess.lu();
                    match lu.solve(&(-&grad)) {
                        Some(s) => s,
                        None => return Err(Error::Optimizer("singular Newton system".into())),
                    }
                }
            };
            let dec = -grad.dot(&step);
            steps += 1;
            if !(dec > 0.0) || dec * 0.5 < 1e-14 {
                break;
            }
            let f0 = barrier(&x, tau).expect("iterate stays feasible");
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-14 {
                let xn = &x + s * &step;
                if let Some(f1) = barrier(&xn, tau) {
                    if f1 <= f0 - 0.25 * s * dec {
                        x = xn;
                        moved = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if m_cons / tau < GAP_REL * x[nv].max(1e-300) {
            break;
        }
        tau *= 10.0;
        if tau.is_infinite() {
            break;
        }
    }
    let cs = x.rows(0, nv).into_owned();
    let value = blocks.iter().fold(0.0f64, |m, (a, b)| m.max((b + a * &cs).norm()));
    let at_bound = (0..nv).any(|i| cs[i].abs() > 0.99 * bnd[i]);
    let c = DVector::from_iterator(nv, (0..nv).map(|i| cs[i] / d[i]));
    Ok(MinimaxSolution { c, value, at_bound, newton_steps: steps })
}
