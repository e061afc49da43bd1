use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::socp::{solve_minimax, MinimaxProblem};
use super::{closed_loop, DiagonalYoula, QBasis};
use crate::coprime::PlatoonDcf;
use crate::error::{Error, Result};
use crate::platoon_model::PlatoonConfig;
use crate::tf_core::norms::h2_norm_sq;
use crate::tf_core::{h2_inner, h2_norm_tfm, hinf_report_tfm, RationalFn, TfMatrix};

/// Box on the coefficients in the orthogonal coordinates of the basis;
/// reaching it means the optimizer wants to leave the span.
pub const COEFF_BOUND: f64 = 1e4;
/// Exact and sampled optima must agree this closely before the exchange
/// loop stops adding peak frequencies.
const EXCHANGE_TOL: f64 = 1e-3;
const MAX_EXCHANGE: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignNorm {
    H2,
    Hinf,
}

/// One free parameter `Q = Σ c_i b_i` entering every row through `t2[r]`.
#[derive(Clone, Debug)]
struct Slot {
    t2: Vec<RationalFn>,
}

/// Rows `F_r = t1[r] + Σ_s t2_s[r] Q_s` affine in the basis coefficients.
#[derive(Clone, Debug)]
struct Affine {
    t1: Vec<RationalFn>,
    slots: Vec<Slot>,
    basis: QBasis,
}

impl Affine {
    fn nvars(&self) -> usize {
        self.slots.len() * self.basis.len()
    }

    fn params(&self, c: &[f64]) -> Result<Vec<RationalFn>> {
        let nb = self.basis.len();
        (0..self.slots.len()).map(|s| self.basis.combine(&c[s * nb..(s + 1) * nb])).collect()
    }

    fn assemble(&self, c: &[f64]) -> Result<Vec<RationalFn>> {
        let q = self.params(c)?;
        let mut rows = Vec::with_capacity(self.t1.len());
        for (r, t1) in self.t1.iter().enumerate() {
            let mut f = t1.clone();
            for (s, slot) in self.slots.iter().enumerate() {
                f = f.add(&slot.t2[r].mul(&q[s])?)?;
            }
            rows.push(f);
        }
        Ok(rows)
    }

    /// Original-basis coefficients from orthogonal-basis ones, slot by slot.
    fn to_original(&self, c: &DVector<f64>) -> Vec<f64> {
        let nb = self.basis.len();
        let (_, t) = self.basis.orthogonal_elements();
        let mut out = Vec::with_capacity(c.len());
        for sl in 0..self.slots.len() {
            out.extend((&t * c.rows(sl * nb, nb)).iter().copied());
        }
        out
    }

    /// Real-stacked samples `(A_k, b_k)` at each frequency, in the
    /// orthogonal coordinates of the basis.
    fn blocks(&self, freqs: &[f64]) -> Vec<(DMatrix<f64>, DVector<f64>)> {
        let rows = self.t1.len();
        let nb = self.basis.len();
        let (basis, _) = self.basis.orthogonal_elements();
        freqs
            .iter()
            .map(|&w| {
                let mut a = DMatrix::zeros(2 * rows, self.nvars());
                let mut b = DVector::zeros(2 * rows);
                let bv: Vec<_> = basis.iter().map(|e| e.eval_jw(w)).collect();
                for r in 0..rows {
                    let t1 = self.t1[r].eval_jw(w);
                    b[2 * r] = t1.re;
                    b[2 * r + 1] = t1.im;
                    for (s, slot) in self.slots.iter().enumerate() {
                        let t2 = slot.t2[r].eval_jw(w);
                        for (i, bi) in bv.iter().enumerate() {
                            let v = t2 * bi;
                            a[(2 * r, s * nb + i)] = v.re;
                            a[(2 * r + 1, s * nb + i)] = v.im;
                        }
                    }
                }
                (a, b)
            })
            .collect()
    }

    /// Minimax on the grid, refined by adding the certified peak frequency
    /// until sampled and exact norms agree.
    fn hinf(&self, grid: &[f64]) -> Result<AffineOptimum> {
        let mut freqs = grid.to_vec();
        let mut rounds = 0;
        loop {
            rounds += 1;
            let blocks = self.blocks(&freqs);
            let scale = blocks.iter().fold(0.0f64, |m, (_, b)| m.max(b.norm()));
            let sol = solve_minimax(&MinimaxProblem { blocks, bound: COEFF_BOUND, reg: 1e-10 * scale.max(1e-300) })?;
            let c = self.to_original(&sol.c);
            let rows = self.assemble(&c)?;
            let rep = hinf_report_tfm(&TfMatrix::column(&rows))?;
            let gap = (rep.norm - sol.value) / rep.norm.max(1e-300);
            if gap <= EXCHANGE_TOL || rounds >= MAX_EXCHANGE || !rep.peak_freq.is_finite() {
                return Ok(AffineOptimum {
                    params: self.params(&c)?,
                    coeffs: c,
                    cost: rep.norm,
                    sampled_cost: sol.value,
                    at_bound: sol.at_bound,
                    rounds,
                });
            }
            freqs.push(rep.peak_freq);
            freqs.push(rep.peak_freq * 0.999);
            freqs.push(rep.peak_freq * 1.001);
        }
    }

    /// Exact least squares of `Σ_r ‖F_r‖₂²` from the Gram matrix of the
    /// basis responses; minimum-norm solution on rank deficiency.
    fn h2(&self) -> Result<AffineOptimum> {
        let nv = self.nvars();
        let (basis, _) = self.basis.orthogonal_elements();
        let strict = |f: &RationalFn| f.is_zero() || f.is_strictly_proper();
        // g[v][r]: response of variable v in row r
        let mut g: Vec<Vec<RationalFn>> = Vec::with_capacity(nv);
        for slot in &self.slots {
            for b in &basis {
                let col = slot.t2.iter().map(|t| t.mul(b)).collect::<std::result::Result<Vec<_>, _>>()?;
                g.push(col);
            }
        }
        if !self.t1.iter().all(strict) || !g.iter().flatten().all(strict) {
            return Err(Error::InfiniteCost);
        }
        let inner = |a: &RationalFn, b: &RationalFn| -> Result<f64> {
            if a.is_zero() || b.is_zero() {
                Ok(0.0)
            } else {
                Ok(h2_inner(a, b)?)
            }
        };
        let rows = self.t1.len();
        let mut gram = DMatrix::zeros(nv, nv);
        let mut rhs = DVector::zeros(nv);
        for a in 0..nv {
            for b in a..nv {
                let mut s = 0.0;
                for r in 0..rows {
                    s += inner(&g[a][r], &g[b][r])?;
                }
                gram[(a, b)] = s;
                gram[(b, a)] = s;
            }
            for r in 0..rows {
                rhs[a] += inner(&g[a][r], &self.t1[r])?;
            }
        }
        let svd = gram.svd(true, true);
        let smax = svd.singular_values.max();
        let c = svd
            .solve(&(-&rhs), 1e-13 * smax.max(1e-300))
            .map_err(|e| Error::Optimizer(e.to_string()))?;
        let at_bound = c.iter().any(|x| x.abs() > 0.99 * COEFF_BOUND);
        let c = self.to_original(&c);
        let assembled = self.assemble(&c)?;
        let mut cost = 0.0;
        for f in &assembled {
            if !f.is_zero() {
                cost += h2_norm_sq(f)?;
            }
        }
        Ok(AffineOptimum {
            params: self.params(&c)?,
            at_bound,
            coeffs: c,
            cost: cost.sqrt(),
            sampled_cost: cost.sqrt(),
            rounds: 1,
        })
    }

    fn solve(&self, norm: DesignNorm, grid: &[f64]) -> Result<AffineOptimum> {
        match norm {
            DesignNorm::H2 => self.h2(),
            DesignNorm::Hinf => self.hinf(grid),
        }
    }
}

#[derive(Clone, Debug)]
struct AffineOptimum {
    params: Vec<RationalFn>,
    coeffs: Vec<f64>,
    /// Exact norm of the assembled rows (H2 norm, not squared).
    cost: f64,
    sampled_cost: f64,
    at_bound: bool,
    rounds: usize,
}

/// Result of one local problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDesign {
    /// Vehicle index, 1-based.
    pub j: usize,
    pub q: RationalFn,
    pub coeffs: Vec<f64>,
    /// Certified norm of the assembled local map.
    pub norm: f64,
    /// Optimum over the sampled frequencies.
    pub grid_norm: f64,
    /// Some coefficient sits at the box: richer basis could do better.
    pub basis_too_small: bool,
    pub exchange_rounds: usize,
}

fn check_j(dcf: &PlatoonDcf, j: usize) -> Result<()> {
    if j == 0 || j > dcf.size() {
        return Err(Error::InvalidParameter(format!("vehicle index {j} outside 1..={}", dcf.size())));
    }
    Ok(())
}

/// `[T_{z_j w_j}; T_{u_j w_j}] = [−ỸÑHΦ_j; −X̃Ñ] + [HNÑHΦ_j; −HMÑ] Q_jj`.
fn local_affine(dcf: &PlatoonDcf, j: usize, basis: QBasis, with_u: bool) -> Result<Affine> {
    let s = &dcf.scalar;
    let h = dcf.headway.tf();
    let phi = dcf.phi(j);
    let mut t1 = vec![RationalFn::product(&[&s.y, &s.n, &h, phi])?.neg()];
    let mut t2 = vec![RationalFn::product(&[&h, &s.n, &s.n, &h, phi])?];
    if with_u {
        t1.push(s.x.mul(&s.n)?.neg());
        t2.push(RationalFn::product(&[&h, &s.m, &s.n])?.neg());
    }
    Ok(Affine { t1, slots: vec![Slot { t2 }], basis })
}

/// The j-th local H∞ problem over the basis.
pub fn local_hinf_design(dcf: &PlatoonDcf, j: usize, basis: QBasis, grid: &[f64]) -> Result<LocalDesign> {
    check_j(dcf, j)?;
    let opt = local_affine(dcf, j, basis, true)?.hinf(grid)?;
    Ok(LocalDesign {
        j,
        q: opt.params[0].clone(),
        coeffs: opt.coeffs,
        norm: opt.cost,
        grid_norm: opt.sampled_cost,
        basis_too_small: opt.at_bound,
        exchange_rounds: opt.rounds,
    })
}

/// All local H∞ problems, solved in parallel; results are in vehicle order
/// and do not depend on scheduling.
pub fn hinf_design_all(dcf: &PlatoonDcf, basis: QBasis, grid: &[f64]) -> Result<Vec<LocalDesign>> {
    (1..=dcf.size()).into_par_iter().map(|j| local_hinf_design(dcf, j, basis, grid)).collect()
}

/// Single-channel optimum `min ‖T_{z_j w_j}‖` over `Q_jj` in the basis.
pub fn local_optimal_qjj(
    dcf: &PlatoonDcf,
    j: usize,
    norm: DesignNorm,
    basis: QBasis,
    grid: &[f64],
) -> Result<(RationalFn, f64)> {
    check_j(dcf, j)?;
    let opt = local_affine(dcf, j, basis, false)?.solve(norm, grid)?;
    Ok((opt.params[0].clone(), opt.cost))
}

/// Diagonal-only versus joint `(Q_jj, Q_{j,j+1})` optimization of
/// `‖T_{z_j w_j}‖`, both over the same basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoParameterReport {
    pub j: usize,
    pub diagonal_cost: f64,
    pub joint_cost: f64,
    /// Cost of the diagonal parameter `Q_jj − Q_{j,j+1}H⁻¹` built from the
    /// joint optimum.
    pub substituted_cost: f64,
    pub q_substituted: RationalFn,
    pub rel_gap: f64,
}

/// With a full Youla parameter the row-j entry of `T_zw` is
/// `−ỸÑHΦ_j + HNÑΦ_j (Q_jj H − Q_{j,j+1})`; only that combination enters.
pub fn two_parameter_optimum(
    dcf: &PlatoonDcf,
    j: usize,
    norm: DesignNorm,
    basis: QBasis,
    grid: &[f64],
) -> Result<TwoParameterReport> {
    check_j(dcf, j)?;
    let diag = local_affine(dcf, j, basis, false)?;
    let d_opt = diag.solve(norm, grid)?;
    if j == dcf.size() || dcf.headway.h_seconds == 0.0 {
        // no Q_{n,n+1}, or with H = 1 only the difference Q_jj − Q_{j,j+1}
        // enters: either way the joint problem is the diagonal one
        return Ok(TwoParameterReport {
            j,
            diagonal_cost: d_opt.cost,
            joint_cost: d_opt.cost,
            substituted_cost: d_opt.cost,
            q_substituted: d_opt.params[0].clone(),
            rel_gap: 0.0,
        });
    }
    let s = &dcf.scalar;
    let h = dcf.headway.tf();
    let hnn = RationalFn::product(&[&h, &s.n, &s.n, dcf.phi(j)])?;
    let joint = Affine {
        t1: diag.t1.clone(),
        slots: vec![Slot { t2: vec![hnn.mul(&h)?] }, Slot { t2: vec![hnn.neg()] }],
        basis,
    };
    let j_opt = joint.solve(norm, grid)?;
    let q_sub = j_opt.params[0].sub(&j_opt.params[1].mul(&dcf.headway.pow(-1))?)?;
    let row = diag.t1[0].add(&diag.slots[0].t2[0].mul(&q_sub)?)?;
    let substituted_cost = match norm {
        DesignNorm::H2 => h2_norm_sq(&row)?.sqrt(),
        DesignNorm::Hinf => hinf_report_tfm(&TfMatrix::column(&[row]))?.norm,
    };
    Ok(TwoParameterReport {
        j,
        diagonal_cost: d_opt.cost,
        joint_cost: j_opt.cost,
        substituted_cost,
        q_substituted: q_sub,
        rel_gap: (d_opt.cost - j_opt.cost).abs() / d_opt.cost.max(1e-300),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H2Design {
    pub q: DiagonalYoula,
    /// `‖T_zw‖₂` at the optimum.
    pub cost: f64,
    /// Squared cost of each row of `T_zw`; these sum to `cost²`.
    pub row_costs_sq: Vec<f64>,
}

/// Diagonal `Q` minimizing `‖(Ỹ − HNQ)ÑTΦ‖₂`. Row k of `T_zw` involves
/// only `Q_kk`, so the problem splits per vehicle.
pub fn h2_design(dcf: &PlatoonDcf, basis: QBasis) -> Result<H2Design> {
    let n = dcf.size();
    let s = &dcf.scalar;
    let h = dcf.headway.tf();
    let hn = h.mul(&s.n)?;
    let rows: Vec<AffineOptimum> = (1..=n)
        .into_par_iter()
        .map(|k| {
            let mut t1 = vec![RationalFn::product(&[&s.y, &s.n, &h, dcf.phi(k)])?];
            let mut t2 = vec![RationalFn::product(&[&hn, &s.n, &h, dcf.phi(k)])?.neg()];
            if k >= 2 {
                t1.push(RationalFn::product(&[&s.y, &s.n, dcf.phi(k - 1)])?);
                t2.push(RationalFn::product(&[&hn, &s.n, dcf.phi(k - 1)])?.neg());
            }
            Affine { t1, slots: vec![Slot { t2 }], basis }.h2()
        })
        .collect::<Result<_>>()?;
    let row_costs_sq: Vec<f64> = rows.iter().map(|r| r.cost * r.cost).collect();
    Ok(H2Design {
        q: DiagonalYoula::new(rows.iter().map(|r| r.params[0].clone()).collect())?,
        cost: row_costs_sq.iter().sum::<f64>().sqrt(),
        row_costs_sq,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousH2 {
    pub q_o: RationalFn,
    /// `min ‖ỸÑ − NQÑ‖₂²` over the basis.
    pub per_channel_sq: f64,
    /// `(2n−1)·per_channel_sq`: n diagonal plus n−1 subdiagonal copies.
    pub bound_sq: f64,
    /// `‖T_zw‖₂²` of the assembled loop at `Q* = D{Q_o, …}`.
    pub full_cost_sq: f64,
}

/// Identical followers and constant spacing: one scalar problem gives the
/// optimum of the whole string.
pub fn homogeneous_h2_optimal(cfg: &PlatoonConfig, dcf: &PlatoonDcf, basis: QBasis) -> Result<HomogeneousH2> {
    if !cfg.is_homogeneous() {
        return Err(Error::RequiresHomogeneous);
    }
    if cfg.headway.h_seconds != 0.0 {
        return Err(Error::RequiresZeroHeadway);
    }
    let n = dcf.size();
    let s = &dcf.scalar;
    let aff = Affine {
        t1: vec![s.y.mul(&s.n)?],
        slots: vec![Slot { t2: vec![s.n.mul(&s.n)?.neg()] }],
        basis,
    };
    let opt = aff.h2()?;
    let per = opt.cost * opt.cost;
    let q = DiagonalYoula::uniform(n, opt.params[0].clone())?;
    let maps = closed_loop(cfg, dcf, &q.to_tfm())?;
    let full = h2_norm_tfm(&maps.t_zw)?.powi(2);
    let bound = (2 * n - 1) as f64 * per;
    if (full - bound).abs() > 1e-2 * bound {
        return Err(Error::ClosedFormMismatch((full - bound).abs() / bound));
    }
    Ok(HomogeneousH2 { q_o: opt.params[0].clone(), per_channel_sq: per, bound_sq: bound, full_cost_sq: full })
}

/// Unconstrained `n×n` Youla parameter over the basis minimizing
/// `‖T_zw‖₂²`. Row l of `T_zw` is `−ỸÑ(l,·) + HN Σ_m Q_lm Ñ(m,·)`, so rows
/// are independent problems. Returns the parameter and the squared cost.
pub fn full_q_h2_optimum(dcf: &PlatoonDcf, basis: QBasis) -> Result<(TfMatrix, f64)> {
    let n = dcf.size();
    let s = &dcf.scalar;
    let hn = dcf.headway.tf().mul(&s.n)?;
    let rows: Vec<AffineOptimum> = (0..n)
        .into_par_iter()
        .map(|l| {
            let t1 = (0..n)
                .map(|j| s.y.mul(dcf.n_t.get(l, j)).map(|f| f.neg()))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let slots = (0..n)
                .map(|m| {
                    let t2 = (0..n)
                        .map(|j| hn.mul(dcf.n_t.get(m, j)))
                        .collect::<std::result::Result<Vec<_>, _>>()?;
                    Ok(Slot { t2 })
                })
                .collect::<Result<Vec<_>>>()?;
            Affine { t1, slots, basis }.h2()
        })
        .collect::<Result<_>>()?;
    let mut q = TfMatrix::zeros(n, n);
    let mut cost = 0.0;
    for (l, r) in rows.iter().enumerate() {
        for m in 0..n {
            q.set(l, m, r.params[m].clone());
        }
        cost += r.cost * r.cost;
    }
    Ok((q.retag(), cost))
}

/// `min ‖T_{uw_0}‖₂` over `Q_11`; entry k is
/// `(X̃ + HMQ_11) Ñ Φ_0 Φ_k⁻¹ H^{-k}`.
pub fn leader_effort_h2(dcf: &PlatoonDcf, basis: QBasis) -> Result<(RationalFn, f64)> {
    let n = dcf.size();
    let s = &dcf.scalar;
    let hw = dcf.headway;
    let h = hw.tf();
    let mut t1 = Vec::with_capacity(n);
    let mut t2 = Vec::with_capacity(n);
    for k in 1..=n {
        let w = RationalFn::product(&[&s.n, dcf.phi(0), &dcf.phi(k).inv()?, &hw.pow(-(k as i32))])?;
        t1.push(s.x.mul(&w)?);
        t2.push(RationalFn::product(&[&h, &s.m, &w])?);
    }
    let opt = Affine { t1, slots: vec![Slot { t2 }], basis }.h2()?;
    Ok((opt.params[0].clone(), opt.cost))
}
