//! Dense linear-algebra helpers: balancing, Sylvester/Lyapunov solves and
//! orthonormal Krylov bases.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Diagonal similarity balancing (Parlett-Reinsch, powers of two).
/// Returns the scaling vector `d` such that the result equals `D⁻¹ A D`.
pub fn balance_in_place(a: &mut DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    if n < 2 {
        return d;
    }
    let radix = 2.0f64;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / radix {
                cc *= radix;
                rr /= radix;
                f *= radix;
            }
            while cc >= rr * radix {
                cc /= radix;
                rr *= radix;
                f /= radix;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    d
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Solve `A X + X B = C` for real square `A` (n×n), `B` (m×m) by complex
/// Schur reduction of both coefficients. Requires `λ_i(A) + λ_j(B) ≠ 0`.
pub fn solve_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.nrows();
    if n == 0 || m == 0 {
        return DMatrix::zeros(n, m);
    }
    let (u, ta) = to_complex(a).schur().unpack();
    let (v, tb) = to_complex(b).schur().unpack();
    // A = U Ta U^H, B = V Tb V^H  =>  Ta Y + Y Tb = U^H C V,  X = U Y V^H
    let f = u.adjoint() * to_complex(c) * &v;
    let mut y = DMatrix::<Complex64>::zeros(n, m);
    for j in 0..m {
        // column j: (Ta + Tb[j,j] I) y_j = f_j - sum_{k<j} y_k Tb[k,j]
        let mut rhs: DVector<Complex64> = f.column(j).into_owned();
        for k in 0..j {
            let t = tb[(k, j)];
            if t != Complex64::new(0.0, 0.0) {
                rhs -= y.column(k) * t;
            }
        }
        let shift = tb[(j, j)];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in i + 1..n {
                s -= ta[(i, k)] * y[(k, j)];
            }
            y[(i, j)] = s / (ta[(i, i)] + shift);
        }
    }
    let x = u * y * v.adjoint();
    x.map(|z| z.re)
}

/// Solve `A X + X Aᵀ + Q = 0`.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let x = solve_sylvester(a, &a.transpose(), &(-q));
    (&x + x.transpose()) * 0.5
}

/// Orthonormal basis of the Krylov space spanned by `B, AB, A²B, ...`
/// (controllable subspace), with relative rank tolerance `tol`.
pub fn krylov_basis(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let scale = a.norm().max(b.norm()).max(1e-300);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut frontier: Vec<DVector<f64>> = b.column_iter().map(|c| c.into_owned()).collect();
    let bscale = b.norm().max(1e-300);
    let mut first = true;
    while !frontier.is_empty() && basis.len() < n {
        let mut next = Vec::new();
        for mut v in frontier {
            let orig = v.norm();
            for _ in 0..2 {
                for q in &basis {
                    let p = q.dot(&v);
                    v.axpy(-p, q, 1.0);
                }
            }
            let nv = v.norm();
            let thresh = if first { tol * bscale } else { tol * scale.max(orig) };
            if nv > thresh && nv > 1e-14 * orig {
                v /= nv;
                basis.push(v.clone());
                next.push(a * &v);
                if basis.len() == n {
                    break;
                }
            }
        }
        first = false;
        frontier = next;
    }
    if basis.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sylvester_residual_small() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, 0.0, -3.0, 1.0, 0.5, 0.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 2, &[-4.0, 1.0, -1.0, -4.0]);
        let c = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = solve_sylvester(&a, &b, &c);
        let r = &a * &x + &x * &b - &c;
        assert!(r.norm() < 1e-12, "residual {}", r.norm());
    }

    #[test]
    fn lyapunov_scalar() {
        // -2 x + 1 = 0 for a = -1, q = 1
        let a = DMatrix::from_element(1, 1, -1.0);
        let q = DMatrix::from_element(1, 1, 1.0);
        let x = lyapunov(&a, &q);
        assert!((x[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn krylov_detects_uncontrollable_mode() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(krylov_basis(&a, &b, 1e-10).ncols(), 1);
    }

    #[test]
    fn balancing_is_a_similarity() {
        let mut a = DMatrix::from_row_slice(2, 2, &[1.0, 1e6, 1e-6, 2.0]);
        let orig = a.clone();
        let d = balance_in_place(&mut a);
        let dm = DMatrix::from_diagonal(&DVector::from_vec(d.clone()));
        let dinv = DMatrix::from_diagonal(&DVector::from_vec(d.iter().map(|x| 1.0 / x).collect()));
        let back = &dm * &a * &dinv;
        assert!((back - orig).norm() < 1e-9);
        assert!(a.amax() < 1e3);
    }
}
