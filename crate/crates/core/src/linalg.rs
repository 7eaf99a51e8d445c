//! Small dense symmetric linear algebra: Cholesky factorization/solves and
//! Jacobi eigenvalues.
//!
//! Every system solved in this crate is a symmetric positive (semi-)definite
//! Gram or Fisher matrix of modest size (at most a few dozen rows), so a
//! plain Cholesky and a cyclic Jacobi sweep are all that is needed.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Returns `None` when a pivot is not strictly positive (singular or
/// indefinite input).
pub fn cholesky(a: &ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the lower Cholesky factor `L`.
pub fn cholesky_solve(l: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    // forward: L y = b
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[[i, k]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    // backward: Lᵀ x = y
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Inverse of `L Lᵀ` from its lower Cholesky factor, by solving against the
/// identity column by column.
pub fn cholesky_inverse(l: &ArrayView2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    let mut e = Array1::<f64>::zeros(n);
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, &e.view());
        inv.column_mut(j).assign(&col);
    }
    // symmetrize away the last bits of rounding
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (inv[[i, j]] + inv[[j, i]]);
            inv[[i, j]] = m;
            inv[[j, i]] = m;
        }
    }
    inv
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations, returned in
/// descending order. Intended for small Gram blocks; tolerance is relative to
/// the largest diagonal magnitude.
pub fn symmetric_eigenvalues(a: &ArrayView2<f64>) -> Vec<f64> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![a[[0, 0]]];
    }
    let mut m = a.to_owned();
    let scale = (0..n).map(|i| m[[i, i]].abs()).fold(1e-300, f64::max);
    let tol = 1e-14 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[[i, j]].abs());
            }
        }
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < tol * 1e-2 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = 0.5 * (aqq - app) / apq;
                // tangent of the rotation angle, smaller root for stability
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn cholesky_solve_recovers_known_solution() {
        let a = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let x_true = array![1.0, -2.0, 0.5];
        let b = a.dot(&x_true);
        let l = cholesky(&a.view()).expect("spd");
        let x = cholesky_solve(&l.view(), &b.view());
        for i in 0..3 {
            assert_abs_diff_eq!(x[i], x_true[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(cholesky(&a.view()).is_none());
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = array![[3.0, 1.0], [1.0, 2.0]];
        let l = cholesky(&a.view()).unwrap();
        let inv = cholesky_inverse(&l.view());
        let prod = a.dot(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[[i, j]], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_matches_hand_computed_spectrum() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let e = symmetric_eigenvalues(&a.view());
        assert_abs_diff_eq!(e[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(e[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn jacobi_trace_and_det_preserved() {
        let a = array![
            [4.0, 1.0, 0.5, 0.0],
            [1.0, 3.0, 0.2, 0.1],
            [0.5, 0.2, 2.0, 0.3],
            [0.0, 0.1, 0.3, 1.0]
        ];
        let e = symmetric_eigenvalues(&a.view());
        let trace: f64 = e.iter().sum();
        assert_abs_diff_eq!(trace, 10.0, epsilon = 1e-9);
        // all eigenvalues of this diagonally dominant matrix are positive
        assert!(e.iter().all(|&v| v > 0.0));
    }
}
