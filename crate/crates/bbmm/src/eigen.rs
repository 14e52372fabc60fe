//! Symmetric tridiagonal eigensolver (implicit-shift QL) and dense symmetric
//! eigenvalues via Householder reduction.
//!
//! The QL sweep tracks only the first row of the eigenvector matrix, which is
//! all the quadrature downstream needs; the full basis is never formed.

use crate::dense::{householder_tridiagonalize, DenseMatrix};
use crate::error::{BbmmError, Result};

const MAX_QL_SWEEPS: usize = 30;

/// Implicit-shift QL on a symmetric tridiagonal matrix given by `diag` and
/// `offdiag`. Returns eigenvalues ascending together with the first row of
/// the eigenvector matrix (entry j belongs to eigenvalue j).
pub fn tridiag_ql(diag: &[f64], offdiag: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 {
        return Err(BbmmError::shape("empty tridiagonal"));
    }
    if offdiag.len() + 1 != n {
        return Err(BbmmError::shape(format!(
            "tridiagonal size mismatch: {} diagonal, {} off-diagonal",
            n,
            offdiag.len()
        )));
    }
    let mut d = diag.to_vec();
    // e[i] couples i and i+1; the trailing slot is a workspace sentinel.
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(offdiag);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    // Off-diagonals below roundoff at matrix scale are deflated outright;
    // without the absolute floor, matrices graded large-to-small stall the
    // relative test.
    let anorm = (0..n).fold(0.0f64, |a, i| {
        let mut row = d[i].abs() + e[i].abs();
        if i > 0 {
            row += e[i - 1].abs();
        }
        a.max(row)
    });
    let floor = f64::EPSILON * anorm;

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= (f64::EPSILON * dd).max(floor) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(BbmmError::numeric(format!(
                    "tridiagonal QL failed to converge at index {l} after {MAX_QL_SWEEPS} sweeps"
                )));
            }
            // Wilkinson shift.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // Rotate the tracked first-row entries.
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // Sort ascending, carrying the first-row entries along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("finite eigenvalues"));
    let evals: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let first_row: Vec<f64> = order.iter().map(|&i| z[i]).collect();
    Ok((evals, first_row))
}

/// Eigenvalues (ascending) of a dense symmetric matrix.
pub fn sym_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    let (d, e) = householder_tridiagonalize(a)?;
    let (evals, _) = tridiag_ql(&d, &e)?;
    Ok(evals)
}
