//! Independent oracles and fixture builders for the test suites. Everything
//! here recomputes the quantity under test along a different algorithmic
//! path than the production code: triple-loop products, explicit Lanczos with
//! full reorthogonalization, permutation-matrix pivoted Cholesky, and a
//! Jacobi eigensolver.

use crate::dense::{dot, norm2, CholeskyFactor, DenseMatrix};

use crate::operator::SymmetricOperator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Plain triple-loop matrix product.
pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    let mut c = DenseMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for p in 0..a.cols() {
                s += a.get(i, p) * b.get(p, j);
            }
            c.set(i, j, s);
        }
    }
    c
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    DenseMatrix::new(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("finite values")
}

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn rademacher_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Random SPD matrix `Q diag(spectrum) Q^T` with a seeded orthogonal basis
/// from QR of a Gaussian matrix.
pub fn spd_with_spectrum(spectrum: &[f64], seed: u64) -> DenseMatrix {
    let n = spectrum.len();
    let g = random_matrix(n, n, seed);
    let q = gram_schmidt(&g);
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..n {
                s += q.get(i, p) * spectrum[p] * q.get(j, p);
            }
            out.set(i, j, s);
        }
    }
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (out.get(i, j) + out.get(j, i));
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    out
}

/// Evenly spaced values from lo to hi inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn gram_schmidt(a: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let mut q = a.clone();
    for j in 0..n {
        let mut col = q.column(j);
        for p in 0..j {
            let prev = q.column(p);
            let proj = dot(&col, &prev);
            for i in 0..n {
                col[i] -= proj * prev[i];
            }
        }
        let nrm = norm2(&col);
        for v in col.iter_mut() {
            *v /= nrm;
        }
        q.set_column(j, &col);
    }
    q
}

/// Dense SPD solve via Cholesky, used as the reference for iterative solves.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    CholeskyFactor::new(a)
        .expect("oracle matrix must be SPD")
        .solve_vec(b)
        .expect("shape checked")
}

/// Explicit Lanczos with full reorthogonalization, started at `z / |z|`.
/// Returns the tridiagonal coefficients (diag, offdiag) after p steps.
pub fn lanczos_reference(a: &DenseMatrix, z: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    let nrm = norm2(z);
    q_cols.push(z.iter().map(|v| v / nrm).collect());
    let mut alphas = Vec::with_capacity(p);
    let mut betas = Vec::with_capacity(p.saturating_sub(1));
    for j in 0..p {
        let qj = q_cols[j].clone();
        let mut w = a.matvec(&qj).expect("square matrix");
        let alpha = dot(&qj, &w);
        alphas.push(alpha);
        if j + 1 == p {
            break;
        }
        for (wi, qi) in w.iter_mut().zip(&qj) {
            *wi -= alpha * qi;
        }
        if j > 0 {
            let qm1 = &q_cols[j - 1];
            let b = betas[j - 1];
            for (wi, qi) in w.iter_mut().zip(qm1) {
                *wi -= b * qi;
            }
        }
        // two passes of full reorthogonalization
        for _ in 0..2 {
            for q in &q_cols {
                let proj = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= proj * qi;
                }
            }
        }
        let beta = norm2(&w);
        betas.push(beta);
        q_cols.push(w.iter().map(|v| v / beta).collect());
    }
    (alphas, betas)
}

/// Splits `P = E E^T` and forms the symmetrically preconditioned matrix
/// `E^{-1} A E^{-T}` together with `E^{-1} z`, so the plain Lanczos reference
/// can be applied to preconditioned runs.
pub fn split_preconditioned_system(
    a: &DenseMatrix,
    p: &DenseMatrix,
    z: &[f64],
) -> (DenseMatrix, Vec<f64>) {
    let n = a.rows();
    let chol = CholeskyFactor::new(p).expect("preconditioner must be SPD");
    let e = chol.factor().clone();
    // E^{-1} A: forward-substitute each column of A, then transpose trick for E^{-T}.
    let mut einv_a = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = forward_sub(&e, &a.column(j));
        einv_a.set_column(j, &col);
    }
    let mut atil = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = einv_a.row_slice(i).to_vec();
        let solved = forward_sub(&e, &row);
        for j in 0..n {
            atil.set(i, j, solved[j]);
        }
    }
    // exact symmetrization against roundoff
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (atil.get(i, j) + atil.get(j, i));
            atil.set(i, j, v);
            atil.set(j, i, v);
        }
    }
    let w = forward_sub(&e, z);
    (atil, w)
}

fn forward_sub(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for p in 0..i {
            s -= l.get(i, p) * x[p];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Pivoted Cholesky by the textbook recursion with explicit permutation
/// matrices, as an oracle for the row-access implementation. Returns the
/// factor with rows in the original ordering.
pub fn pivoted_cholesky_reference(k: &DenseMatrix, rank: usize) -> DenseMatrix {
    let n = k.rows();
    let mut s = k.clone(); // current permuted matrix
    let mut perm: Vec<usize> = (0..n).collect(); // perm[p] = original index at position p
    let mut l_perm = DenseMatrix::zeros(n, rank);
    for step in 0..rank {
        // pivot: largest diagonal among positions >= step (lowest original
        // index on ties)
        let mut best = step;
        for cand in step..n {
            let better = s.get(cand, cand) > s.get(best, best) + 0.0
                || (s.get(cand, cand) == s.get(best, best) && perm[cand] < perm[best]);
            if better {
                best = cand;
            }
        }
        if best != step {
            swap_rows_cols(&mut s, step, best);
            perm.swap(step, best);
            for c in 0..step {
                let tmp = l_perm.get(step, c);
                l_perm.set(step, c, l_perm.get(best, c));
                l_perm.set(best, c, tmp);
            }
        }
        let piv = s.get(step, step).sqrt();
        l_perm.set(step, step, piv);
        for i in (step + 1)..n {
            l_perm.set(i, step, s.get(i, step) / piv);
        }
        // Schur complement on the trailing block.
        for i in (step + 1)..n {
            for j in (step + 1)..n {
                let upd = s.get(i, j) - l_perm.get(i, step) * l_perm.get(j, step);
                s.set(i, j, upd);
            }
        }
    }
    // undo the permutation: row perm[p] of the answer is row p of l_perm
    let mut l = DenseMatrix::zeros(n, rank);
    for p in 0..n {
        for c in 0..rank {
            l.set(perm[p], c, l_perm.get(p, c));
        }
    }
    l
}

fn swap_rows_cols(m: &mut DenseMatrix, a: usize, b: usize) {
    let n = m.rows();
    for j in 0..n {
        let tmp = m.get(a, j);
        m.set(a, j, m.get(b, j));
        m.set(b, j, tmp);
    }
    for i in 0..n {
        let tmp = m.get(i, a);
        m.set(i, a, m.get(i, b));
        m.set(i, b, tmp);
    }
}

/// Cyclic Jacobi eigenvalues of a dense symmetric matrix, ascending.
pub fn jacobi_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.rows();
    let mut m = a.clone();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
            }
        }
    }
    let mut ev = m.diagonal();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    ev
}

/// Shared conformance checks every symmetric operator implementation must
/// pass against its dense materialization.
pub fn assert_operator_conformance(op: &dyn SymmetricOperator, dense: &DenseMatrix, seed: u64) {
    let n = op.size();
    assert_eq!(dense.rows(), n);
    let scale = dense
        .values()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1.0);

    // matmul against dense materialization
    let probe = random_matrix(n, 3, seed);
    let got = op.matmul(&probe).expect("matmul");
    let want = naive_matmul(dense, &probe);
    for (x, y) in got.values().iter().zip(want.values()) {
        assert!(
            (x - y).abs() <= 1e-10 * scale,
            "operator disagrees with dense materialization: {x} vs {y}"
        );
    }

    // linearity on random probes
    let m1 = random_matrix(n, 2, seed ^ 0xa5a5);
    let m2 = random_matrix(n, 2, seed ^ 0x5a5a);
    let (a, b) = (0.7, -1.3);
    let combo = m1.scale(a).add(&m2.scale(b)).expect("same shape");
    let lhs = op.matmul(&combo).expect("matmul");
    let rhs = op
        .matmul(&m1)
        .expect("matmul")
        .scale(a)
        .add(&op.matmul(&m2).expect("matmul").scale(b))
        .expect("same shape");
    for (x, y) in lhs.values().iter().zip(rhs.values()) {
        assert!(
            (x - y).abs() <= 1e-10 * scale.max(1.0),
            "linearity: {x} vs {y}"
        );
    }

    // symmetry on sampled index pairs
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xbeef);
    for _ in 0..8.min(n * n) {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let ri = op.row(i).expect("row");
        let rj = op.row(j).expect("row");
        assert!(
            (ri[j] - rj[i]).abs() <= 1e-10 * scale,
            "symmetry at ({i},{j}): {} vs {}",
            ri[j],
            rj[i]
        );
    }

    // row = A e_i, diag consistency
    for i in 0..n.min(6) {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let col = op.matvec(&e).expect("matvec");
        let row = op.row(i).expect("row");
        for (x, y) in row.iter().zip(&col) {
            assert!((x - y).abs() <= 1e-12 * scale, "row vs matmul: {x} vs {y}");
        }
        assert!((row[i] - op.diag()[i]).abs() <= 1e-12 * scale);
    }
}
