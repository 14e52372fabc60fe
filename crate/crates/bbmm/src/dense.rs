//! Row-major dense matrices and the factorizations the rest of the crate
//! builds on: blocked parallel matmul, Cholesky, and a Householder reduction
//! to tridiagonal form for dense symmetric eigenvalues.
//!
//! Parallel products partition output rows across threads; every output
//! element is accumulated by exactly one thread in a fixed order, so results
//! do not depend on the thread count.

use crate::error::{BbmmError, Result};
use rayon::prelude::*;

/// Minimum row-block flop count before `matmul` bothers spawning rayon tasks.
const PAR_FLOP_THRESHOLD: usize = 1 << 16;

/// Dense row-major matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major values, rejecting size mismatches and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(BbmmError::shape("matrix dimensions must be at least 1x1"));
        }
        if values.len() != rows * cols {
            return Err(BbmmError::shape(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BbmmError::numeric("matrix contains non-finite entries"));
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(BbmmError::shape("no rows given"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(BbmmError::shape("ragged rows"));
        }
        let values: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        DenseMatrix::new(rows.len(), cols, values)
    }

    /// Column vector from a slice.
    pub fn from_column(v: &[f64]) -> Result<Self> {
        DenseMatrix::new(v.len(), 1, v.to_vec())
    }

    /// n x t matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        if cols.is_empty() {
            return Err(BbmmError::shape("no columns given"));
        }
        let n = cols[0].len();
        if cols.iter().any(|c| c.len() != n) {
            return Err(BbmmError::shape("ragged columns"));
        }
        let mut m = DenseMatrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                m.values[i * cols.len() + j] = c[i];
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row_slice(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_slice_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        for i in 0..self.rows {
            self.set(i, j, v[i]);
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.values[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        t
    }

    /// `self * other`, dispatching to the shared blocked implementation.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        dense_matmul(self, other)
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(BbmmError::shape(format!(
                "matvec: {}x{} against length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row_slice(i);
            out[i] = dot(row, v);
        }
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.add_scaled(other, 1.0)
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, other: &DenseMatrix, a: f64) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(BbmmError::shape("matrix addition shape mismatch"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values,
        })
    }

    /// Adds `a` to every diagonal entry (square matrices).
    pub fn add_diagonal(&self, a: f64) -> Result<DenseMatrix> {
        if self.rows != self.cols {
            return Err(BbmmError::shape("add_diagonal requires a square matrix"));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            out.values[i * self.cols + i] += a;
        }
        Ok(out)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self.get(i, i)).collect()
    }
}

/// `C = A * B` with the inner accumulation kept sequential per output row, so
/// the result is identical for any thread count.
pub fn dense_matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(BbmmError::shape(format!(
            "matmul: {}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; m * n];
    let work_per_row = k * n;

    let row_kernel = |i: usize, out_row: &mut [f64]| {
        let a_row = &a.values[i * k..(i + 1) * k];
        for (p, &aip) in a_row.iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let b_row = &b.values[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    };

    if m * work_per_row >= PAR_FLOP_THRESHOLD && m > 1 {
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, out_row)| row_kernel(i, out_row));
    } else {
        for (i, out_row) in out.chunks_mut(n).enumerate() {
            row_kernel(i, out_row);
        }
    }
    Ok(DenseMatrix {
        rows: m,
        cols: n,
        values: out,
    })
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: DenseMatrix,
}

impl CholeskyFactor {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(BbmmError::shape("cholesky requires a square matrix"));
        }
        let n = a.rows;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for p in 0..j {
                let v = l.get(j, p);
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(BbmmError::NotPositiveDefinite(format!(
                    "pivot {d:.3e} at column {j}"
                )));
            }
            let dj = d.sqrt();
            l.set(j, j, dj);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for p in 0..j {
                    s -= l.get(i, p) * l.get(j, p);
                }
                l.set(i, j, s / dj);
            }
        }
        Ok(CholeskyFactor { l })
    }

    pub fn size(&self) -> usize {
        self.l.rows()
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solves `A x = b` via forward and back substitution.
    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.l.rows();
        if b.len() != n {
            return Err(BbmmError::shape("cholesky solve length mismatch"));
        }
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for p in 0..i {
                s -= self.l.get(i, p) * x[p];
            }
            x[i] = s / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in (i + 1)..n {
                s -= self.l.get(p, i) * x[p];
            }
            x[i] = s / self.l.get(i, i);
        }
        Ok(x)
    }

    /// Column-wise solve `A X = B`.
    pub fn solve_mat(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows() != self.l.rows() {
            return Err(BbmmError::shape("cholesky solve shape mismatch"));
        }
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.column(j))?;
            out.set_column(j, &x);
        }
        Ok(out)
    }

    /// log |A| from the factor diagonal.
    pub fn logdet(&self) -> f64 {
        (0..self.l.rows())
            .map(|i| 2.0 * self.l.get(i, i).ln())
            .sum()
    }
}

/// Cholesky with escalating diagonal jitter: starts at `1e-8 * mean(diag)` and
/// multiplies by 10 until `1e-4 * mean(diag)`, then gives up.
pub fn cholesky_with_jitter(a: &DenseMatrix) -> Result<(CholeskyFactor, f64)> {
    match CholeskyFactor::new(a) {
        Ok(f) => return Ok((f, 0.0)),
        Err(_) => {}
    }
    let n = a.rows();
    let mean_diag = a.diagonal().iter().sum::<f64>() / n as f64;
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let mut jitter = 1e-8 * scale;
    let max_jitter = 1e-4 * scale;
    while jitter <= max_jitter * (1.0 + 1e-12) {
        if let Ok(f) = CholeskyFactor::new(&a.add_diagonal(jitter)?) {
            return Ok((f, jitter));
        }
        jitter *= 10.0;
    }
    Err(BbmmError::NotPositiveDefinite(format!(
        "factorization failed after jitter escalation to {max_jitter:.3e}"
    )))
}

/// Householder reduction of a symmetric matrix to tridiagonal form, returning
/// the diagonal and off-diagonal. Only eigenvalues are recoverable from this
/// (the orthogonal factor is discarded).
pub fn householder_tridiagonalize(a: &DenseMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.rows() != a.cols() {
        return Err(BbmmError::shape("tridiagonalization requires square input"));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    if n == 1 {
        return Ok((vec![a.get(0, 0)], vec![]));
    }
    for k in 0..n - 2 {
        // Zero column k below the first subdiagonal with a reflector.
        let mut alpha2 = 0.0;
        for i in k + 1..n {
            alpha2 += m.get(i, k) * m.get(i, k);
        }
        let x0 = m.get(k + 1, k);
        let alpha = -x0.signum() * alpha2.sqrt();
        let vtv = 2.0 * alpha * (alpha - x0);
        if vtv <= 0.0 {
            // Column already tridiagonal.
            d[k] = m.get(k, k);
            e[k] = x0;
            continue;
        }
        let mut v = vec![0.0; n];
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = m.get(i, k);
        }
        let inv = 1.0 / vtv.sqrt();
        for vi in v.iter_mut() {
            *vi *= inv;
        }
        // m <- H m H with H = I - 2 v v^T, using the symmetric rank-2 update.
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += m.get(i, j) * v[j];
            }
            w[i] = s;
        }
        let c = dot(&v, &w);
        for i in 0..n {
            w[i] -= c * v[i];
        }
        for i in 0..n {
            for j in 0..n {
                let upd = m.get(i, j) - 2.0 * (v[i] * w[j] + w[i] * v[j]);
                m.set(i, j, upd);
            }
        }
        d[k] = m.get(k, k);
        e[k] = m.get(k + 1, k);
    }
    d[n - 2] = m.get(n - 2, n - 2);
    d[n - 1] = m.get(n - 1, n - 1);
    e[n - 2] = m.get(n - 1, n - 2);
    Ok((d, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
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

    fn seeded(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::new(rows, cols, vals).unwrap()
    }

    #[test]
    fn identity_times_anything() {
        let b = seeded(3, 4, 1);
        let c = DenseMatrix::identity(3).matmul(&b).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn zero_annihilates() {
        let b = seeded(2, 2, 2);
        let c = DenseMatrix::zeros(2, 2).matmul(&b).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_naive_triple_loop() {
        let a = seeded(8, 8, 3);
        let b = seeded(8, 3, 4);
        let c = a.matmul(&b).unwrap();
        let want = naive_matmul(&a, &b);
        for (x, y) in c.values().iter().zip(want.values()) {
            assert!((x - y).abs() <= 1e-13 * y.abs().max(1.0));
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let a = seeded(3, 4, 5);
        let b = seeded(3, 4, 6);
        assert!(matches!(a.matmul(&b), Err(BbmmError::Shape(_))));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0]).is_err());
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn parallel_path_matches_naive() {
        let a = seeded(180, 64, 7);
        let b = seeded(64, 40, 8);
        let c = a.matmul(&b).unwrap();
        let want = naive_matmul(&a, &b);
        for (x, y) in c.values().iter().zip(want.values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    fn spd(n: usize, seed: u64) -> DenseMatrix {
        let a = seeded(n, n, seed);
        let mut m = a.matmul(&a.transpose()).unwrap();
        for i in 0..n {
            m.set(i, i, m.get(i, i) + n as f64);
        }
        m
    }

    #[test]
    fn cholesky_solve_roundtrip() {
        let a = spd(12, 9);
        let f = CholeskyFactor::new(&a).unwrap();
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let x = f.solve_vec(&b).unwrap();
        let back = a.matvec(&x).unwrap();
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(CholeskyFactor::new(&a).is_err());
    }

    #[test]
    fn logdet_matches_two_by_two() {
        let a = DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let f = CholeskyFactor::new(&a).unwrap();
        assert!((f.logdet() - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn jitter_recovers_semidefinite() {
        // Rank-one matrix: plain Cholesky fails, jitter succeeds.
        let v = vec![1.0, 2.0, 3.0];
        let mut a = DenseMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                a.set(i, j, v[i] * v[j]);
            }
        }
        let (f, jitter) = cholesky_with_jitter(&a).unwrap();
        assert!(jitter > 0.0);
        assert_eq!(f.size(), 3);
    }
}
