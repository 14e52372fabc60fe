//! Sparse local interpolation: each row carries at most four (column, weight)
//! pairs from cubic convolution against a uniform 1-D grid. Combined with a
//! Toeplitz grid kernel this gives the structured kernel operator
//! `W K_UU W^T + sigma^2 I` with O(tn + tm log m) products.

use crate::dense::DenseMatrix;
use crate::error::{BbmmError, Result};
use crate::operator::{check_input_rows, check_row_index, SymmetricOperator};
use crate::toeplitz::{toeplitz_matmul, ToeplitzColumn, ToeplitzOperator};

/// Sparse interpolation matrix with at most 4 nonzeros per row.
#[derive(Debug, Clone)]
pub struct SparseInterpolation {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseInterpolation {
    pub fn new(n_rows: usize, n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n_rows {
            return Err(BbmmError::shape("row count mismatch"));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() > 4 {
                return Err(BbmmError::shape(format!(
                    "row {i} has {} nonzeros, at most 4 allowed",
                    r.len()
                )));
            }
            for &(j, w) in r {
                if j >= n_cols {
                    return Err(BbmmError::IndexOutOfRange {
                        index: j,
                        size: n_cols,
                    });
                }
                if !w.is_finite() {
                    return Err(BbmmError::numeric("non-finite interpolation weight"));
                }
            }
        }
        Ok(SparseInterpolation {
            n_rows,
            n_cols,
            rows,
        })
    }

    pub fn rows(&self) -> usize {
        self.n_rows
    }

    pub fn cols(&self) -> usize {
        self.n_cols
    }

    pub fn row_weights(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `W * M` where M is cols x t.
    pub fn apply(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.rows() != self.n_cols {
            return Err(BbmmError::shape("interpolation apply shape mismatch"));
        }
        let t = m.cols();
        let mut out = DenseMatrix::zeros(self.n_rows, t);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                for k in 0..t {
                    let v = out.get(i, k) + w * m.get(j, k);
                    out.set(i, k, v);
                }
            }
        }
        Ok(out)
    }

    /// `W^T * M` where M is rows x t.
    pub fn transpose_apply(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.rows() != self.n_rows {
            return Err(BbmmError::shape("interpolation transpose shape mismatch"));
        }
        let t = m.cols();
        let mut out = DenseMatrix::zeros(self.n_cols, t);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                for k in 0..t {
                    let v = out.get(j, k) + w * m.get(i, k);
                    out.set(j, k, v);
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out.set(i, j, out.get(i, j) + w);
            }
        }
        out
    }
}

/// Keys cubic convolution kernel with a = -1/2.
fn keys_cubic(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 {
        (1.5 * s - 2.5) * s * s + 1.0
    } else if s < 2.0 {
        -0.5 * (((s - 5.0) * s + 8.0) * s - 4.0)
    } else {
        0.0
    }
}

/// Uniform 1-D interpolation grid with one node of padding beyond the data
/// range on each side, so interior points always have four neighbors.
#[derive(Debug, Clone)]
pub struct Grid1d {
    origin: f64,
    spacing: f64,
    m: usize,
}

impl Grid1d {
    /// Grid of `m >= 4` nodes spanning `[xmin - h, xmax + h]` where
    /// `h = (xmax - xmin) / (m - 3)`.
    pub fn spanning(xmin: f64, xmax: f64, m: usize) -> Result<Self> {
        if m < 4 {
            return Err(BbmmError::domain(format!(
                "grid needs at least 4 nodes, got {m}"
            )));
        }
        if !(xmin.is_finite() && xmax.is_finite()) || xmax < xmin {
            return Err(BbmmError::domain("invalid grid span"));
        }
        let range = xmax - xmin;
        let spacing = if range > 0.0 {
            range / (m - 3) as f64
        } else {
            1.0
        };
        Ok(Grid1d {
            origin: xmin - spacing,
            spacing,
            m,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.spacing
    }

    /// Cubic convolution weights of `x` against the grid. Out-of-range points
    /// have their stencil clamped to edge nodes and the weights renormalized
    /// so every row still sums to one.
    pub fn interpolation_row(&self, x: f64) -> Vec<(usize, f64)> {
        let t = (x - self.origin) / self.spacing;
        let cell = t.floor();
        let s = t - cell;
        let cell = cell as i64;
        let raw = [
            (cell - 1, keys_cubic(1.0 + s)),
            (cell, keys_cubic(s)),
            (cell + 1, keys_cubic(1.0 - s)),
            (cell + 2, keys_cubic(2.0 - s)),
        ];
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(4);
        for (j, w) in raw {
            if w == 0.0 {
                continue;
            }
            let j = j.clamp(0, self.m as i64 - 1) as usize;
            match entries.iter_mut().find(|(jj, _)| *jj == j) {
                Some((_, acc)) => *acc += w,
                None => entries.push((j, w)),
            }
        }
        let sum: f64 = entries.iter().map(|(_, w)| w).sum();
        if sum.abs() < 1e-9 {
            // Far outside the grid: collapse to the nearest edge node.
            let j = if x < self.node(0) { 0 } else { self.m - 1 };
            return vec![(j, 1.0)];
        }
        for (_, w) in entries.iter_mut() {
            *w /= sum;
        }
        entries
    }

    /// Interpolation matrix for a batch of points.
    pub fn interpolation_matrix(&self, xs: &[f64]) -> Result<SparseInterpolation> {
        let rows = xs.iter().map(|&x| self.interpolation_row(x)).collect();
        SparseInterpolation::new(xs.len(), self.m, rows)
    }
}

/// `(W T(c) W^T + sigma2 I) M`, evaluated right-to-left.
pub fn ski_matmul(
    w: &SparseInterpolation,
    c: &ToeplitzColumn,
    sigma2: f64,
    m: &DenseMatrix,
) -> Result<DenseMatrix> {
    if sigma2 <= 0.0 || !sigma2.is_finite() {
        return Err(BbmmError::domain(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    if w.cols() != c.len() {
        return Err(BbmmError::shape("interpolation/grid size mismatch"));
    }
    if m.rows() != w.rows() {
        return Err(BbmmError::shape("ski_matmul input shape mismatch"));
    }
    let inner = w.apply(&toeplitz_matmul(c, &w.transpose_apply(m)?)?)?;
    inner.add_scaled(m, sigma2)
}

/// Structured kernel operator `W T(c) W^T + sigma2 I`. A zero `sigma2` is
/// allowed so the same type can serve as a derivative operator.
pub struct SkiOperator {
    w: SparseInterpolation,
    kuu: ToeplitzOperator,
    sigma2: f64,
    diag_cache: Vec<f64>,
}

impl SkiOperator {
    pub fn new(w: SparseInterpolation, col: ToeplitzColumn, sigma2: f64) -> Result<Self> {
        if w.cols() != col.len() {
            return Err(BbmmError::shape(
                "interpolation columns must match grid size",
            ));
        }
        if sigma2 < 0.0 || !sigma2.is_finite() {
            return Err(BbmmError::domain("negative noise variance"));
        }
        let mut diag_cache = vec![0.0; w.rows()];
        for i in 0..w.rows() {
            let mut acc = 0.0;
            for &(p, wp) in w.row_weights(i) {
                for &(q, wq) in w.row_weights(i) {
                    acc += wp * wq * col.entry(p, q);
                }
            }
            diag_cache[i] = acc + sigma2;
        }
        Ok(SkiOperator {
            kuu: ToeplitzOperator::new(col),
            w,
            sigma2,
            diag_cache,
        })
    }

    pub fn interpolation(&self) -> &SparseInterpolation {
        &self.w
    }
}

impl SymmetricOperator for SkiOperator {
    fn size(&self) -> usize {
        self.w.rows()
    }

    fn matmul(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        check_input_rows(self.size(), m)?;
        let inner = self
            .w
            .apply(&self.kuu.matmul(&self.w.transpose_apply(m)?)?)?;
        if self.sigma2 == 0.0 {
            Ok(inner)
        } else {
            inner.add_scaled(m, self.sigma2)
        }
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        check_row_index(self.size(), i)?;
        let m = self.w.cols();
        // v = w_i K_UU: four Toeplitz rows collapsed in O(m).
        let mut v = vec![0.0; m];
        for &(p, wp) in self.w.row_weights(i) {
            for (j, slot) in v.iter_mut().enumerate() {
                *slot += wp * self.kuu.column().entry(p, j);
            }
        }
        // out = v W^T in O(n).
        let mut out = vec![0.0; self.size()];
        for (j, row) in (0..self.size()).map(|j| (j, self.w.row_weights(j))) {
            let mut acc = 0.0;
            for &(q, wq) in row {
                acc += wq * v[q];
            }
            out[j] = acc;
        }
        out[i] += self.sigma2;
        Ok(out)
    }

    fn diag(&self) -> Vec<f64> {
        self.diag_cache.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn keys_kernel_partition_of_unity() {
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            let sum =
                keys_cubic(1.0 + s) + keys_cubic(s) + keys_cubic(1.0 - s) + keys_cubic(2.0 - s);
            assert!((sum - 1.0).abs() < 1e-12, "s={s}: {sum}");
        }
    }

    #[test]
    fn interpolation_rows_sum_to_one() {
        let grid = Grid1d::spanning(0.0, 1.0, 12).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x: f64 = rng.gen_range(-0.5..1.5);
            let row = grid.interpolation_row(x);
            let sum: f64 = row.iter().map(|(_, w)| w).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(row.len() <= 4);
        }
    }

    #[test]
    fn on_node_rows_are_one_hot() {
        let grid = Grid1d::spanning(0.0, 1.0, 11).unwrap();
        for j in 1..10 {
            let row = grid.interpolation_row(grid.node(j));
            assert_eq!(row.len(), 1);
            assert_eq!(row[0].0, j);
            assert!((row[0].1 - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_w_gives_noise_only() {
        let w = SparseInterpolation::new(5, 8, vec![vec![]; 5]).unwrap();
        let c = ToeplitzColumn::new(vec![1.0, 0.3, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let m =
            DenseMatrix::new(5, 2, (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let got = ski_matmul(&w, &c, 0.7, &m).unwrap();
        for (x, y) in got.values().iter().zip(m.values()) {
            assert!((x - 0.7 * y).abs() < 1e-14);
        }
    }

    #[test]
    fn ski_matmul_matches_dense_materialization() {
        let grid = Grid1d::spanning(0.0, 1.0, 16).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..1.0)).collect();
        let w = grid.interpolation_matrix(&xs).unwrap();
        let c = ToeplitzColumn::new(
            (0..16)
                .map(|j| (-0.5 * (j as f64 * grid.spacing()).powi(2)).exp())
                .collect(),
        )
        .unwrap();
        let m =
            DenseMatrix::new(20, 3, (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let sigma2 = 0.25;
        let fast = ski_matmul(&w, &c, sigma2, &m).unwrap();
        let wd = w.to_dense();
        let dense = wd
            .matmul(&c.to_dense())
            .unwrap()
            .matmul(&wd.transpose())
            .unwrap()
            .add_diagonal(sigma2)
            .unwrap()
            .matmul(&m)
            .unwrap();
        for (x, y) in fast.values().iter().zip(dense.values()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn ski_matmul_rejects_nonpositive_noise() {
        let w = SparseInterpolation::new(2, 4, vec![vec![], vec![]]).unwrap();
        let c = ToeplitzColumn::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let m = DenseMatrix::zeros(2, 1);
        assert!(ski_matmul(&w, &c, 0.0, &m).is_err());
    }

    #[test]
    fn operator_row_matches_dense_and_diag() {
        let grid = Grid1d::spanning(-1.0, 1.0, 10).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = grid.interpolation_matrix(&xs).unwrap();
        let c = ToeplitzColumn::new(
            (0..10)
                .map(|j| (-2.0 * (j as f64 * grid.spacing()).powi(2)).exp())
                .collect(),
        )
        .unwrap();
        let op = SkiOperator::new(w.clone(), c.clone(), 0.3).unwrap();
        let wd = w.to_dense();
        let dense = wd
            .matmul(&c.to_dense())
            .unwrap()
            .matmul(&wd.transpose())
            .unwrap()
            .add_diagonal(0.3)
            .unwrap();
        for i in [0usize, 5, 11] {
            let r = op.row(i).unwrap();
            for j in 0..12 {
                assert!((r[j] - dense.get(i, j)).abs() < 1e-10);
            }
            assert!((r[i] - op.diag()[i]).abs() < 1e-12);
        }
    }
}
