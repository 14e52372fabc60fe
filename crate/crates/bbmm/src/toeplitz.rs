//! Symmetric Toeplitz matrices stored by first column, with products done
//! through a circulant embedding and FFTs: the column is embedded in a
//! circulant of the next power-of-two size >= 2m, so a length-m product
//! costs O(m log m) per right-hand side.

use crate::dense::DenseMatrix;
use crate::error::{BbmmError, Result};
use crate::operator::{check_input_rows, check_row_index, SymmetricOperator};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// First column of a symmetric Toeplitz matrix; entry (i, j) is `c[|i-j|]`.
#[derive(Debug, Clone)]
pub struct ToeplitzColumn {
    c: Vec<f64>,
}

impl ToeplitzColumn {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(BbmmError::shape("empty Toeplitz column"));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(BbmmError::numeric("Toeplitz column has non-finite entries"));
        }
        Ok(ToeplitzColumn { c })
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.c
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.c[i.abs_diff(j)]
    }

    /// Dense materialization, for oracles and small sizes.
    pub fn to_dense(&self) -> DenseMatrix {
        let m = self.len();
        let mut out = DenseMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                out.set(i, j, self.entry(i, j));
            }
        }
        out
    }
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// FFT of the circulant embedding of a symmetric Toeplitz column, together
/// with the plans needed to apply it.
pub(crate) struct CirculantPlan {
    m: usize,
    len: usize,
    symbol: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl CirculantPlan {
    pub(crate) fn new(col: &ToeplitzColumn) -> Self {
        let m = col.len();
        let len = next_pow2(2 * m);
        let mut gamma = vec![Complex::new(0.0, 0.0); len];
        gamma[0] = Complex::new(col.c[0], 0.0);
        for j in 1..m {
            gamma[j] = Complex::new(col.c[j], 0.0);
            gamma[len - j] = Complex::new(col.c[j], 0.0);
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        fwd.process(&mut gamma);
        CirculantPlan {
            m,
            len,
            symbol: gamma,
            fwd,
            inv,
        }
    }

    /// Applies the Toeplitz matrix to each column of `m` (m.rows() == m).
    pub(crate) fn apply(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.rows() != self.m {
            return Err(BbmmError::shape(format!(
                "Toeplitz of size {} applied to {}x{} block",
                self.m,
                m.rows(),
                m.cols()
            )));
        }
        let mut out = DenseMatrix::zeros(m.rows(), m.cols());
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        let scale = 1.0 / self.len as f64;
        for j in 0..m.cols() {
            for slot in buf.iter_mut() {
                *slot = Complex::new(0.0, 0.0);
            }
            for i in 0..self.m {
                buf[i] = Complex::new(m.get(i, j), 0.0);
            }
            self.fwd.process(&mut buf);
            for (b, s) in buf.iter_mut().zip(&self.symbol) {
                *b *= s;
            }
            self.inv.process(&mut buf);
            for i in 0..self.m {
                out.set(i, j, buf[i].re * scale);
            }
        }
        Ok(out)
    }
}

/// Product of the symmetric Toeplitz matrix induced by `c` with a dense block.
pub fn toeplitz_matmul(c: &ToeplitzColumn, m: &DenseMatrix) -> Result<DenseMatrix> {
    CirculantPlan::new(c).apply(m)
}

/// Symmetric Toeplitz matrix as a blackbox operator; the circulant symbol is
/// computed once at construction.
pub struct ToeplitzOperator {
    col: ToeplitzColumn,
    plan: CirculantPlan,
}

impl ToeplitzOperator {
    pub fn new(col: ToeplitzColumn) -> Self {
        let plan = CirculantPlan::new(&col);
        ToeplitzOperator { col, plan }
    }

    pub fn column(&self) -> &ToeplitzColumn {
        &self.col
    }
}

impl SymmetricOperator for ToeplitzOperator {
    fn size(&self) -> usize {
        self.col.len()
    }

    fn matmul(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        check_input_rows(self.size(), m)?;
        self.plan.apply(m)
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        check_row_index(self.size(), i)?;
        Ok((0..self.size()).map(|j| self.col.entry(i, j)).collect())
    }

    fn diag(&self) -> Vec<f64> {
        vec![self.col.c[0]; self.size()]
    }
}
