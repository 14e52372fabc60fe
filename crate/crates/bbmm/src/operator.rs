//! The blackbox symmetric operator abstraction.
//!
//! Everything the solvers need from a kernel matrix is captured by three
//! capabilities: multiply against a tall dense block, read one row, and read
//! the diagonal. Implementations are immutable once constructed and safe to
//! share across threads.

use crate::dense::DenseMatrix;
use crate::error::{BbmmError, Result};
use std::sync::Arc;

pub trait SymmetricOperator: Send + Sync {
    /// Dimension n of the induced n x n matrix.
    fn size(&self) -> usize;

    /// Applies the operator to an n x t block.
    fn matmul(&self, m: &DenseMatrix) -> Result<DenseMatrix>;

    /// Row `i` of the induced matrix.
    fn row(&self, i: usize) -> Result<Vec<f64>>;

    /// Diagonal of the induced matrix.
    fn diag(&self) -> Vec<f64>;

    /// Applies the operator to a single vector.
    fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let m = DenseMatrix::from_column(v)?;
        Ok(self.matmul(&m)?.column(0))
    }
}

pub(crate) fn check_input_rows(op_size: usize, m: &DenseMatrix) -> Result<()> {
    if m.rows() != op_size {
        return Err(BbmmError::shape(format!(
            "operator of size {} applied to {}x{} block",
            op_size,
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

pub(crate) fn check_row_index(op_size: usize, i: usize) -> Result<()> {
    if i >= op_size {
        return Err(BbmmError::IndexOutOfRange {
            index: i,
            size: op_size,
        });
    }
    Ok(())
}

/// Dense symmetric matrix wrapped as an operator.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DenseMatrix,
}

impl DenseOperator {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(BbmmError::shape("dense operator requires a square matrix"));
        }
        Ok(DenseOperator { matrix })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

impl SymmetricOperator for DenseOperator {
    fn size(&self) -> usize {
        self.matrix.rows()
    }

    fn matmul(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        check_input_rows(self.size(), m)?;
        self.matrix.matmul(m)
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        check_row_index(self.size(), i)?;
        Ok(self.matrix.row_slice(i).to_vec())
    }

    fn diag(&self) -> Vec<f64> {
        self.matrix.diagonal()
    }
}

/// `c * I` for a scalar c.
#[derive(Debug, Clone)]
pub struct ScaledIdentityOperator {
    size: usize,
    value: f64,
}

impl ScaledIdentityOperator {
    pub fn new(size: usize, value: f64) -> Self {
        ScaledIdentityOperator { size, value }
    }
}

impl SymmetricOperator for ScaledIdentityOperator {
    fn size(&self) -> usize {
        self.size
    }

    fn matmul(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        check_input_rows(self.size, m)?;
        Ok(m.scale(self.value))
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        check_row_index(self.size, i)?;
        let mut r = vec![0.0; self.size];
        r[i] = self.value;
        Ok(r)
    }

    fn diag(&self) -> Vec<f64> {
        vec![self.value; self.size]
    }
}

/// Sum of operators of equal size.
pub struct SumOperator {
    terms: Vec<Arc<dyn SymmetricOperator>>,
}

impl SumOperator {
    pub fn new(terms: Vec<Arc<dyn SymmetricOperator>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(BbmmError::shape("sum of zero operators"));
        }
        let n = terms[0].size();
        if terms.iter().any(|t| t.size() != n) {
            return Err(BbmmError::shape("summed operators differ in size"));
        }
        Ok(SumOperator { terms })
    }
}

impl SymmetricOperator for SumOperator {
    fn size(&self) -> usize {
        self.terms[0].size()
    }

    fn matmul(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        let mut acc = self.terms[0].matmul(m)?;
        for t in &self.terms[1..] {
            acc = acc.add(&t.matmul(m)?)?;
        }
        Ok(acc)
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        let mut acc = self.terms[0].row(i)?;
        for t in &self.terms[1..] {
            let r = t.row(i)?;
            for (a, b) in acc.iter_mut().zip(&r) {
                *a += b;
            }
        }
        Ok(acc)
    }

    fn diag(&self) -> Vec<f64> {
        let mut acc = self.terms[0].diag();
        for t in &self.terms[1..] {
            for (a, b) in acc.iter_mut().zip(t.diag()) {
                *a += b;
            }
        }
        acc
    }
}

/// `a * A` for a scalar a and operator A.
pub struct ScaledOperator {
    scale: f64,
    inner: Arc<dyn SymmetricOperator>,
}

impl ScaledOperator {
    pub fn new(scale: f64, inner: Arc<dyn SymmetricOperator>) -> Self {
        ScaledOperator { scale, inner }
    }
}

impl SymmetricOperator for ScaledOperator {
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn matmul(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.inner.matmul(m)?.scale(self.scale))
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        let mut r = self.inner.row(i)?;
        for v in r.iter_mut() {
            *v *= self.scale;
        }
        Ok(r)
    }

    fn diag(&self) -> Vec<f64> {
        self.inner.diag().iter().map(|v| v * self.scale).collect()
    }
}

/// Materializes the induced matrix row by row, which is cheaper than a
/// multiply against the identity for every structured operator here.
pub fn materialize(op: &dyn SymmetricOperator) -> Result<DenseMatrix> {
    let n = op.size();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let r = op.row(i)?;
        out.row_slice_mut(i).copy_from_slice(&r);
    }
    Ok(out)
}

/// Counts matmul calls on a wrapped operator. Used by tests asserting how
/// many multiplies a routine performs.
pub struct CountingOperator {
    inner: Arc<dyn SymmetricOperator>,
    matmuls: std::sync::atomic::AtomicUsize,
}

impl CountingOperator {
    pub fn new(inner: Arc<dyn SymmetricOperator>) -> Self {
        CountingOperator {
            inner,
            matmuls: std::sync::atomic::AtomicUsize::new(0),
        }
    }

    pub fn matmul_count(&self) -> usize {
        self.matmuls.load(std::sync::atomic::Ordering::Relaxed)
    }
}

impl SymmetricOperator for CountingOperator {
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn matmul(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        self.matmuls
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.inner.matmul(m)
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        self.inner.row(i)
    }

    fn diag(&self) -> Vec<f64> {
        self.inner.diag()
    }
}
