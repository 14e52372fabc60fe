//! Low-rank structured operators: the inducing-point (subset of regressors)
//! kernel and the generic symmetric sandwich `F C F^T + shift I` that backs
//! its derivatives and plain low-rank-plus-diagonal kernels.

use crate::dense::{cholesky_with_jitter, dot, CholeskyFactor, DenseMatrix};
use crate::error::{BbmmError, Result};
use crate::operator::{check_input_rows, check_row_index, SymmetricOperator};

/// `K_XU K_UU^{-1} K_XU^T + sigma2 I` with the inducing factor applied through
/// a Cholesky of `K_UU` cached at construction.
pub struct SorOperator {
    k_xu: DenseMatrix,
    /// `K_UU^{-1} K_XU^T`, m x n, precomputed from the cached factorization.
    solve_t: DenseMatrix,
    sigma2: f64,
    diag_cache: Vec<f64>,
    jitter: f64,
}

impl SorOperator {
    pub fn new(k_xu: DenseMatrix, k_uu: &DenseMatrix, sigma2: f64) -> Result<Self> {
        if sigma2 <= 0.0 || !sigma2.is_finite() {
            return Err(BbmmError::domain(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        if k_uu.rows() != k_uu.cols() || k_uu.rows() != k_xu.cols() {
            return Err(BbmmError::shape("inducing kernel shape mismatch"));
        }
        let (chol, jitter) = cholesky_with_jitter(k_uu)?;
        let solve_t = chol.solve_mat(&k_xu.transpose())?;
        let n = k_xu.rows();
        let mut diag_cache = vec![0.0; n];
        for i in 0..n {
            diag_cache[i] = dot(k_xu.row_slice(i), &solve_t.column(i)) + sigma2;
        }
        Ok(SorOperator {
            k_xu,
            solve_t,
            sigma2,
            diag_cache,
            jitter,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn inducing_count(&self) -> usize {
        self.k_xu.cols()
    }
}

impl SymmetricOperator for SorOperator {
    fn size(&self) -> usize {
        self.k_xu.rows()
    }

    fn matmul(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        check_input_rows(self.size(), m)?;
        let inner = self.k_xu.matmul(&self.solve_t.matmul(m)?)?;
        inner.add_scaled(m, self.sigma2)
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        check_row_index(self.size(), i)?;
        let coeff = self.solve_t.column(i);
        let mut out = self.k_xu.matvec(&coeff)?;
        out[i] += self.sigma2;
        Ok(out)
    }

    fn diag(&self) -> Vec<f64> {
        self.diag_cache.clone()
    }
}

/// `(K_XU K_UU^{-1} K_UX + sigma2 I) M` as a one-shot product; the operator
/// form amortizes the factorization across calls.
pub fn sor_matmul(
    k_xu: &DenseMatrix,
    k_uu: &DenseMatrix,
    sigma2: f64,
    m: &DenseMatrix,
) -> Result<DenseMatrix> {
    SorOperator::new(k_xu.clone(), k_uu, sigma2)?.matmul(m)
}

/// Symmetric sandwich `F C F^T + shift I` for a dense n x q factor and small
/// symmetric core. Covers low-rank-plus-diagonal kernels and the inducing
/// kernel's hyperparameter derivatives.
pub struct SymSandwichOperator {
    factor: DenseMatrix,
    core: DenseMatrix,
    shift: f64,
    diag_cache: Vec<f64>,
}

impl SymSandwichOperator {
    pub fn new(factor: DenseMatrix, core: DenseMatrix, shift: f64) -> Result<Self> {
        if core.rows() != core.cols() || core.rows() != factor.cols() {
            return Err(BbmmError::shape("sandwich core shape mismatch"));
        }
        if !shift.is_finite() {
            return Err(BbmmError::numeric("non-finite diagonal shift"));
        }
        let n = factor.rows();
        let q = factor.cols();
        let mut diag_cache = vec![0.0; n];
        let mut tmp = vec![0.0; q];
        for i in 0..n {
            let f = factor.row_slice(i);
            for (p, slot) in tmp.iter_mut().enumerate() {
                *slot = dot(core.row_slice(p), f);
            }
            diag_cache[i] = dot(f, &tmp) + shift;
        }
        Ok(SymSandwichOperator {
            factor,
            core,
            shift,
            diag_cache,
        })
    }

    /// `X X^T + sigma2 I` from a plain feature matrix.
    pub fn low_rank_plus_diag(x: DenseMatrix, sigma2: f64) -> Result<Self> {
        let q = x.cols();
        SymSandwichOperator::new(x, DenseMatrix::identity(q), sigma2)
    }
}

impl SymmetricOperator for SymSandwichOperator {
    fn size(&self) -> usize {
        self.factor.rows()
    }

    fn matmul(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        check_input_rows(self.size(), m)?;
        let inner = self
            .factor
            .matmul(&self.core.matmul(&self.factor.transpose().matmul(m)?)?)?;
        if self.shift == 0.0 {
            Ok(inner)
        } else {
            inner.add_scaled(m, self.shift)
        }
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        check_row_index(self.size(), i)?;
        let f = self.factor.row_slice(i);
        let coeff = self.core.matvec(f)?;
        let mut out = self.factor.matvec(&coeff)?;
        out[i] += self.shift;
        Ok(out)
    }

    fn diag(&self) -> Vec<f64> {
        self.diag_cache.clone()
    }
}

/// Dense solve against `K_UU + jitter` kept around for assembling predictive
/// quantities in inducing-point mode.
pub struct InducingSolve {
    chol: CholeskyFactor,
}

impl InducingSolve {
    pub fn new(k_uu: &DenseMatrix) -> Result<Self> {
        let (chol, _) = cholesky_with_jitter(k_uu)?;
        Ok(InducingSolve { chol })
    }

    pub fn solve(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        self.chol.solve_mat(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rand_mat(r: usize, c: usize, seed: u64) -> DenseMatrix {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        DenseMatrix::new(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn spd(n: usize, seed: u64) -> DenseMatrix {
        let a = rand_mat(n, n, seed);
        a.matmul(&a.transpose())
            .unwrap()
            .add_diagonal(n as f64)
            .unwrap()
    }

    #[test]
    fn zero_cross_kernel_is_noise_only() {
        let k_xu = DenseMatrix::zeros(6, 3);
        let k_uu = spd(3, 1);
        let m = rand_mat(6, 2, 2);
        let got = sor_matmul(&k_xu, &k_uu, 0.4, &m).unwrap();
        for (x, y) in got.values().iter().zip(m.values()) {
            assert!((x - 0.4 * y).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_dense_materialization() {
        let n = 30;
        let mm = 5;
        let k_xu = rand_mat(n, mm, 3);
        let k_uu = spd(mm, 4);
        let m = rand_mat(n, 3, 5);
        let sigma2 = 0.2;
        let fast = sor_matmul(&k_xu, &k_uu, sigma2, &m).unwrap();
        let kuu_inv = CholeskyFactor::new(&k_uu)
            .unwrap()
            .solve_mat(&DenseMatrix::identity(mm))
            .unwrap();
        let dense = k_xu
            .matmul(&kuu_inv)
            .unwrap()
            .matmul(&k_xu.transpose())
            .unwrap()
            .add_diagonal(sigma2)
            .unwrap()
            .matmul(&m)
            .unwrap();
        for (x, y) in fast.values().iter().zip(dense.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn operator_row_and_diag_consistent() {
        let op = SorOperator::new(rand_mat(10, 4, 6), &spd(4, 7), 0.1).unwrap();
        for i in [0usize, 4, 9] {
            let r = op.row(i).unwrap();
            let mut e = vec![0.0; 10];
            e[i] = 1.0;
            let col = op.matvec(&e).unwrap();
            for j in 0..10 {
                assert!((r[j] - col[j]).abs() < 1e-12);
            }
            assert!((r[i] - op.diag()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sandwich_matches_explicit_product() {
        let f = rand_mat(8, 3, 8);
        let mut core = spd(3, 9);
        core = core.add(&core.transpose()).unwrap().scale(0.5);
        let op = SymSandwichOperator::new(f.clone(), core.clone(), 0.3).unwrap();
        let m = rand_mat(8, 2, 10);
        let dense = f
            .matmul(&core)
            .unwrap()
            .matmul(&f.transpose())
            .unwrap()
            .add_diagonal(0.3)
            .unwrap();
        let want = dense.matmul(&m).unwrap();
        let got = op.matmul(&m).unwrap();
        for (x, y) in got.values().iter().zip(want.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        for i in 0..8 {
            assert!((op.diag()[i] - dense.get(i, i)).abs() < 1e-12);
        }
    }

    #[test]
    fn sor_rejects_bad_noise() {
        assert!(sor_matmul(
            &DenseMatrix::zeros(3, 2),
            &spd(2, 11),
            -1.0,
            &DenseMatrix::zeros(3, 1)
        )
        .is_err());
    }
}
