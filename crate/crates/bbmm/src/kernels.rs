//! Kernel functions, hyperparameters, datasets, and construction of the
//! training covariance operator `K + sigma^2 I` (plus its hyperparameter
//! derivative operators) for each approximation mode.
//!
//! All positive hyperparameters live on the log scale, and derivatives are
//! taken with respect to the log parameters, so the chain-rule factors are
//! folded into the derivative operators.

use crate::dense::DenseMatrix;
use crate::error::{BbmmError, Result};
use crate::interp::{Grid1d, SkiOperator};
use crate::lowrank::{SorOperator, SymSandwichOperator};
use crate::operator::{DenseOperator, ScaledIdentityOperator, SymmetricOperator};
use crate::toeplitz::ToeplitzColumn;
use rand::SeedableRng;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Rbf,
    Matern52,
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Rbf => "rbf",
            KernelKind::Matern52 => "matern52",
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = BbmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf" => Ok(KernelKind::Rbf),
            "matern52" => Ok(KernelKind::Matern52),
            other => Err(BbmmError::domain(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Log-parameterized hyperparameters; the exponential map keeps the derived
/// lengthscale, output scale, and noise variance strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub log_lengthscale: f64,
    pub log_outputscale: f64,
    pub log_noise: f64,
}

impl Hyperparameters {
    pub fn new(log_lengthscale: f64, log_outputscale: f64, log_noise: f64) -> Self {
        Hyperparameters {
            log_lengthscale,
            log_outputscale,
            log_noise,
        }
    }

    /// From natural-scale values.
    pub fn from_values(lengthscale: f64, outputscale: f64, noise_variance: f64) -> Result<Self> {
        if lengthscale <= 0.0 || outputscale <= 0.0 || noise_variance <= 0.0 {
            return Err(BbmmError::domain("hyperparameters must be positive"));
        }
        Ok(Hyperparameters {
            log_lengthscale: lengthscale.ln(),
            log_outputscale: outputscale.ln(),
            log_noise: 0.5 * noise_variance.ln(),
        })
    }

    pub fn lengthscale(&self) -> f64 {
        self.log_lengthscale.exp()
    }

    pub fn outputscale(&self) -> f64 {
        self.log_outputscale.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        (2.0 * self.log_noise).exp()
    }

    pub fn to_vec(self) -> [f64; 3] {
        [self.log_lengthscale, self.log_outputscale, self.log_noise]
    }

    pub fn from_slice(v: &[f64; 3]) -> Self {
        Hyperparameters::new(v[0], v[1], v[2])
    }
}

/// Per-column affine record so standardized data can be mapped back exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub target_mean: f64,
    pub target_scale: f64,
    /// Columns left unscaled because they had zero variance.
    pub constant_features: Vec<usize>,
}

/// Training inputs and targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DenseMatrix,
    y: Vec<f64>,
    standardization: Option<Standardization>,
}

impl Dataset {
    pub fn new(x: DenseMatrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(BbmmError::shape(format!(
                "{} rows of inputs but {} targets",
                x.rows(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(BbmmError::numeric("non-finite target"));
        }
        Ok(Dataset {
            x,
            y,
            standardization: None,
        })
    }

    pub fn with_standardization(
        x: DenseMatrix,
        y: Vec<f64>,
        record: Standardization,
    ) -> Result<Self> {
        let mut d = Dataset::new(x, y)?;
        d.standardization = Some(record);
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn inputs(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Kernel value from a squared distance.
#[inline]
fn kernel_from_r2(kind: KernelKind, r2: f64, ell: f64, s: f64) -> f64 {
    match kind {
        KernelKind::Rbf => s * (-r2 / (2.0 * ell * ell)).exp(),
        KernelKind::Matern52 => {
            let u = 5.0_f64.sqrt() * r2.sqrt() / ell;
            s * (1.0 + u + u * u / 3.0) * (-u).exp()
        }
    }
}

/// d(kernel)/d(log lengthscale) from a squared distance.
#[inline]
fn kernel_dlogell_from_r2(kind: KernelKind, r2: f64, ell: f64, s: f64) -> f64 {
    match kind {
        KernelKind::Rbf => kernel_from_r2(kind, r2, ell, s) * r2 / (ell * ell),
        KernelKind::Matern52 => {
            let u = 5.0_f64.sqrt() * r2.sqrt() / ell;
            s * (u * u * (1.0 + u) / 3.0) * (-u).exp()
        }
    }
}

pub fn kernel_eval(kind: KernelKind, hp: &Hyperparameters, x: &[f64], x2: &[f64]) -> f64 {
    kernel_from_r2(kind, sq_dist(x, x2), hp.lengthscale(), hp.outputscale())
}

/// All-pairs kernel matrix between the rows of `x1` and `x2`.
pub fn kernel_matrix(
    kind: KernelKind,
    hp: &Hyperparameters,
    x1: &DenseMatrix,
    x2: &DenseMatrix,
) -> Result<DenseMatrix> {
    if x1.cols() != x2.cols() {
        return Err(BbmmError::shape("kernel inputs differ in dimension"));
    }
    let (ell, s) = (hp.lengthscale(), hp.outputscale());
    let mut out = DenseMatrix::zeros(x1.rows(), x2.rows());
    for i in 0..x1.rows() {
        for j in 0..x2.rows() {
            let r2 = sq_dist(x1.row_slice(i), x2.row_slice(j));
            out.set(i, j, kernel_from_r2(kind, r2, ell, s));
        }
    }
    Ok(out)
}

fn kernel_matrix_dlogell(
    kind: KernelKind,
    hp: &Hyperparameters,
    x1: &DenseMatrix,
    x2: &DenseMatrix,
) -> DenseMatrix {
    let (ell, s) = (hp.lengthscale(), hp.outputscale());
    let mut out = DenseMatrix::zeros(x1.rows(), x2.rows());
    for i in 0..x1.rows() {
        for j in 0..x2.rows() {
            let r2 = sq_dist(x1.row_slice(i), x2.row_slice(j));
            out.set(i, j, kernel_dlogell_from_r2(kind, r2, ell, s));
        }
    }
    out
}

/// Kernel approximation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    /// Subset-of-regressors with the given number of inducing inputs.
    Sor {
        inducing: usize,
    },
    /// Structured kernel interpolation on a 1-D grid of the given size.
    Ski {
        grid: usize,
    },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Sor { .. } => "sor",
            Mode::Ski { .. } => "ski",
        }
    }
}

/// Seeded inducing-input selection: a uniform subset of training rows without
/// replacement. The same seed must be passed to both builder entry points so
/// the operator and its derivatives share one subset.
fn inducing_indices(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x5eed_1d0f);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

fn select_rows(x: &DenseMatrix, idx: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(idx.len(), x.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_slice_mut(r).copy_from_slice(x.row_slice(i));
    }
    out
}

fn ski_plan(data: &Dataset, m: usize) -> Result<(Grid1d, crate::interp::SparseInterpolation)> {
    if data.dim() != 1 {
        return Err(BbmmError::UnsupportedMode(format!(
            "ski mode requires 1-dimensional inputs, got d={}",
            data.dim()
        )));
    }
    let xs = data.inputs().column(0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &xs {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let grid = Grid1d::spanning(lo, hi, m)?;
    let w = grid.interpolation_matrix(&xs)?;
    Ok((grid, w))
}

fn grid_kernel_column(kind: KernelKind, hp: &Hyperparameters, grid: &Grid1d) -> ToeplitzColumn {
    let (ell, s) = (hp.lengthscale(), hp.outputscale());
    let col: Vec<f64> = (0..grid.len())
        .map(|j| {
            let r = j as f64 * grid.spacing();
            kernel_from_r2(kind, r * r, ell, s)
        })
        .collect();
    ToeplitzColumn::new(col).expect("kernel values are finite")
}

fn grid_kernel_column_dlogell(
    kind: KernelKind,
    hp: &Hyperparameters,
    grid: &Grid1d,
) -> ToeplitzColumn {
    let (ell, s) = (hp.lengthscale(), hp.outputscale());
    let col: Vec<f64> = (0..grid.len())
        .map(|j| {
            let r = j as f64 * grid.spacing();
            kernel_dlogell_from_r2(kind, r * r, ell, s)
        })
        .collect();
    ToeplitzColumn::new(col).expect("kernel derivatives are finite")
}

/// Builds the training covariance operator `K + sigma^2 I` for a mode.
pub fn build_operator(
    mode: Mode,
    kind: KernelKind,
    hp: &Hyperparameters,
    data: &Dataset,
    seed: u64,
) -> Result<Arc<dyn SymmetricOperator>> {
    let sigma2 = hp.noise_variance();
    match mode {
        Mode::Exact => {
            let k = kernel_matrix(kind, hp, data.inputs(), data.inputs())?;
            Ok(Arc::new(DenseOperator::new(k.add_diagonal(sigma2)?)?))
        }
        Mode::Sor { inducing } => {
            if inducing > data.len() {
                return Err(BbmmError::domain(format!(
                    "{inducing} inducing inputs exceed {} training rows",
                    data.len()
                )));
            }
            if inducing == 0 {
                return Err(BbmmError::domain("need at least one inducing input"));
            }
            let idx = inducing_indices(data.len(), inducing, seed);
            let xu = select_rows(data.inputs(), &idx);
            let k_xu = kernel_matrix(kind, hp, data.inputs(), &xu)?;
            let k_uu = kernel_matrix(kind, hp, &xu, &xu)?;
            Ok(Arc::new(SorOperator::new(k_xu, &k_uu, sigma2)?))
        }
        Mode::Ski { grid } => {
            let (grid, w) = ski_plan(data, grid)?;
            let col = grid_kernel_column(kind, hp, &grid);
            Ok(Arc::new(SkiOperator::new(w, col, sigma2)?))
        }
    }
}

/// Derivative operators for (log lengthscale, log outputscale, log noise), in
/// that order. Inducing subsets and grids are held fixed; only kernel entries
/// are differentiated.
pub fn build_derivative_operators(
    mode: Mode,
    kind: KernelKind,
    hp: &Hyperparameters,
    data: &Dataset,
    seed: u64,
) -> Result<Vec<Arc<dyn SymmetricOperator>>> {
    let n = data.len();
    let sigma2 = hp.noise_variance();
    let noise_op: Arc<dyn SymmetricOperator> =
        Arc::new(ScaledIdentityOperator::new(n, 2.0 * sigma2));
    match mode {
        Mode::Exact => {
            let k = kernel_matrix(kind, hp, data.inputs(), data.inputs())?;
            let dk_ell = kernel_matrix_dlogell(kind, hp, data.inputs(), data.inputs());
            Ok(vec![
                Arc::new(DenseOperator::new(dk_ell)?),
                Arc::new(DenseOperator::new(k)?),
                noise_op,
            ])
        }
        Mode::Sor { inducing } => {
            if inducing > data.len() || inducing == 0 {
                return Err(BbmmError::domain("invalid inducing count"));
            }
            let idx = inducing_indices(n, inducing, seed);
            let xu = select_rows(data.inputs(), &idx);
            let k_xu = kernel_matrix(kind, hp, data.inputs(), &xu)?;
            let k_uu = kernel_matrix(kind, hp, &xu, &xu)?;
            let (chol, _) = crate::dense::cholesky_with_jitter(&k_uu)?;
            // a = K_XU K_UU^{-1}, so each derivative is
            // [a dK_XU] [[-dK_UU, I], [I, 0]] [a dK_XU]^T.
            let a = chol.solve_mat(&k_xu.transpose())?.transpose();
            let m = inducing;
            let sandwich =
                |dk_xu: DenseMatrix, dk_uu: DenseMatrix| -> Result<SymSandwichOperator> {
                    let mut factor = DenseMatrix::zeros(n, 2 * m);
                    for i in 0..n {
                        factor.row_slice_mut(i)[..m].copy_from_slice(a.row_slice(i));
                        factor.row_slice_mut(i)[m..].copy_from_slice(dk_xu.row_slice(i));
                    }
                    let mut core = DenseMatrix::zeros(2 * m, 2 * m);
                    for p in 0..m {
                        for q in 0..m {
                            core.set(p, q, -dk_uu.get(p, q));
                        }
                        core.set(p, m + p, 1.0);
                        core.set(m + p, p, 1.0);
                    }
                    SymSandwichOperator::new(factor, core, 0.0)
                };
            let d_ell = sandwich(
                kernel_matrix_dlogell(kind, hp, data.inputs(), &xu),
                kernel_matrix_dlogell(kind, hp, &xu, &xu),
            )?;
            let d_s = sandwich(k_xu, k_uu)?;
            Ok(vec![Arc::new(d_ell), Arc::new(d_s), noise_op])
        }
        Mode::Ski { grid } => {
            let (grid, w) = ski_plan(data, grid)?;
            let d_ell =
                SkiOperator::new(w.clone(), grid_kernel_column_dlogell(kind, hp, &grid), 0.0)?;
            let d_s = SkiOperator::new(w, grid_kernel_column(kind, hp, &grid), 0.0)?;
            Ok(vec![Arc::new(d_ell), Arc::new(d_s), noise_op])
        }
    }
}
