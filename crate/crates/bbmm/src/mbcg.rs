//! Preconditioned conjugate gradients, in two forms: a single-vector solver
//! and the batched variant that drives everything else. The batched solver
//! handles all right-hand sides in one matrix-matrix multiply per iteration,
//! keeps per-column coefficient histories, and reassembles the Lanczos
//! tridiagonal matrix of each probe column from those coefficients.
//!
//! Sign conventions are the textbook ones: `r = b - A u`,
//! `beta_j = (r_j' z_j) / (r_{j-1}' z_{j-1})`. Converged columns are frozen
//! (their step size forced to zero) while the rest continue.

use crate::dense::{axpy, dot, norm2, DenseMatrix};
use crate::error::{BbmmError, Result};
use crate::operator::SymmetricOperator;
use crate::precond::Preconditioner;

/// Iteration controls shared by both solvers.
#[derive(Debug, Clone, Copy)]
pub struct McbgConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub min_iters: usize,
}

impl Default for McbgConfig {
    fn default() -> Self {
        McbgConfig {
            max_iters: 20,
            tol: 1e-6,
            min_iters: 1,
        }
    }
}

impl McbgConfig {
    pub fn new(max_iters: usize, tol: f64) -> Result<Self> {
        let cfg = McbgConfig {
            max_iters,
            tol,
            min_iters: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(BbmmError::domain("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(BbmmError::domain("tolerance must be positive"));
        }
        if self.min_iters > self.max_iters {
            return Err(BbmmError::domain("min_iters exceeds max_iters"));
        }
        Ok(())
    }
}

/// Symmetric tridiagonal matrix recovered from CG coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(BbmmError::shape("empty tridiagonal"));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(BbmmError::shape("tridiagonal band length mismatch"));
        }
        Ok(SymTridiagonal { diag, offdiag })
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let p = self.size();
        let mut m = DenseMatrix::zeros(p, p);
        for i in 0..p {
            m.set(i, i, self.diag[i]);
            if i + 1 < p {
                m.set(i, i + 1, self.offdiag[i]);
                m.set(i + 1, i, self.offdiag[i]);
            }
        }
        m
    }
}

/// Rebuilds the Lanczos tridiagonal matrix from the CG coefficient history:
/// `T[0][0] = 1/a_1`, `T[j][j] = 1/a_{j+1} + b_j/a_j`, and the off-diagonal
/// entry coupling j-1 and j is `sqrt(b_j)/a_j` (1-based coefficients).
pub fn tridiag_from_coefficients(alphas: &[f64], betas: &[f64]) -> Result<SymTridiagonal> {
    let p = alphas.len();
    if p == 0 {
        return Err(BbmmError::shape("no CG coefficients recorded"));
    }
    if betas.len() + 1 != p {
        return Err(BbmmError::shape(format!(
            "{p} alphas need {} betas, got {}",
            p - 1,
            betas.len()
        )));
    }
    for &a in alphas {
        if !(a > 0.0) || !a.is_finite() {
            return Err(BbmmError::IndefiniteOperator(format!(
                "non-positive CG step {a:.3e}"
            )));
        }
    }
    for &b in betas {
        if b < 0.0 || !b.is_finite() {
            return Err(BbmmError::numeric(format!("negative CG beta {b:.3e}")));
        }
    }
    let mut diag = Vec::with_capacity(p);
    diag.push(1.0 / alphas[0]);
    for j in 1..p {
        diag.push(1.0 / alphas[j] + betas[j - 1] / alphas[j - 1]);
    }
    let offdiag: Vec<f64> = (0..p - 1).map(|j| betas[j].sqrt() / alphas[j]).collect();
    SymTridiagonal::new(diag, offdiag)
}

/// Result of a single-vector PCG run.
#[derive(Debug, Clone)]
pub struct PcgOutput {
    pub solution: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Relative residual after each iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Standard preconditioned conjugate gradients on one right-hand side.
pub fn pcg(
    op: &dyn SymmetricOperator,
    b: &[f64],
    precond: &dyn Preconditioner,
    cfg: &McbgConfig,
) -> Result<PcgOutput> {
    cfg.validate()?;
    let n = op.size();
    if b.len() != n {
        return Err(BbmmError::shape("right-hand side length mismatch"));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(PcgOutput {
            solution: vec![0.0; n],
            alphas: vec![],
            betas: vec![],
            residuals: vec![],
            converged: true,
        });
    }
    let mut u = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = precond.solve_vec(&r)?;
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    if !(rz > 0.0) || !rz.is_finite() {
        return Err(BbmmError::IndefiniteOperator(format!(
            "initial preconditioned inner product {rz:.3e}"
        )));
    }
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut residuals = Vec::new();
    let mut converged = false;
    for iter in 1..=cfg.max_iters {
        let v = op.matvec(&d)?;
        let dv = dot(&d, &v);
        if !(dv > 0.0) || !dv.is_finite() {
            return Err(BbmmError::IndefiniteOperator(format!(
                "d'Ad = {dv:.3e} at iteration {iter}"
            )));
        }
        let alpha = rz / dv;
        alphas.push(alpha);
        axpy(&mut u, alpha, &d);
        axpy(&mut r, -alpha, &v);
        let res = norm2(&r) / bnorm;
        residuals.push(res);
        if res <= cfg.tol && iter >= cfg.min_iters {
            converged = true;
            break;
        }
        if iter == cfg.max_iters {
            break;
        }
        z = precond.solve_vec(&r)?;
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0) || !rz_new.is_finite() {
            return Err(BbmmError::IndefiniteOperator(format!(
                "preconditioned residual product {rz_new:.3e} at iteration {iter}"
            )));
        }
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
    }
    Ok(PcgOutput {
        solution: u,
        alphas,
        betas,
        residuals,
        converged,
    })
}

/// Output of the batched solver.
#[derive(Debug, Clone)]
pub struct McbgOutput {
    /// n x c solutions, one column per right-hand side.
    pub solutions: DenseMatrix,
    /// Lanczos tridiagonal matrices for the trailing probe columns.
    pub tridiags: Vec<SymTridiagonal>,
    pub iterations_run: usize,
    /// Final relative residual per column.
    pub residual_norms: Vec<f64>,
    /// Per-column convergence flags.
    pub converged: Vec<bool>,
}

impl McbgOutput {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// Batched PCG over the columns of `b`; the trailing `probe_cols` columns
/// additionally have their Lanczos tridiagonal matrices recovered.
///
/// Update rules are applied per column with that column's own coefficients.
/// A column that reaches the tolerance is frozen: its coefficients stop
/// accumulating and its iterate no longer changes, while remaining columns
/// keep iterating until all converge or the budget runs out.
pub fn mbcg(
    op: &dyn SymmetricOperator,
    b: &DenseMatrix,
    precond: &dyn Preconditioner,
    cfg: &McbgConfig,
    probe_cols: usize,
) -> Result<McbgOutput> {
    cfg.validate()?;
    let n = op.size();
    if b.rows() != n {
        return Err(BbmmError::shape(format!(
            "operator of size {n} against {}x{} right-hand sides",
            b.rows(),
            b.cols()
        )));
    }
    let c = b.cols();
    if probe_cols > c {
        return Err(BbmmError::shape("more probe columns than columns"));
    }

    let bnorms: Vec<f64> = (0..c).map(|j| norm2(&b.column(j))).collect();
    for (j, &bn) in bnorms.iter().enumerate() {
        if bn == 0.0 && j >= c - probe_cols {
            return Err(BbmmError::domain(format!("probe column {j} is zero")));
        }
    }

    let mut u = DenseMatrix::zeros(n, c);
    let mut r = b.clone();
    let mut z = precond.solve(&r)?;
    let mut d = z.clone();
    let mut rz = vec![0.0; c];
    let mut active = vec![true; c];
    let mut residual_norms = vec![0.0; c];
    let mut converged = vec![false; c];
    for j in 0..c {
        if bnorms[j] == 0.0 {
            active[j] = false;
            converged[j] = true;
            continue;
        }
        rz[j] = dot(&r.column(j), &z.column(j));
        if !(rz[j] > 0.0) || !rz[j].is_finite() {
            return Err(BbmmError::IndefiniteOperator(format!(
                "initial preconditioned product {:.3e} in column {j}",
                rz[j]
            )));
        }
        residual_norms[j] = 1.0;
    }

    let mut alphas: Vec<Vec<f64>> = vec![Vec::new(); c];
    let mut betas: Vec<Vec<f64>> = vec![Vec::new(); c];
    let mut iterations_run = 0;

    for iter in 1..=cfg.max_iters {
        if active.iter().all(|&a| !a) {
            break;
        }
        let v = op.matmul(&d)?;
        iterations_run = iter;
        for j in 0..c {
            if !active[j] {
                continue;
            }
            let dj = d.column(j);
            let vj = v.column(j);
            let dv = dot(&dj, &vj);
            if !(dv > 0.0) || !dv.is_finite() {
                return Err(BbmmError::IndefiniteOperator(format!(
                    "d'Ad = {dv:.3e} in column {j} at iteration {iter}"
                )));
            }
            let alpha = rz[j] / dv;
            alphas[j].push(alpha);
            for i in 0..n {
                u.set(i, j, u.get(i, j) + alpha * dj[i]);
                r.set(i, j, r.get(i, j) - alpha * vj[i]);
            }
            let res = norm2(&r.column(j)) / bnorms[j];
            residual_norms[j] = res;
            if res <= cfg.tol && iter >= cfg.min_iters {
                active[j] = false;
                converged[j] = true;
            }
        }
        if active.iter().all(|&a| !a) || iter == cfg.max_iters {
            break;
        }
        z = precond.solve(&r)?;
        for j in 0..c {
            if !active[j] {
                continue;
            }
            let rz_new = dot(&r.column(j), &z.column(j));
            if !(rz_new > 0.0) || !rz_new.is_finite() {
                return Err(BbmmError::IndefiniteOperator(format!(
                    "preconditioned residual product {rz_new:.3e} in column {j}"
                )));
            }
            let beta = rz_new / rz[j];
            betas[j].push(beta);
            rz[j] = rz_new;
            for i in 0..n {
                d.set(i, j, z.get(i, j) + beta * d.get(i, j));
            }
        }
    }

    let mut tridiags = Vec::with_capacity(probe_cols);
    for j in (c - probe_cols)..c {
        tridiags.push(tridiag_from_coefficients(&alphas[j], &betas[j])?);
    }
    Ok(McbgOutput {
        solutions: u,
        tridiags,
        iterations_run,
        residual_norms,
        converged,
    })
}
