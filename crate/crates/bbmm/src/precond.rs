//! Rank-k pivoted Cholesky decomposition built from row access, and the
//! preconditioner `P = L L^T + sigma^2 I` it induces: O(nk^2) solves through
//! the Woodbury identity, an exact log-determinant through the matrix
//! determinant lemma, and probe sampling matched to the preconditioner.

use crate::dense::{dot, CholeskyFactor, DenseMatrix};
use crate::error::{BbmmError, Result};
use rand::distributions::Distribution;
use rand::RngCore;
use rand_distr::StandardNormal;

/// Greedy rank-k factorization: at each step the largest remaining Schur
/// complement diagonal is pivoted (ties to the lowest index) and one matrix
/// row is read.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    n: usize,
    /// Columns of L, each of length n, in pivot order.
    cols: Vec<Vec<f64>>,
    pivots: Vec<usize>,
    residual_trace: f64,
}

impl PivotedCholesky {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.cols.len()
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn residual_trace(&self) -> f64 {
        self.residual_trace
    }

    pub fn column(&self, s: usize) -> &[f64] {
        &self.cols[s]
    }

    /// L as a dense n x k matrix; `None` when the factorization exited at
    /// rank zero.
    pub fn factor_dense(&self) -> Option<DenseMatrix> {
        if self.cols.is_empty() {
            return None;
        }
        let k = self.cols.len();
        let mut l = DenseMatrix::zeros(self.n, k);
        for (s, col) in self.cols.iter().enumerate() {
            for i in 0..self.n {
                l.set(i, s, col[i]);
            }
        }
        Some(l)
    }

    /// `L L^T` materialized, for oracles and small problems.
    pub fn low_rank_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n, self.n);
        for col in &self.cols {
            for i in 0..self.n {
                if col[i] == 0.0 {
                    continue;
                }
                for j in 0..self.n {
                    out.set(i, j, out.get(i, j) + col[i] * col[j]);
                }
            }
        }
        out
    }

    /// `L^T v` (length k).
    pub fn lt_apply(&self, v: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|c| dot(c, v)).collect()
    }

    /// `L w` (length n).
    pub fn l_apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (c, &wi) in self.cols.iter().zip(w) {
            for (o, &ci) in out.iter_mut().zip(c) {
                *o += wi * ci;
            }
        }
        out
    }
}

/// Runs the pivoted Cholesky recursion using only a row accessor and the
/// diagonal. Stops early (shrinking the rank) once the largest remaining
/// diagonal falls below `1e-12` of the initial maximum.
pub fn pivoted_cholesky<F>(mut row: F, diag: &[f64], k: usize) -> Result<PivotedCholesky>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    let n = diag.len();
    if n == 0 {
        return Err(BbmmError::shape("empty diagonal"));
    }
    if k == 0 || k > n {
        return Err(BbmmError::domain(format!(
            "rank must be in 1..={n}, got {k}"
        )));
    }
    let mut d = diag.to_vec();
    let max0 = d.iter().fold(0.0f64, |a, &v| a.max(v));
    let neg_tol = -1e-8 * max0.max(1.0);
    let stop_tol = 1e-12 * max0;
    if d.iter().any(|&v| v < neg_tol) {
        return Err(BbmmError::NotPositiveDefinite(
            "negative diagonal entry".into(),
        ));
    }
    let mut pivoted = vec![false; n];
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut pivots = Vec::with_capacity(k);

    for _ in 0..k {
        let mut best = usize::MAX;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..n {
            if !pivoted[i] && d[i] > best_val {
                best_val = d[i];
                best = i;
            }
        }
        if best == usize::MAX || best_val <= stop_tol {
            if best_val < neg_tol {
                return Err(BbmmError::NotPositiveDefinite(format!(
                    "pivot {best_val:.3e}"
                )));
            }
            break; // numerically exhausted; return the shorter factor
        }
        let piv = best_val.sqrt();
        let krow = row(best)?;
        if krow.len() != n {
            return Err(BbmmError::shape("row accessor returned wrong length"));
        }
        let mut col = vec![0.0; n];
        for j in 0..n {
            if pivoted[j] {
                continue; // residual is exactly zero there
            }
            let mut s = krow[j];
            for prev in &cols {
                s -= prev[j] * prev[best];
            }
            col[j] = s / piv;
        }
        col[best] = piv;
        for j in 0..n {
            if !pivoted[j] {
                d[j] -= col[j] * col[j];
                if d[j] < neg_tol {
                    return Err(BbmmError::NotPositiveDefinite(format!(
                        "Schur diagonal {:.3e} at {j}",
                        d[j]
                    )));
                }
            }
        }
        d[best] = 0.0;
        pivoted[best] = true;
        pivots.push(best);
        cols.push(col);
    }
    let residual_trace = d
        .iter()
        .enumerate()
        .filter(|(i, _)| !pivoted[*i])
        .map(|(_, &v)| v)
        .sum();
    Ok(PivotedCholesky {
        n,
        cols,
        pivots,
        residual_trace,
    })
}

/// How probe vectors were drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeDistribution {
    /// i.i.d. +-1 entries; E[z z^T] = I.
    Rademacher,
    /// z = L w1 + sigma w2 with standard Gaussian w; E[z z^T] = P.
    PreconditionerGaussian,
}

/// The solve / log-det / probe capabilities the solver needs. Whether any
/// real preconditioning happens is hidden behind this interface.
pub trait Preconditioner: Send + Sync {
    fn solve(&self, m: &DenseMatrix) -> Result<DenseMatrix>;

    fn solve_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(&DenseMatrix::from_column(v)?)?.column(0))
    }

    /// log |P|.
    fn logdet(&self) -> f64;

    /// n x t block of probe vectors with covariance matching the target the
    /// quadrature needs.
    fn sample_probes(
        &self,
        rng: &mut dyn RngCore,
        t: usize,
        n: usize,
    ) -> Result<(DenseMatrix, ProbeDistribution)>;
}

/// No preconditioning: solve is a copy, log-det is zero, probes Rademacher.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn solve(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(m.clone())
    }

    fn logdet(&self) -> f64 {
        0.0
    }

    fn sample_probes(
        &self,
        rng: &mut dyn RngCore,
        t: usize,
        n: usize,
    ) -> Result<(DenseMatrix, ProbeDistribution)> {
        if t == 0 {
            return Err(BbmmError::domain("need at least one probe"));
        }
        let mut z = DenseMatrix::zeros(n, t);
        for i in 0..n {
            for j in 0..t {
                let bit = (rng.next_u32() & 1) == 1;
                z.set(i, j, if bit { 1.0 } else { -1.0 });
            }
        }
        Ok((z, ProbeDistribution::Rademacher))
    }
}

/// `P = L L^T + sigma^2 I` with the k x k capacitance `I + L^T L / sigma^2`
/// factorized once at construction.
pub struct PivotedCholeskyPreconditioner {
    pc: PivotedCholesky,
    sigma2: f64,
    capacitance: Option<CholeskyFactor>,
    logdet: f64,
}

impl PivotedCholeskyPreconditioner {
    pub fn new(pc: PivotedCholesky, sigma2: f64) -> Result<Self> {
        if sigma2 <= 0.0 || !sigma2.is_finite() {
            return Err(BbmmError::domain(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        let k = pc.rank();
        let n = pc.size();
        let capacitance = if k == 0 {
            None
        } else {
            let mut cap = DenseMatrix::zeros(k, k);
            for p in 0..k {
                for q in p..k {
                    let v = dot(pc.column(p), pc.column(q)) / sigma2;
                    let v = v + if p == q { 1.0 } else { 0.0 };
                    cap.set(p, q, v);
                    cap.set(q, p, v);
                }
            }
            Some(CholeskyFactor::new(&cap).map_err(|e| {
                BbmmError::numeric(format!("capacitance factorization failed: {e}"))
            })?)
        };
        let logdet = match &capacitance {
            Some(c) => c.logdet() + n as f64 * sigma2.ln(),
            None => n as f64 * sigma2.ln(),
        };
        Ok(PivotedCholeskyPreconditioner {
            pc,
            sigma2,
            capacitance,
            logdet,
        })
    }

    pub fn decomposition(&self) -> &PivotedCholesky {
        &self.pc
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Dense `P`, for oracles.
    pub fn materialize(&self) -> Result<DenseMatrix> {
        self.pc.low_rank_dense().add_diagonal(self.sigma2)
    }
}

impl Preconditioner for PivotedCholeskyPreconditioner {
    fn solve(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.rows() != self.pc.size() {
            return Err(BbmmError::shape("preconditioner solve shape mismatch"));
        }
        // (L L^T + s I)^{-1} M = M/s - L (I + L^T L / s)^{-1} L^T M / s^2
        let mut out = m.scale(1.0 / self.sigma2);
        let Some(cap) = &self.capacitance else {
            return Ok(out);
        };
        for j in 0..m.cols() {
            let col = m.column(j);
            let ltm = self.pc.lt_apply(&col);
            let w = cap.solve_vec(&ltm)?;
            let lw = self.pc.l_apply(&w);
            let scale = 1.0 / (self.sigma2 * self.sigma2);
            for i in 0..out.rows() {
                out.set(i, j, out.get(i, j) - scale * lw[i]);
            }
        }
        Ok(out)
    }

    fn logdet(&self) -> f64 {
        self.logdet
    }

    fn sample_probes(
        &self,
        rng: &mut dyn RngCore,
        t: usize,
        n: usize,
    ) -> Result<(DenseMatrix, ProbeDistribution)> {
        if t == 0 {
            return Err(BbmmError::domain("need at least one probe"));
        }
        if n != self.pc.size() {
            return Err(BbmmError::shape("probe size mismatch"));
        }
        let k = self.pc.rank();
        let sigma = self.sigma2.sqrt();
        let normal = StandardNormal;
        let mut z = DenseMatrix::zeros(n, t);
        for j in 0..t {
            let w1: Vec<f64> = (0..k).map(|_| normal.sample(rng)).collect();
            let lw = self.pc.l_apply(&w1);
            for i in 0..n {
                let g: f64 = normal.sample(rng);
                z.set(i, j, lw[i] + sigma * g);
            }
        }
        Ok((z, ProbeDistribution::PreconditionerGaussian))
    }
}

/// Woodbury solve against `L L^T + sigma^2 I` without retaining state.
pub fn precond_solve(pc: &PivotedCholesky, sigma2: f64, m: &DenseMatrix) -> Result<DenseMatrix> {
    PivotedCholeskyPreconditioner::new(pc.clone(), sigma2)?.solve(m)
}

/// `log |L L^T + sigma^2 I|` by the matrix determinant lemma.
pub fn precond_logdet(pc: &PivotedCholesky, sigma2: f64) -> Result<f64> {
    Ok(PivotedCholeskyPreconditioner::new(pc.clone(), sigma2)?.logdet())
}
