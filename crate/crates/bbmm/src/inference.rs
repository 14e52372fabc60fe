//! Assembles the three training quantities — the solve against the targets,
//! the log-determinant, and the derivative trace terms — from one batched CG
//! call, using stochastic Lanczos quadrature over the recovered tridiagonal
//! matrices and stochastic trace estimation over the probe solves.
//!
//! Quadrature needs only the eigenvalues and the first eigenvector row of
//! each p x p tridiagonal matrix; the n x p Krylov basis is never stored.

use crate::dense::{dot, DenseMatrix};
use crate::eigen::tridiag_ql;
use crate::error::{BbmmError, Result};
use crate::mbcg::{mbcg, McbgConfig, SymTridiagonal};
use crate::operator::SymmetricOperator;
use crate::precond::Preconditioner;
use rand::RngCore;
use std::sync::Arc;

/// Everything one inference pass produces.
#[derive(Debug, Clone)]
pub struct InferenceTerms {
    /// `Khat^{-1} y`.
    pub solve_y: Vec<f64>,
    /// Estimate of `log |Khat|`.
    pub logdet: f64,
    /// Estimates of `tr(Khat^{-1} dKhat/dtheta)`, one per parameter.
    pub trace_terms: Vec<f64>,
    /// `Khat^{-1} Z`, kept for gradient assembly.
    pub probe_solves: DenseMatrix,
    pub iterations: usize,
    pub residual_norms: Vec<f64>,
}

/// Eigendecomposition of a symmetric tridiagonal matrix: ascending
/// eigenvalues plus the first row of the eigenvector matrix.
pub fn tridiag_eig(t: &SymTridiagonal) -> Result<(Vec<f64>, Vec<f64>)> {
    tridiag_ql(t.diag(), t.offdiag())
}

/// Quadrature estimate of the log-determinant from per-probe tridiagonal
/// matrices.
///
/// `probe_sq_norms[i]` must be the squared norm of probe i in the inner
/// product the solver ran under: `z' z` without preconditioning (n for
/// Rademacher probes), `z' P^{-1} z` with it. That factor undoes the
/// unit-norm Lanczos start; `precond_logdet` then shifts the estimate from
/// `log |P^{-1} Khat|` back to `log |Khat|`.
pub fn slq_logdet(
    tridiags: &[SymTridiagonal],
    probe_sq_norms: &[f64],
    precond_logdet: f64,
) -> Result<f64> {
    if tridiags.is_empty() {
        return Err(BbmmError::domain("no tridiagonal matrices given"));
    }
    if tridiags.len() != probe_sq_norms.len() {
        return Err(BbmmError::shape(
            "one squared norm needed per tridiagonal matrix",
        ));
    }
    let mut acc = 0.0;
    for (t, &sq) in tridiags.iter().zip(probe_sq_norms) {
        let (evals, first_row) = tridiag_eig(t)?;
        let mut quad = 0.0;
        for (lam, w) in evals.iter().zip(&first_row) {
            if *lam <= 0.0 {
                return Err(BbmmError::IndefiniteOperator(format!(
                    "non-positive Ritz value {lam:.3e} in quadrature"
                )));
            }
            quad += w * w * lam.ln();
        }
        acc += sq * quad;
    }
    Ok(acc / tridiags.len() as f64 + precond_logdet)
}

/// Stochastic trace estimates `(1/t) sum_i (Khat^{-1} z_i)' (dK pair_i)`, one
/// matrix-matrix multiply per derivative operator.
///
/// Unbiasedness requires `E[pair z'] = I`: without preconditioning `pair`
/// is the probe block itself, with preconditioning it is `P^{-1} Z`.
pub fn hutchinson_traces(
    probe_solves: &DenseMatrix,
    dk_ops: &[Arc<dyn SymmetricOperator>],
    pair: &DenseMatrix,
) -> Result<Vec<f64>> {
    if probe_solves.rows() != pair.rows() || probe_solves.cols() != pair.cols() {
        return Err(BbmmError::shape("probe blocks differ in shape"));
    }
    let t = pair.cols();
    let mut out = Vec::with_capacity(dk_ops.len());
    for op in dk_ops {
        let dz = op.matmul(pair)?;
        let mut acc = 0.0;
        for i in 0..t {
            acc += dot(&probe_solves.column(i), &dz.column(i));
        }
        out.push(acc / t as f64);
    }
    Ok(out)
}

/// Runs the whole pipeline: samples probes, performs exactly one batched CG
/// call on `[y, z_1, ..., z_t]`, then assembles the log-determinant and trace
/// estimates from its outputs.
pub fn infer_terms(
    op: &dyn SymmetricOperator,
    dk_ops: &[Arc<dyn SymmetricOperator>],
    y: &[f64],
    precond: &dyn Preconditioner,
    cfg: &McbgConfig,
    rng: &mut dyn RngCore,
    t: usize,
) -> Result<InferenceTerms> {
    let n = op.size();
    if y.len() != n {
        return Err(BbmmError::shape("target length mismatch"));
    }
    if t == 0 {
        return Err(BbmmError::domain("need at least one probe"));
    }
    let (z, _tag) = precond.sample_probes(rng, t, n)?;

    let mut rhs = DenseMatrix::zeros(n, t + 1);
    rhs.set_column(0, y);
    for j in 0..t {
        rhs.set_column(j + 1, &z.column(j));
    }
    let out = mbcg(op, &rhs, precond, cfg, t)?;

    // Pairing block and probe norms in the preconditioned inner product; for
    // the identity preconditioner this is Z itself and |z|^2.
    let pair = precond.solve(&z)?;
    let sq_norms: Vec<f64> = (0..t).map(|j| dot(&z.column(j), &pair.column(j))).collect();

    let logdet = slq_logdet(&out.tridiags, &sq_norms, precond.logdet())?;

    let solve_y = out.solutions.column(0);
    let mut probe_solves = DenseMatrix::zeros(n, t);
    for j in 0..t {
        probe_solves.set_column(j, &out.solutions.column(j + 1));
    }
    let trace_terms = hutchinson_traces(&probe_solves, dk_ops, &pair)?;

    Ok(InferenceTerms {
        solve_y,
        logdet,
        trace_terms,
        probe_solves,
        iterations: out.iterations_run,
        residual_norms: out.residual_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbcg::tridiag_from_coefficients;
    use crate::operator::ScaledIdentityOperator;
    use crate::precond::IdentityPreconditioner;
    use rand::SeedableRng;

    #[test]
    fn scalar_operator_logdet_exact() {
        // T = [c] for every probe, so the estimate is n log c exactly.
        let n = 12;
        let c = 2.5;
        let tridiags: Vec<SymTridiagonal> = (0..4)
            .map(|_| tridiag_from_coefficients(&[1.0 / c], &[]).unwrap())
            .collect();
        let sq = vec![n as f64; 4];
        let est = slq_logdet(&tridiags, &sq, 0.0).unwrap();
        assert!((est - n as f64 * c.ln()).abs() < 1e-12);
    }

    #[test]
    fn identity_operator_logdet_zero() {
        let tridiags = vec![tridiag_from_coefficients(&[1.0], &[]).unwrap()];
        let est = slq_logdet(&tridiags, &[8.0], 0.0).unwrap();
        assert_eq!(est, 0.0);
    }

    #[test]
    fn nonpositive_ritz_value_is_error() {
        let t = SymTridiagonal::new(vec![-1.0], vec![]).unwrap();
        assert!(matches!(
            slq_logdet(&[t], &[4.0], 0.0),
            Err(BbmmError::IndefiniteOperator(_))
        ));
    }

    #[test]
    fn trace_of_inverse_times_self_is_n() {
        // dK = Khat: each term is z_i' z_i = n for Rademacher probes.
        let n = 10;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let (z, _) = IdentityPreconditioner
            .sample_probes(&mut rng, 6, n)
            .unwrap();
        // Khat^{-1} z = z / 3.
        let solves = z.scale(1.0 / 3.0);
        let dk: Vec<Arc<dyn SymmetricOperator>> =
            vec![Arc::new(ScaledIdentityOperator::new(n, 3.0))];
        let tr = hutchinson_traces(&solves, &dk, &z).unwrap();
        assert!((tr[0] - n as f64).abs() < 1e-12);
    }

    #[test]
    fn scalar_case_noise_derivative() {
        // Khat = cI, dK = 2 s2 I: estimate must be 2 s2 n / c exactly.
        let n = 7;
        let c = 4.0;
        let s2 = 0.3;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let (z, _) = IdentityPreconditioner
            .sample_probes(&mut rng, 3, n)
            .unwrap();
        let solves = z.scale(1.0 / c);
        let dk: Vec<Arc<dyn SymmetricOperator>> =
            vec![Arc::new(ScaledIdentityOperator::new(n, 2.0 * s2))];
        let tr = hutchinson_traces(&solves, &dk, &z).unwrap();
        assert!((tr[0] - 2.0 * s2 * n as f64 / c).abs() < 1e-12);
    }

    #[test]
    fn infer_terms_scalar_operator_all_exact() {
        let n = 9;
        let c = 2.0;
        let op = ScaledIdentityOperator::new(n, c);
        let dks: Vec<Arc<dyn SymmetricOperator>> =
            vec![Arc::new(ScaledIdentityOperator::new(n, 1.0))];
        let y: Vec<f64> = (0..n).map(|i| i as f64 - 4.0).collect();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let terms = infer_terms(
            &op,
            &dks,
            &y,
            &IdentityPreconditioner,
            &McbgConfig::default(),
            &mut rng,
            5,
        )
        .unwrap();
        for (u, yi) in terms.solve_y.iter().zip(&y) {
            assert!((u - yi / c).abs() < 1e-13);
        }
        assert!((terms.logdet - n as f64 * c.ln()).abs() < 1e-10);
        // tr(Khat^{-1} I) = n / c, exact for any Rademacher draw.
        assert!((terms.trace_terms[0] - n as f64 / c).abs() < 1e-12);
        assert_eq!(terms.iterations, 1);
    }

    #[test]
    fn single_probe_is_legal() {
        let op = ScaledIdentityOperator::new(4, 1.5);
        let dks: Vec<Arc<dyn SymmetricOperator>> =
            vec![Arc::new(ScaledIdentityOperator::new(4, 1.0))];
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let terms = infer_terms(
            &op,
            &dks,
            &[1.0, 2.0, 3.0, 4.0],
            &IdentityPreconditioner,
            &McbgConfig::default(),
            &mut rng,
            1,
        )
        .unwrap();
        assert!(terms.logdet.is_finite());
        assert!(terms.trace_terms[0].is_finite());
    }
}
