//! GP regression on top of the blackbox pipeline: marginal likelihood and its
//! gradient from one inference pass, Adam hyperparameter training, batched
//! predictions, a dense Cholesky oracle for comparison, and dataset
//! standardization.

use crate::dense::{dot, CholeskyFactor, DenseMatrix};
use crate::error::{BbmmError, Result};
use crate::inference::{infer_terms, InferenceTerms};
use crate::kernels::{
    build_derivative_operators, build_operator, kernel_eval, kernel_matrix, Dataset,
    Hyperparameters, KernelKind, Mode, Standardization,
};
use crate::mbcg::{mbcg, McbgConfig};
use crate::operator::{materialize, SymmetricOperator};
use crate::precond::{
    pivoted_cholesky, IdentityPreconditioner, PivotedCholeskyPreconditioner, Preconditioner,
};
use rand::{RngCore, SeedableRng};
use std::sync::Arc;
use std::time::Instant;

const LOG_2PI: f64 = 1.8378770664093453;

/// Which gradient engine a training run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Stochastic gradients from the batched CG pipeline.
    Bbmm,
    /// Exact gradients from the dense Cholesky oracle.
    DenseOracle,
}

/// Solver knobs shared by likelihood evaluation and prediction.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub mcbg: McbgConfig,
    /// Probe vectors per inference pass.
    pub probes: usize,
    /// Pivoted Cholesky rank; 0 disables preconditioning.
    pub precond_rank: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mcbg: McbgConfig::default(),
            probes: 10,
            precond_rank: 5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step_size: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub solver: SolverConfig,
    pub adam: AdamConfig,
    pub iterations: usize,
    pub seed: u64,
    pub engine: Engine,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            solver: SolverConfig::default(),
            adam: AdamConfig::default(),
            iterations: 100,
            seed: 0,
            engine: Engine::Bbmm,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub nll_trace: Vec<f64>,
    pub wall_time_s: f64,
    pub final_hp: Hyperparameters,
}

#[derive(Debug, Clone)]
pub struct PredictiveOutput {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

struct OperatorBundle {
    op: Arc<dyn SymmetricOperator>,
    dks: Vec<Arc<dyn SymmetricOperator>>,
    precond: Arc<dyn Preconditioner>,
    rank: usize,
}

/// Kernel choice, hyperparameters, approximation mode, and training data,
/// with the operator bundle cached and rebuilt whenever the hyperparameters
/// change.
pub struct GpModel {
    kind: KernelKind,
    mode: Mode,
    hp: Hyperparameters,
    data: Dataset,
    /// Structural seed: fixes the inducing subset across rebuilds.
    structure_seed: u64,
    bundle: Option<OperatorBundle>,
    cached_solve_y: Option<Vec<f64>>,
}

impl GpModel {
    pub fn new(
        kind: KernelKind,
        mode: Mode,
        hp: Hyperparameters,
        data: Dataset,
        structure_seed: u64,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(BbmmError::domain("empty dataset"));
        }
        Ok(GpModel {
            kind,
            mode,
            hp,
            data,
            structure_seed,
            bundle: None,
            cached_solve_y: None,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        self.hp
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Replaces the hyperparameters and invalidates every cache.
    pub fn set_hyperparameters(&mut self, hp: Hyperparameters) {
        self.hp = hp;
        self.bundle = None;
        self.cached_solve_y = None;
    }

    fn ensure_bundle(&mut self, rank: usize) -> Result<&OperatorBundle> {
        let stale = match &self.bundle {
            Some(b) => b.rank != rank,
            None => true,
        };
        if stale {
            let op = build_operator(
                self.mode,
                self.kind,
                &self.hp,
                &self.data,
                self.structure_seed,
            )?;
            let dks = build_derivative_operators(
                self.mode,
                self.kind,
                &self.hp,
                &self.data,
                self.structure_seed,
            )?;
            let precond = self.build_preconditioner(op.as_ref(), rank)?;
            self.bundle = Some(OperatorBundle {
                op,
                dks,
                precond,
                rank,
            });
            self.cached_solve_y = None;
        }
        Ok(self.bundle.as_ref().expect("bundle just built"))
    }

    /// Rank-k pivoted Cholesky of the noiseless kernel, read through the
    /// operator's rows with the noise removed from the diagonal.
    fn build_preconditioner(
        &self,
        op: &dyn SymmetricOperator,
        rank: usize,
    ) -> Result<Arc<dyn Preconditioner>> {
        if rank == 0 {
            return Ok(Arc::new(IdentityPreconditioner));
        }
        let n = op.size();
        let rank = rank.min(n);
        let sigma2 = self.hp.noise_variance();
        let mut diag = op.diag();
        for v in diag.iter_mut() {
            *v -= sigma2;
        }
        let pc = pivoted_cholesky(
            |i| {
                let mut row = op.row(i)?;
                row[i] -= sigma2;
                Ok(row)
            },
            &diag,
            rank,
        )?;
        Ok(Arc::new(PivotedCholeskyPreconditioner::new(pc, sigma2)?))
    }

    /// Negative log marginal likelihood, its gradient with respect to the log
    /// parameters, and the inference terms behind them.
    pub fn nll_and_grad(
        &mut self,
        cfg: &SolverConfig,
        rng: &mut dyn RngCore,
    ) -> Result<(f64, [f64; 3], InferenceTerms)> {
        let n = self.data.len() as f64;
        let y = self.data.targets().to_vec();
        let bundle = self.ensure_bundle(cfg.precond_rank)?;
        let terms = infer_terms(
            bundle.op.as_ref(),
            &bundle.dks,
            &y,
            bundle.precond.as_ref(),
            &cfg.mcbg,
            rng,
            cfg.probes,
        )?;
        let data_fit = dot(&y, &terms.solve_y);
        let nll = 0.5 * (data_fit + terms.logdet + n * LOG_2PI);
        let mut grad = [0.0; 3];
        for (p, dk) in bundle.dks.iter().enumerate() {
            let dk_u = dk.matvec(&terms.solve_y)?;
            let quad = dot(&terms.solve_y, &dk_u);
            grad[p] = 0.5 * (terms.trace_terms[p] - quad);
        }
        self.cached_solve_y = Some(terms.solve_y.clone());
        Ok((nll, grad, terms))
    }

    /// Adam on the log parameters with fresh probe vectors every step.
    pub fn train(&mut self, cfg: &TrainConfig) -> Result<TrainReport> {
        let start = Instant::now();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(cfg.seed);
        let mut theta = self.hp.to_vec();
        let mut m = [0.0; 3];
        let mut v = [0.0; 3];
        let mut nll_trace = Vec::with_capacity(cfg.iterations);
        for step in 1..=cfg.iterations {
            self.set_hyperparameters(Hyperparameters::from_slice(&theta));
            let (nll, grad) = match cfg.engine {
                Engine::Bbmm => {
                    let (nll, grad, _) = self.nll_and_grad(&cfg.solver, &mut rng)?;
                    (nll, grad)
                }
                Engine::DenseOracle => self.dense_oracle(usize::MAX)?.nll_and_grad()?,
            };
            if !nll.is_finite() {
                return Err(BbmmError::numeric(format!(
                    "non-finite training loss at step {step} (theta = {theta:?})"
                )));
            }
            nll_trace.push(nll);
            let b1t = 1.0 - cfg.adam.beta1.powi(step as i32);
            let b2t = 1.0 - cfg.adam.beta2.powi(step as i32);
            for p in 0..3 {
                m[p] = cfg.adam.beta1 * m[p] + (1.0 - cfg.adam.beta1) * grad[p];
                v[p] = cfg.adam.beta2 * v[p] + (1.0 - cfg.adam.beta2) * grad[p] * grad[p];
                let mh = m[p] / b1t;
                let vh = v[p] / b2t;
                theta[p] -= cfg.adam.step_size * mh / (vh.sqrt() + cfg.adam.epsilon);
            }
        }
        self.set_hyperparameters(Hyperparameters::from_slice(&theta));
        Ok(TrainReport {
            nll_trace,
            wall_time_s: start.elapsed().as_secs_f64(),
            final_hp: self.hp,
        })
    }

    /// Pointwise predictive mean and variance at the given inputs. The mean
    /// reuses the cached training solve when one exists; the variance solves
    /// all cross-covariance columns in one batched CG call with no probes.
    pub fn predict(
        &mut self,
        x_star: &DenseMatrix,
        cfg: &SolverConfig,
    ) -> Result<PredictiveOutput> {
        if x_star.cols() != self.data.dim() {
            return Err(BbmmError::shape("prediction input dimension mismatch"));
        }
        let y = self.data.targets().to_vec();
        let kind = self.kind;
        let hp = self.hp;
        let bundle_rank = cfg.precond_rank;
        self.ensure_bundle(bundle_rank)?;
        if self.cached_solve_y.is_none() {
            let bundle = self.bundle.as_ref().expect("bundle built above");
            let rhs = DenseMatrix::from_column(&y)?;
            let out = mbcg(
                bundle.op.as_ref(),
                &rhs,
                bundle.precond.as_ref(),
                &cfg.mcbg,
                0,
            )?;
            self.cached_solve_y = Some(out.solutions.column(0));
        }
        let bundle = self.bundle.as_ref().expect("bundle built above");
        let solve_y = self.cached_solve_y.as_ref().expect("solve cached above");

        // k_cross[:, i] = k(X, x*_i)
        let k_cross = kernel_matrix(kind, &hp, self.data.inputs(), x_star)?;
        let n_star = x_star.rows();
        let mut mean = Vec::with_capacity(n_star);
        for i in 0..n_star {
            mean.push(dot(&k_cross.column(i), solve_y));
        }
        let solves = mbcg(
            bundle.op.as_ref(),
            &k_cross,
            bundle.precond.as_ref(),
            &cfg.mcbg,
            0,
        )?;
        let mut variance = Vec::with_capacity(n_star);
        // Iterative solves leave O(tol)-level error in the quadratic form, so
        // the hard negativity check scales with the configured tolerance.
        let neg_floor = -1e-8 - 1e3 * cfg.mcbg.tol;
        for i in 0..n_star {
            let prior = kernel_eval(kind, &hp, x_star.row_slice(i), x_star.row_slice(i));
            let reduction = dot(&k_cross.column(i), &solves.solutions.column(i));
            let var = prior - reduction;
            if var < neg_floor {
                return Err(BbmmError::numeric(format!(
                    "predictive variance {var:.3e} below tolerance floor at point {i}"
                )));
            }
            variance.push(var.max(0.0));
        }
        Ok(PredictiveOutput { mean, variance })
    }

    /// Dense Cholesky comparator over the materialized covariance of this
    /// model's mode. Errors above the row cap.
    pub fn dense_oracle(&self, cap: usize) -> Result<DenseOracle> {
        let n = self.data.len();
        if n > cap {
            return Err(BbmmError::domain(format!(
                "dense oracle capped at {cap} rows, dataset has {n}"
            )));
        }
        let khat = match self.mode {
            Mode::Exact => {
                kernel_matrix(self.kind, &self.hp, self.data.inputs(), self.data.inputs())?
                    .add_diagonal(self.hp.noise_variance())?
            }
            _ => {
                let op = build_operator(
                    self.mode,
                    self.kind,
                    &self.hp,
                    &self.data,
                    self.structure_seed,
                )?;
                materialize(op.as_ref())?
            }
        };
        let dks_ops = build_derivative_operators(
            self.mode,
            self.kind,
            &self.hp,
            &self.data,
            self.structure_seed,
        )?;
        let mut dks = Vec::with_capacity(dks_ops.len());
        for op in &dks_ops {
            dks.push(materialize(op.as_ref())?);
        }
        let chol = CholeskyFactor::new(&khat)?;
        Ok(DenseOracle {
            kind: self.kind,
            hp: self.hp,
            x_train: self.data.inputs().clone(),
            y: self.data.targets().to_vec(),
            khat,
            dks,
            chol,
        })
    }
}

/// Exact dense-factorization engine: the comparator for every solver-level
/// quantity and the baseline arm of benchmarks.
pub struct DenseOracle {
    kind: KernelKind,
    hp: Hyperparameters,
    x_train: DenseMatrix,
    y: Vec<f64>,
    khat: DenseMatrix,
    dks: Vec<DenseMatrix>,
    chol: CholeskyFactor,
}

impl DenseOracle {
    pub fn khat(&self) -> &DenseMatrix {
        &self.khat
    }

    pub fn derivative(&self, p: usize) -> &DenseMatrix {
        &self.dks[p]
    }

    pub fn logdet(&self) -> f64 {
        self.chol.logdet()
    }

    pub fn solve_y(&self) -> Result<Vec<f64>> {
        self.chol.solve_vec(&self.y)
    }

    /// `tr(Khat^{-1} D)` computed column by column.
    pub fn exact_trace(&self, d: &DenseMatrix) -> Result<f64> {
        let inv_d = self.chol.solve_mat(d)?;
        Ok(inv_d.diagonal().iter().sum())
    }

    pub fn nll(&self) -> Result<f64> {
        let alpha = self.solve_y()?;
        let n = self.y.len() as f64;
        Ok(0.5 * (dot(&self.y, &alpha) + self.logdet() + n * LOG_2PI))
    }

    pub fn nll_and_grad(&self) -> Result<(f64, [f64; 3])> {
        let alpha = self.solve_y()?;
        let n = self.y.len() as f64;
        let nll = 0.5 * (dot(&self.y, &alpha) + self.logdet() + n * LOG_2PI);
        let mut grad = [0.0; 3];
        for (p, dk) in self.dks.iter().enumerate() {
            let tr = self.exact_trace(dk)?;
            let quad = dot(&alpha, &dk.matvec(&alpha)?);
            grad[p] = 0.5 * (tr - quad);
        }
        Ok((nll, grad))
    }

    pub fn predict(&self, x_star: &DenseMatrix) -> Result<PredictiveOutput> {
        let alpha = self.solve_y()?;
        let k_cross = kernel_matrix(self.kind, &self.hp, &self.x_train, x_star)?;
        let solves = self.chol.solve_mat(&k_cross)?;
        let mut mean = Vec::with_capacity(x_star.rows());
        let mut variance = Vec::with_capacity(x_star.rows());
        for i in 0..x_star.rows() {
            mean.push(dot(&k_cross.column(i), &alpha));
            let prior = kernel_eval(
                self.kind,
                &self.hp,
                x_star.row_slice(i),
                x_star.row_slice(i),
            );
            let var = prior - dot(&k_cross.column(i), &solves.column(i));
            variance.push(var.max(0.0));
        }
        Ok(PredictiveOutput { mean, variance })
    }
}

/// Z-scores every feature column and the target, recording the affine maps.
/// Zero-variance columns are left unscaled and flagged.
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    let n = data.len();
    if n < 2 {
        return Err(BbmmError::domain("standardization needs at least 2 rows"));
    }
    let d = data.dim();
    let x = data.inputs();
    let mut feature_mean = vec![0.0; d];
    let mut feature_scale = vec![0.0; d];
    let mut constant_features = Vec::new();
    for j in 0..d {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let scale = var.sqrt();
        feature_mean[j] = mean;
        if scale == 0.0 {
            constant_features.push(j);
            feature_scale[j] = 1.0;
        } else {
            feature_scale[j] = scale;
        }
    }
    let y = data.targets();
    let target_mean = y.iter().sum::<f64>() / n as f64;
    let yvar = y
        .iter()
        .map(|v| (v - target_mean) * (v - target_mean))
        .sum::<f64>()
        / n as f64;
    let target_scale = if yvar > 0.0 { yvar.sqrt() } else { 1.0 };

    let mut xs = DenseMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            xs.set(i, j, (x.get(i, j) - feature_mean[j]) / feature_scale[j]);
        }
    }
    let ys: Vec<f64> = y.iter().map(|v| (v - target_mean) / target_scale).collect();
    let record = Standardization {
        feature_mean,
        feature_scale,
        target_mean,
        target_scale,
        constant_features,
    };
    Dataset::with_standardization(xs, ys, record)
}

/// Applies a training-set record to new inputs.
pub fn apply_standardization(record: &Standardization, x: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            out.set(
                i,
                j,
                (x.get(i, j) - record.feature_mean[j]) / record.feature_scale[j],
            );
        }
    }
    out
}

/// Maps standardized predictions back to the original target scale.
pub fn destandardize_predictions(
    record: &Standardization,
    pred: &PredictiveOutput,
) -> PredictiveOutput {
    PredictiveOutput {
        mean: pred
            .mean
            .iter()
            .map(|v| v * record.target_scale + record.target_mean)
            .collect(),
        variance: pred
            .variance
            .iter()
            .map(|v| v * record.target_scale * record.target_scale)
            .collect(),
    }
}

pub fn destandardize_targets(record: &Standardization, y: &[f64]) -> Vec<f64> {
    y.iter()
        .map(|v| v * record.target_scale + record.target_mean)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data(n: usize) -> Dataset {
        let x = DenseMatrix::new(n, 1, (0..n).map(|i| i as f64 / n as f64).collect()).unwrap();
        let y = (0..n).map(|i| (i as f64 * 0.41).sin()).collect();
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn scalar_gaussian_nll_exact() {
        // n = 1, Khat = [v]: nll = (y^2/v + ln v + ln 2pi) / 2.
        let x = DenseMatrix::new(1, 1, vec![0.0]).unwrap();
        let y = vec![1.3];
        let data = Dataset::new(x, y.clone()).unwrap();
        let hp = Hyperparameters::from_values(1.0, 0.5, 0.25).unwrap();
        let v = 0.5 + 0.25;
        let mut model = GpModel::new(KernelKind::Rbf, Mode::Exact, hp, data, 0).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let cfg = SolverConfig {
            mcbg: McbgConfig::new(5, 1e-12).unwrap(),
            probes: 3,
            precond_rank: 0,
        };
        let (nll, _, _) = model.nll_and_grad(&cfg, &mut rng).unwrap();
        let want = 0.5 * (y[0] * y[0] / v + v.ln() + LOG_2PI);
        assert!((nll - want).abs() < 1e-10, "{nll} vs {want}");
        let oracle = model.dense_oracle(100).unwrap();
        assert!((oracle.nll().unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn oracle_gradient_passes_finite_differences() {
        let data = line_data(20);
        let hp = Hyperparameters::from_values(0.3, 1.0, 0.1).unwrap();
        let model = GpModel::new(KernelKind::Rbf, Mode::Exact, hp, data.clone(), 0).unwrap();
        let (_, grad) = model.dense_oracle(100).unwrap().nll_and_grad().unwrap();
        let step = 1e-4;
        let theta = hp.to_vec();
        for p in 0..3 {
            let mut hi = theta;
            let mut lo = theta;
            hi[p] += step;
            lo[p] -= step;
            let m_hi = GpModel::new(
                KernelKind::Rbf,
                Mode::Exact,
                Hyperparameters::from_slice(&hi),
                data.clone(),
                0,
            )
            .unwrap();
            let m_lo = GpModel::new(
                KernelKind::Rbf,
                Mode::Exact,
                Hyperparameters::from_slice(&lo),
                data.clone(),
                0,
            )
            .unwrap();
            let fd = (m_hi.dense_oracle(100).unwrap().nll().unwrap()
                - m_lo.dense_oracle(100).unwrap().nll().unwrap())
                / (2.0 * step);
            let rel = (grad[p] - fd).abs() / fd.abs().max(1e-12);
            assert!(rel < 1e-6, "param {p}: {} vs {fd}", grad[p]);
        }
    }

    #[test]
    fn oracle_logdet_matches_eigenvalue_sum() {
        let data = line_data(20);
        let hp = Hyperparameters::from_values(0.3, 1.0, 0.1).unwrap();
        let model = GpModel::new(KernelKind::Rbf, Mode::Exact, hp, data, 0).unwrap();
        let oracle = model.dense_oracle(100).unwrap();
        let evs = crate::eigen::sym_eigenvalues(oracle.khat()).unwrap();
        let eig_logdet: f64 = evs.iter().map(|v| v.ln()).sum();
        assert!((oracle.logdet() - eig_logdet).abs() < 1e-9);
    }

    #[test]
    fn zero_training_iterations_leaves_model_unchanged() {
        let data = line_data(10);
        let hp = Hyperparameters::from_values(0.4, 1.0, 0.2).unwrap();
        let mut model = GpModel::new(KernelKind::Rbf, Mode::Exact, hp, data, 0).unwrap();
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let report = model.train(&cfg).unwrap();
        assert!(report.nll_trace.is_empty());
        assert_eq!(model.hyperparameters(), hp);
    }

    #[test]
    fn predictive_mean_linear_in_targets_and_variance_independent() {
        let n = 15;
        let x = DenseMatrix::new(n, 1, (0..n).map(|i| i as f64 / n as f64).collect()).unwrap();
        let y1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let y2: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let sum: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
        let hp = Hyperparameters::from_values(0.3, 1.0, 0.1).unwrap();
        let cfg = SolverConfig {
            mcbg: McbgConfig::new(n, 1e-12).unwrap(),
            probes: 2,
            precond_rank: 0,
        };
        let x_star = DenseMatrix::new(3, 1, vec![0.17, 0.5, 0.83]).unwrap();
        let mut outs = Vec::new();
        for y in [&y1, &y2, &sum] {
            let data = Dataset::new(x.clone(), y.clone()).unwrap();
            let mut model = GpModel::new(KernelKind::Rbf, Mode::Exact, hp, data, 0).unwrap();
            outs.push(model.predict(&x_star, &cfg).unwrap());
        }
        for i in 0..3 {
            let lin = outs[0].mean[i] + outs[1].mean[i];
            assert!((outs[2].mean[i] - lin).abs() < 1e-10);
            assert!((outs[2].variance[i] - outs[0].variance[i]).abs() < 1e-12);
            assert!((outs[2].variance[i] - outs[1].variance[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_roundtrip_and_flags() {
        let x =
            DenseMatrix::new(5, 2, vec![1.0, 7.0, 2.0, 7.0, 3.0, 7.0, 4.0, 7.0, 5.0, 7.0]).unwrap();
        let y = vec![10.0, 20.0, 30.0, 40.0, 50.0];
        let data = Dataset::new(x, y.clone()).unwrap();
        let std = standardize(&data).unwrap();
        let record = std.standardization().unwrap().clone();
        // second column is constant: flagged, not divided by zero
        assert_eq!(record.constant_features, vec![1]);
        assert_eq!(record.feature_scale[1], 1.0);
        let mean0: f64 = std.inputs().column(0).iter().sum::<f64>() / 5.0;
        assert!(mean0.abs() < 1e-10);
        let back = destandardize_targets(&record, std.targets());
        for (a, b) in back.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
        // standardizing already-standardized data changes nothing
        let again = standardize(&std).unwrap();
        for (a, b) in again.targets().iter().zip(std.targets()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in again.inputs().values().iter().zip(std.inputs().values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
