//! Subcommand implementations: train, predict, benchmark, residual curves,
//! and the theory-diagnostics report.

use crate::bessel::bessel_i;
use crate::data::load_csv;
use crate::error::{CliError, Result};
use crate::report::*;
use bbmm::gp::{apply_standardization, destandardize_predictions};
use bbmm::{
    kernel_matrix, pcg, pivoted_cholesky, standardize, CholeskyFactor, Dataset, DenseMatrix,
    Engine, GpModel, Hyperparameters, IdentityPreconditioner, KernelKind, McbgConfig, Mode,
    PivotedCholeskyPreconditioner, Preconditioner, SolverConfig, TrainConfig,
};
use rand::SeedableRng;
use std::path::PathBuf;

/// Fully resolved run settings; every subcommand echoes these in its report.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: String,
    pub data_path: PathBuf,
    pub mode_name: String,
    pub kernel: KernelKind,
    /// Inducing inputs (sor) or grid nodes (ski).
    pub m: usize,
    pub rank: usize,
    pub cg_iters: usize,
    pub probes: usize,
    pub tol: f64,
    pub seed: u64,
    pub split: f64,
    pub feature: Option<usize>,
    pub train_iters: usize,
    pub oracle_cap: usize,
    pub no_timing: bool,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            subcommand: String::new(),
            data_path: PathBuf::new(),
            mode_name: "exact".into(),
            kernel: KernelKind::Rbf,
            m: 300,
            rank: 5,
            cg_iters: 20,
            probes: 10,
            tol: 1e-6,
            seed: 0,
            split: 0.8,
            feature: None,
            train_iters: 100,
            oracle_cap: 4000,
            no_timing: false,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(CliError::Config(format!(
                "split must lie in (0, 1), got {}",
                self.split
            )));
        }
        if self.cg_iters == 0 || self.probes == 0 || self.m == 0 || self.train_iters == 0 {
            return Err(CliError::Config("counts must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Config("tolerance must be positive".into()));
        }
        match self.mode_name.as_str() {
            "exact" | "sor" | "ski" => Ok(()),
            other => Err(CliError::Config(format!("unknown mode '{other}'"))),
        }
    }

    pub fn mode(&self) -> Mode {
        match self.mode_name.as_str() {
            "sor" => Mode::Sor { inducing: self.m },
            "ski" => Mode::Ski { grid: self.m },
            _ => Mode::Exact,
        }
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            subcommand: self.subcommand.clone(),
            data: self.data_path.display().to_string(),
            mode: self.mode_name.clone(),
            kernel: self.kernel.name().to_string(),
            m: self.m,
            rank: self.rank,
            cg_iters: self.cg_iters,
            probes: self.probes,
            tol: self.tol,
            seed: self.seed,
            split: self.split,
            train_iters: self.train_iters,
            oracle_cap: self.oracle_cap,
            feature: self.feature,
        }
    }

    fn solver(&self) -> Result<SolverConfig> {
        Ok(SolverConfig {
            mcbg: McbgConfig::new(self.cg_iters, self.tol).map_err(CliError::from)?,
            probes: self.probes,
            precond_rank: self.rank,
        })
    }

    fn train_config(&self, engine: Engine) -> Result<TrainConfig> {
        Ok(TrainConfig {
            solver: self.solver()?,
            iterations: self.train_iters,
            seed: self.seed,
            engine,
            ..TrainConfig::default()
        })
    }
}

/// Hyperparameter starting point on standardized data.
fn initial_hp() -> Hyperparameters {
    Hyperparameters::from_values(1.0, 1.0, 0.5).expect("valid constants")
}

/// Fixed hyperparameters for the solver diagnostics (residual curves and
/// condition numbers) on standardized data.
fn diagnostic_hp() -> Hyperparameters {
    Hyperparameters::from_values(0.3, 1.0, 1e-3).expect("valid constants")
}

struct Prepared {
    train: Dataset,
    test_x_std: DenseMatrix,
    test_y_std: Vec<f64>,
    record: bbmm::kernels::Standardization,
}

fn select_feature(data: &Dataset, feature: Option<usize>) -> Result<Dataset> {
    match feature {
        None => Ok(data.clone()),
        Some(j) => {
            if j >= data.dim() {
                return Err(CliError::Config(format!(
                    "feature index {j} out of range for {} columns",
                    data.dim()
                )));
            }
            let col = data.inputs().column(j);
            let x = DenseMatrix::new(data.len(), 1, col).map_err(CliError::from)?;
            Dataset::new(x, data.targets().to_vec()).map_err(CliError::from)
        }
    }
}

/// Seeded shuffle, then a split-fraction cut into train and held-out rows.
fn split_dataset(data: &Dataset, split: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    use rand::seq::SliceRandom;
    let n = data.len();
    let n_train = ((n as f64) * split).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(CliError::Config(format!(
            "split {split} leaves an empty partition for {n} rows"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x517f);
    idx.shuffle(&mut rng);
    let take = |ids: &[usize]| -> Result<Dataset> {
        let mut x = DenseMatrix::zeros(ids.len(), data.dim());
        let mut y = Vec::with_capacity(ids.len());
        for (r, &i) in ids.iter().enumerate() {
            x.row_slice_mut(r)
                .copy_from_slice(data.inputs().row_slice(i));
            y.push(data.targets()[i]);
        }
        Dataset::new(x, y).map_err(CliError::from)
    };
    Ok((take(&idx[..n_train])?, take(&idx[n_train..])?))
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let raw = load_csv(&cfg.data_path)?;
    let selected = select_feature(&raw, cfg.feature)?;
    if cfg.mode_name == "ski" && selected.dim() != 1 {
        return Err(CliError::Config(format!(
            "ski mode needs 1-dimensional inputs; the data has {} columns (use --feature)",
            selected.dim()
        )));
    }
    let (train_raw, test_raw) = split_dataset(&selected, cfg.split, cfg.seed)?;
    let train = standardize(&train_raw).map_err(CliError::from)?;
    let record = train.standardization().expect("just standardized").clone();
    let test_x_std = apply_standardization(&record, test_raw.inputs());
    let test_y_std: Vec<f64> = test_raw
        .targets()
        .iter()
        .map(|v| (v - record.target_mean) / record.target_scale)
        .collect();
    Ok(Prepared {
        train,
        test_x_std,
        test_y_std,
        record,
    })
}

fn mean_absolute_error(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter()
        .zip(truth)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / truth.len() as f64
}

fn train_arm(
    name: &str,
    engine: Engine,
    prep: &Prepared,
    cfg: &RunConfig,
) -> Result<(ArmReport, GpModel)> {
    let mut model = GpModel::new(
        cfg.kernel,
        cfg.mode(),
        initial_hp(),
        prep.train.clone(),
        cfg.seed,
    )
    .map_err(CliError::from)?;
    let report = model
        .train(&cfg.train_config(engine)?)
        .map_err(CliError::from)?;
    let pred = match engine {
        Engine::Bbmm => model
            .predict(&prep.test_x_std, &cfg.solver()?)
            .map_err(CliError::from)?,
        Engine::DenseOracle => model
            .dense_oracle(cfg.oracle_cap)
            .map_err(CliError::from)?
            .predict(&prep.test_x_std)
            .map_err(CliError::from)?,
    };
    let mae = mean_absolute_error(&pred.mean, &prep.test_y_std);
    let hp = model.hyperparameters();
    Ok((
        ArmReport {
            name: name.to_string(),
            nll_trace: report.nll_trace,
            mae,
            wall_time_s: if cfg.no_timing {
                0.0
            } else {
                report.wall_time_s
            },
            final_hyperparameters: Some(hp.to_vec()),
            predictive_mean: None,
            predictive_variance: None,
        },
        model,
    ))
}

pub fn run_train(cfg: &RunConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let (arm, _) = train_arm("bbmm", Engine::Bbmm, &prep, cfg)?;
    Ok(BenchmarkReport {
        config: cfg.echo(),
        arms: vec![arm],
        seed: cfg.seed,
        oracle_skipped: false,
    })
}

pub fn run_predict(cfg: &RunConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let (mut arm, mut model) = train_arm("bbmm", Engine::Bbmm, &prep, cfg)?;
    let pred = model
        .predict(&prep.test_x_std, &cfg.solver()?)
        .map_err(CliError::from)?;
    let original_units = destandardize_predictions(&prep.record, &pred);
    arm.predictive_mean = Some(original_units.mean);
    arm.predictive_variance = Some(original_units.variance);
    Ok(BenchmarkReport {
        config: cfg.echo(),
        arms: vec![arm],
        seed: cfg.seed,
        oracle_skipped: false,
    })
}

pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let mut arms = Vec::new();
    let (bbmm_arm, _) = train_arm("bbmm", Engine::Bbmm, &prep, cfg)?;
    arms.push(bbmm_arm);
    let oracle_skipped = prep.train.len() > cfg.oracle_cap;
    if !oracle_skipped {
        let (oracle_arm, _) = train_arm("dense-oracle", Engine::DenseOracle, &prep, cfg)?;
        arms.push(oracle_arm);
    }
    Ok(BenchmarkReport {
        config: cfg.echo(),
        arms,
        seed: cfg.seed,
        oracle_skipped,
    })
}

/// Relative residual per CG iteration for preconditioner ranks {0, 2, 5, 9},
/// plus the configured rank when it differs.
pub fn residual_curve(cfg: &RunConfig) -> Result<ResidualReport> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let data = &prep.train;
    let hp = diagnostic_hp();
    let op = bbmm::build_operator(cfg.mode(), cfg.kernel, &hp, data, cfg.seed)
        .map_err(CliError::from)?;
    let sigma2 = hp.noise_variance();
    let n = data.len();
    let mut ranks = vec![0usize, 2, 5, 9];
    if !ranks.contains(&cfg.rank) && cfg.rank <= n {
        ranks.push(cfg.rank);
    }
    let y = data.targets().to_vec();
    let mcbg = McbgConfig::new(cfg.cg_iters, cfg.tol).map_err(CliError::from)?;
    let mut points = Vec::new();
    for &rank in &ranks {
        let pre: Box<dyn Preconditioner> = if rank == 0 {
            Box::new(IdentityPreconditioner)
        } else {
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
                rank.min(n),
            )
            .map_err(CliError::from)?;
            Box::new(PivotedCholeskyPreconditioner::new(pc, sigma2).map_err(CliError::from)?)
        };
        let out = pcg(op.as_ref(), &y, pre.as_ref(), &mcbg).map_err(CliError::from)?;
        points.push(ResidualPoint {
            rank,
            iteration: 0,
            relative_residual: 1.0,
        });
        for (j, r) in out.residuals.iter().enumerate() {
            points.push(ResidualPoint {
                rank,
                iteration: j + 1,
                relative_residual: *r,
            });
        }
    }
    Ok(ResidualReport {
        config: cfg.echo(),
        seed: cfg.seed,
        points,
    })
}

/// Empirical checks of the supporting theory: preconditioned condition
/// numbers, the CG convergence bound, and the kernel eigenvalue bound.
pub fn verify_theory(cfg: &RunConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let data = &prep.train;
    let n = data.len();
    if n > cfg.oracle_cap {
        return Err(CliError::Config(format!(
            "verify needs n <= oracle cap ({}), got {n}",
            cfg.oracle_cap
        )));
    }
    let hp = diagnostic_hp();
    let sigma2 = hp.noise_variance();
    let k = kernel_matrix(cfg.kernel, &hp, data.inputs(), data.inputs()).map_err(CliError::from)?;
    let khat = k.add_diagonal(sigma2).map_err(CliError::from)?;

    // (a) condition number of the preconditioned system vs rank
    let mut condition_numbers = Vec::new();
    for rank in [0usize, 2, 5, 9] {
        let kappa = preconditioned_kappa(&k, &khat, rank.min(n), sigma2)?;
        condition_numbers.push(ConditionNumberPoint { rank, kappa });
    }
    let condition_numbers_non_increasing = condition_numbers
        .windows(2)
        .all(|w| w[1].kappa <= w[0].kappa * (1.0 + 1e-9));

    // (b) A-norm error of plain CG against the condition-number bound
    let cg_bound = cg_bound_check(&khat, data.targets(), 2 * cfg.cg_iters)?;

    // (c) RBF eigenvalue decay against the Bessel-series bound
    let mut eigenvalue_bounds = Vec::new();
    for gamma in [1.0, 10.0] {
        eigenvalue_bounds.push(eigenvalue_bound_check(gamma, 100)?);
    }

    Ok(VerifyReport {
        config: cfg.echo(),
        seed: cfg.seed,
        condition_numbers,
        condition_numbers_non_increasing,
        cg_bound,
        eigenvalue_bounds,
    })
}

fn preconditioned_kappa(
    k: &DenseMatrix,
    khat: &DenseMatrix,
    rank: usize,
    sigma2: f64,
) -> Result<f64> {
    let n = k.rows();
    let phat = if rank == 0 {
        DenseMatrix::identity(n).scale(sigma2)
    } else {
        let diag: Vec<f64> = (0..n).map(|i| k.get(i, i)).collect();
        let pc = pivoted_cholesky(|i| Ok(k.row_slice(i).to_vec()), &diag, rank)
            .map_err(CliError::from)?;
        pc.low_rank_dense()
            .add_diagonal(sigma2)
            .map_err(CliError::from)?
    };
    // kappa(P^{-1} Khat) through the symmetric similarity E^{-1} Khat E^{-T}
    let e = CholeskyFactor::new(&phat).map_err(CliError::from)?;
    let ef = e.factor();
    let mut half = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = forward_sub(ef, &khat.column(j));
        half.set_column(j, &col);
    }
    let mut atil = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = half.row_slice(i).to_vec();
        let solved = forward_sub(ef, &row);
        for j in 0..n {
            atil.set(i, j, solved[j]);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (atil.get(i, j) + atil.get(j, i));
            atil.set(i, j, v);
            atil.set(j, i, v);
        }
    }
    let evs = bbmm::eigen::sym_eigenvalues(&atil).map_err(CliError::from)?;
    let lo = evs.first().copied().unwrap_or(1.0);
    let hi = evs.last().copied().unwrap_or(1.0);
    if lo <= 0.0 {
        return Err(CliError::Numeric(format!(
            "preconditioned system has non-positive eigenvalue {lo:.3e}"
        )));
    }
    Ok(hi / lo)
}

fn forward_sub(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for p in 0..i {
            s -= l.get(i, p) * x[p];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

fn cg_bound_check(khat: &DenseMatrix, y: &[f64], max_p: usize) -> Result<CgBoundCheck> {
    let n = khat.rows();
    let evs = bbmm::eigen::sym_eigenvalues(khat).map_err(CliError::from)?;
    let kappa = evs[n - 1] / evs[0];
    let rate = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);
    let chol = CholeskyFactor::new(khat).map_err(CliError::from)?;
    let exact = chol.solve_vec(y).map_err(CliError::from)?;
    let a_norm = |v: &[f64]| -> f64 {
        let av = khat.matvec(v).expect("square");
        v.iter().zip(&av).map(|(x, w)| x * w).sum::<f64>().sqrt()
    };
    let e0 = a_norm(&exact);
    // one plain CG run, measuring the A-norm error after every iteration
    let mut u = vec![0.0; n];
    let mut r = y.to_vec();
    let mut d = r.clone();
    let mut rz: f64 = r.iter().map(|v| v * v).sum();
    let mut max_excess: f64 = f64::NEG_INFINITY;
    let mut satisfied = true;
    let mut iterations = 0usize;
    for p in 1..=max_p.min(n) {
        let v = khat.matvec(&d).expect("square");
        let dv: f64 = d.iter().zip(&v).map(|(a, b)| a * b).sum();
        if !(dv > 0.0) {
            break;
        }
        let alpha = rz / dv;
        for i in 0..n {
            u[i] += alpha * d[i];
            r[i] -= alpha * v[i];
        }
        let rz_new: f64 = r.iter().map(|v| v * v).sum();
        iterations = p;
        let diff: Vec<f64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
        let err = a_norm(&diff);
        let bound = 2.0 * rate.powi(p as i32) * e0;
        let excess = err - bound;
        max_excess = max_excess.max(excess);
        if excess > 1e-9 {
            satisfied = false;
        }
        if rz_new < 1e-290 {
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
    }
    Ok(CgBoundCheck {
        kappa,
        iterations,
        max_excess,
        satisfied,
    })
}

fn eigenvalue_bound_check(gamma: f64, n: usize) -> Result<EigenvalueBoundCheck> {
    // K_ij = exp(-gamma (x_i - x_j)^2) on n evenly spaced points in [0, 1];
    // descending eigenvalues lambda[0] >= lambda[1] >= ... must satisfy
    // lambda[2l+1] <= 2 n e^{-gamma/4} I_{l+1}(gamma/4) where the bound is
    // above the noise floor.
    let mut k = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = (i as f64 - j as f64) / (n as f64 - 1.0);
            k.set(i, j, (-gamma * d * d).exp());
        }
    }
    let mut evs = bbmm::eigen::sym_eigenvalues(&k).map_err(CliError::from)?;
    evs.reverse(); // descending
    let prefactor = 2.0 * n as f64 * (-gamma / 4.0).exp();
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut worst_ratio: f64 = 0.0;
    for l in 0.. {
        let idx = 2 * l + 1;
        if idx >= n {
            break;
        }
        let bound = prefactor * bessel_i(l as u32 + 1, gamma / 4.0)?;
        if bound < 1e-13 {
            break;
        }
        checked += 1;
        let ratio = evs[idx] / bound;
        worst_ratio = worst_ratio.max(ratio);
        if evs[idx] > bound {
            violations += 1;
        }
    }
    Ok(EigenvalueBoundCheck {
        gamma,
        indices_checked: checked,
        violations,
        satisfied: violations == 0,
        worst_ratio,
    })
}
