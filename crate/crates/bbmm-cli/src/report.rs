//! JSON report structures. Field order is fixed by declaration, so reports
//! are byte-stable for a given configuration and seed.

use serde::Serialize;

/// Echo of the fully resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub subcommand: String,
    pub data: String,
    pub mode: String,
    pub kernel: String,
    pub m: usize,
    pub rank: usize,
    pub cg_iters: usize,
    pub probes: usize,
    pub tol: f64,
    pub seed: u64,
    pub split: f64,
    pub train_iters: usize,
    pub oracle_cap: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmReport {
    pub name: String,
    pub nll_trace: Vec<f64>,
    pub mae: f64,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_hyperparameters: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictive_mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictive_variance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub config: ConfigEcho,
    pub arms: Vec<ArmReport>,
    pub seed: u64,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub oracle_skipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualPoint {
    pub rank: usize,
    pub iteration: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub config: ConfigEcho,
    pub seed: u64,
    pub points: Vec<ResidualPoint>,
}

impl ResidualReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,iteration,relative_residual\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{:.17e}\n",
                p.rank, p.iteration, p.relative_residual
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionNumberPoint {
    pub rank: usize,
    pub kappa: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CgBoundCheck {
    pub kappa: f64,
    pub iterations: usize,
    pub max_excess: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenvalueBoundCheck {
    pub gamma: f64,
    pub indices_checked: usize,
    pub violations: usize,
    pub satisfied: bool,
    /// max of eigenvalue / bound over checked indices
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub config: ConfigEcho,
    pub seed: u64,
    pub condition_numbers: Vec<ConditionNumberPoint>,
    pub condition_numbers_non_increasing: bool,
    pub cg_bound: CgBoundCheck,
    pub eigenvalue_bounds: Vec<EigenvalueBoundCheck>,
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report structs serialize");
    bytes.push(b'\n');
    bytes
}
