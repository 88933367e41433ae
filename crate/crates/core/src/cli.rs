//! Library side of the `mlmc` binary: configuration, experiment sweeps, the
//! `f(M)` curve, the enumeration oracle suite and single-run reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::analysis::{
    complexity_curve, enumerate_matrix_moments_with, enumerate_moments_with,
    expected_frobenius_error_optimal, expected_frobenius_error_uniform, expected_variance_optimal,
    expected_variance_uniform, inner_constants, matrix_constants, MomentTable,
};
use crate::estimators::{EstimateReport, Estimand, Estimator};
use crate::exec::Execution;
use crate::models::{
    reference_inner, reference_matmul, ConstantOnesInner, ConstantOnesMatrix, DeterministicInner,
    DeterministicMatrix, MatrixPairModel, PaperInnerModel, PaperMatrixModel, TargetFunction,
    VectorPairModel, DEFAULT_REFERENCE_DRAWS, DEFAULT_ZETA,
};
use crate::planner::{plan_mc_replications, LevelPlan, DEFAULT_C1, DEFAULT_C2, DEFAULT_EPSILON};
use crate::rng::derive_seed;
use crate::sampling::IndexDistribution;
use crate::sketch::{sketch_inner, sketch_matmul};
use crate::tensor::{
    exact_inner, exact_matmul, relative_error, relative_error_matrix, DenseMatrix, DenseVector,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Compute(#[from] crate::Error),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Compute(_) => 1,
            CliError::Oracle(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Inner,
    Matmul,
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "inner" => Ok(Mode::Inner),
            "matmul" => Ok(Mode::Matmul),
            other => Err(usage(format!("unknown mode `{other}` (expected inner or matmul)"))),
        }
    }
}

/// Run configuration shared by `sweep` and `estimate`. Unset model, target
/// and M list fall back to per-mode defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub mode: Mode,
    pub model: Option<String>,
    pub target: Option<String>,
    pub m_list: Option<Vec<u64>>,
    pub epsilon: f64,
    pub c1: f64,
    pub c2: f64,
    pub seed: u64,
    pub reps: u64,
    pub n_ref: u64,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub zeta: f64,
    pub timing: bool,
    /// Inner-dimension `n`; `None` uses 1000.
    pub n: Option<usize>,
    /// Rows of `A` and columns of `B` in matmul mode.
    pub m: usize,
    pub d: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Inner,
            model: None,
            target: None,
            m_list: None,
            epsilon: DEFAULT_EPSILON,
            c1: DEFAULT_C1,
            c2: DEFAULT_C2,
            seed: 0,
            reps: 1,
            n_ref: DEFAULT_REFERENCE_DRAWS,
            out: None,
            threads: None,
            zeta: DEFAULT_ZETA,
            timing: true,
            n: None,
            m: 10,
            d: 10,
        }
    }
}

/// Keys accepted in a config file (and, with `--` prefixed, as flags).
pub const CONFIG_KEYS: &[&str] = &[
    "mode", "model", "target", "m-list", "epsilon", "c1", "c2", "seed", "reps", "n-ref", "out",
    "threads", "zeta", "timing", "n", "m", "d",
];

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// skipped; `_` in keys is read as `-`.
pub fn parse_config_file(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", lineno + 1)))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| usage(format!("invalid value `{value}` for `{key}`")))
}

pub fn parse_m_list(value: &str) -> CliResult<Vec<u64>> {
    value
        .split(',')
        .map(|p| parse_value::<u64>("m-list", p.trim()))
        .collect()
}

impl SweepConfig {
    pub fn apply(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "mode" => self.mode = value.parse()?,
            "model" => self.model = Some(value.to_string()),
            "target" => self.target = Some(value.to_string()),
            "m-list" => self.m_list = Some(parse_m_list(value)?),
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "c1" => self.c1 = parse_value(key, value)?,
            "c2" => self.c2 = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "reps" => self.reps = parse_value(key, value)?,
            "n-ref" => self.n_ref = parse_value(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "threads" => self.threads = Some(parse_value(key, value)?),
            "zeta" => self.zeta = parse_value(key, value)?,
            "timing" => self.timing = parse_value(key, value)?,
            "n" => self.n = Some(parse_value(key, value)?),
            "m" => self.m = parse_value(key, value)?,
            "d" => self.d = parse_value(key, value)?,
            other => return Err(usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_all(&mut self, entries: &BTreeMap<String, String>) -> CliResult<()> {
        entries.iter().try_for_each(|(k, v)| self.apply(k, v))
    }

    pub fn validate(&self) -> CliResult<()> {
        if let Some(list) = &self.m_list {
            if list.is_empty() || list.iter().any(|&m| m < 2) {
                return Err(usage("m-list entries must be at least 2"));
            }
        }
        if self.reps == 0 {
            return Err(usage("reps must be at least 1"));
        }
        if self.n_ref == 0 {
            return Err(usage("n-ref must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(usage(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(usage("c1 and c2 must be positive"));
        }
        if self.dimension() == 0 || self.m == 0 || self.d == 0 {
            return Err(usage("dimensions must be at least 1"));
        }
        self.problem()?;
        self.target_function()?;
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.n.unwrap_or(1000)
    }

    pub fn execution(&self) -> Execution {
        Execution::from_threads(self.threads)
    }

    pub fn model_key(&self) -> &str {
        self.model.as_deref().unwrap_or(match self.mode {
            Mode::Inner => "paper-inner",
            Mode::Matmul => "paper-matrix",
        })
    }

    pub fn target_key(&self) -> &str {
        self.target.as_deref().unwrap_or(match self.mode {
            Mode::Inner => "f1",
            Mode::Matmul => "f2",
        })
    }

    /// Sweep default: the experiment bases.
    pub fn sweep_bases(&self) -> Vec<u64> {
        self.m_list.clone().unwrap_or_else(|| match self.mode {
            Mode::Inner => (2..=12).rev().collect(),
            Mode::Matmul => vec![3, 4, 6, 9, 10, 12, 32],
        })
    }

    pub fn estimate_bases(&self) -> Vec<u64> {
        self.m_list.clone().unwrap_or_else(|| match self.mode {
            Mode::Inner => vec![7],
            Mode::Matmul => vec![10],
        })
    }

    pub fn target_function(&self) -> CliResult<TargetFunction> {
        match self.target_key() {
            "f1" => Ok(TargetFunction::f1()),
            "f2" => Ok(TargetFunction::f2(self.zeta)?),
            "identity" => Ok(TargetFunction::identity()),
            other => Err(usage(format!("unknown target `{other}` (expected f1, f2, identity)"))),
        }
    }

    pub fn problem(&self) -> CliResult<Problem> {
        let n = self.dimension();
        let (m, d) = (self.m, self.d);
        let problem = match (self.mode, self.model_key()) {
            (Mode::Inner, "paper-inner") => Problem::Inner(Box::new(PaperInnerModel::new(n)?)),
            (Mode::Inner, "constant-ones") => Problem::Inner(Box::new(ConstantOnesInner::new(n)?)),
            (Mode::Inner, "deterministic") => Problem::Inner(Box::new(DeterministicInner::ramp(n)?)),
            (Mode::Matmul, "paper-matrix") => {
                Problem::Matmul(Box::new(PaperMatrixModel::new(m, n, d)?))
            }
            (Mode::Matmul, "constant-ones") => {
                Problem::Matmul(Box::new(ConstantOnesMatrix::new(m, n, d)?))
            }
            (Mode::Matmul, "deterministic") => {
                Problem::Matmul(Box::new(DeterministicMatrix::ramp(m, n, d)?))
            }
            (mode, key) => {
                return Err(usage(format!("unknown model `{key}` for mode {mode:?}")));
            }
        };
        Ok(problem)
    }

    fn is_deterministic(&self) -> bool {
        matches!(self.model_key(), "constant-ones" | "deterministic")
    }

    fn reference_draws(&self) -> u64 {
        if self.is_deterministic() {
            1
        } else {
            self.n_ref
        }
    }
}

pub enum Problem {
    Inner(Box<dyn VectorPairModel>),
    Matmul(Box<dyn MatrixPairModel>),
}

impl Problem {
    fn dimension(&self) -> usize {
        match self {
            Problem::Inner(m) => m.dim(),
            Problem::Matmul(m) => m.shape().1,
        }
    }

    fn output_entries(&self) -> u64 {
        match self {
            Problem::Inner(_) => 1,
            Problem::Matmul(m) => {
                let (m, _, d) = m.shape();
                (m * d) as u64
            }
        }
    }
}

/// One row of a sweep report.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub base: u64,
    pub levels: u32,
    pub finest_size: u64,
    pub re_mlmc: f64,
    pub time_mlmc_s: f64,
    pub cost_mlmc: u64,
    pub re_mc: f64,
    pub time_mc_s: f64,
    pub cost_mc: u64,
    pub seed: u64,
}

pub const SWEEP_HEADER: &str =
    "M,L,M_pow_L,RE_mlmc,time_mlmc_s,cost_units_mlmc,RE_mc,time_mc_s,cost_units_mc,seed";

const REFERENCE_STREAM: u64 = u64::MAX;

/// Runs every (M, repetition) pair in config order.
pub fn run_sweep(config: &SweepConfig) -> CliResult<Vec<SweepRow>> {
    config.validate()?;
    let f = config.target_function()?;
    let problem = config.problem()?;
    let exec = config.execution();
    let n = problem.dimension();
    let ref_seed = derive_seed(config.seed, &[REFERENCE_STREAM]);
    let n_mc = plan_mc_replications(config.epsilon, config.c2)?;

    exec.scope(|| {
        let ambient = match exec {
            Execution::ParallelWith { .. } => Execution::Parallel,
            e => e,
        };
        let estimator = Estimator::new(ambient);
        let mut rows = Vec::new();
        match &problem {
            Problem::Inner(model) => {
                let reference = reference_inner(model.as_ref(), &f, config.reference_draws(), ref_seed, &ambient)?;
                for base in config.sweep_bases() {
                    for rep in 0..config.reps {
                        let seed = derive_seed(config.seed, &[base, rep]);
                        let plan = LevelPlan::capped(config.epsilon, base, config.c1, config.c2, n)?;
                        let ml = estimator.mlmc_inner(model.as_ref(), &f, &plan, seed)?;
                        let mc = estimator.mc_inner(model.as_ref(), &f, plan.levels(), n_mc, base, seed)?;
                        rows.push(SweepRow {
                            base,
                            levels: plan.levels(),
                            finest_size: plan.finest_sample_size()?,
                            re_mlmc: relative_error(ml.value, reference.value)?,
                            time_mlmc_s: ml.wall_time.as_secs_f64(),
                            cost_mlmc: ml.total_cost_units,
                            re_mc: relative_error(mc.value, reference.value)?,
                            time_mc_s: mc.wall_time.as_secs_f64(),
                            cost_mc: mc.total_cost_units,
                            seed,
                        });
                    }
                }
            }
            Problem::Matmul(model) => {
                let reference = reference_matmul(model.as_ref(), &f, config.reference_draws(), ref_seed, &ambient)?;
                for base in config.sweep_bases() {
                    for rep in 0..config.reps {
                        let seed = derive_seed(config.seed, &[base, rep]);
                        let plan = LevelPlan::capped(config.epsilon, base, config.c1, config.c2, n)?;
                        let ml = estimator.mlmc_matmul(model.as_ref(), &f, &plan, seed)?;
                        let mc = estimator.mc_matmul(model.as_ref(), &f, plan.levels(), n_mc, base, seed)?;
                        rows.push(SweepRow {
                            base,
                            levels: plan.levels(),
                            finest_size: plan.finest_sample_size()?,
                            re_mlmc: relative_error_matrix(&ml.value, &reference.value)?,
                            time_mlmc_s: ml.wall_time.as_secs_f64(),
                            cost_mlmc: ml.total_cost_units,
                            re_mc: relative_error_matrix(&mc.value, &reference.value)?,
                            time_mc_s: mc.wall_time.as_secs_f64(),
                            cost_mc: mc.total_cost_units,
                            seed,
                        });
                    }
                }
            }
        }
        Ok(rows)
    })
}

/// CSV text for sweep rows. Without timing the time cells are left empty.
pub fn sweep_csv(rows: &[SweepRow], timing: bool) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    let time = |t: f64| if timing { format!("{t:.3}") } else { String::new() };
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{},{},{:e},{},{},{}",
            r.base,
            r.levels,
            r.finest_size,
            r.re_mlmc,
            time(r.time_mlmc_s),
            r.cost_mlmc,
            r.re_mc,
            time(r.time_mc_s),
            r.cost_mc,
            r.seed
        );
    }
    out
}

/// `M,f_M` rows for `m_min..=m_max`.
pub fn fm_curve_csv(m_min: u64, m_max: u64) -> CliResult<String> {
    if m_min < 2 || m_min >= m_max {
        return Err(usage(format!("need 2 <= m-min < m-max, got {m_min}..{m_max}")));
    }
    let mut out = String::from("M,f_M\n");
    for m in m_min..=m_max {
        let _ = writeln!(out, "{m},{}", complexity_curve(m)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub max_n: usize,
    pub max_s: usize,
    /// Test hook: scales every sketch by `1 + 1e-3`, which must fail.
    pub corrupt_rescaling: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { max_n: 4, max_s: 3, corrupt_rescaling: false }
    }
}

pub const ORACLE_TOLERANCE: f64 = 1e-10;
const CORRUPTION: f64 = 1.0 + 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub instance: String,
    pub identity: &'static str,
    pub expected: f64,
    pub observed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &OracleCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    fn equal(&mut self, instance: &str, identity: &'static str, expected: f64, observed: f64) {
        let pass = (expected - observed).abs() <= ORACLE_TOLERANCE * expected.abs().max(1.0);
        self.checks.push(OracleCheck { instance: instance.to_string(), identity, expected, observed, pass });
    }

    /// `optimal ≤ uniform`, strict unless `ν = 0`.
    fn dominance(&mut self, instance: &str, uniform: f64, optimal: f64, nu: f64) {
        let tol = ORACLE_TOLERANCE * uniform.abs().max(1.0);
        let pass = if nu.abs() <= tol {
            (uniform - optimal).abs() <= tol
        } else {
            optimal < uniform - tol
        };
        self.checks.push(OracleCheck {
            instance: instance.to_string(),
            identity: "optimal <= uniform (equal iff nu = 0)",
            expected: uniform,
            observed: optimal,
            pass,
        });
    }

    /// Human-readable table of every check.
    pub fn table(&self) -> String {
        let mut out = format!("{:<44} {:<40} {:>22} {:>22}  result\n", "instance", "identity", "expected", "observed");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<44} {:<40} {:>22.15e} {:>22.15e}  {}",
                c.instance,
                c.identity,
                c.expected,
                c.observed,
                if c.pass { "ok" } else { "FAIL" }
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(out, "{} checks, {} failed", self.checks.len(), failed);
        out
    }
}

/// Deterministic inner-product instances of length `n`, all with nonzero
/// termwise products.
pub fn oracle_inner_instances(n: usize) -> Vec<(String, DenseVector, DenseVector)> {
    let build = |f: &dyn Fn(usize) -> (f64, f64)| {
        let (a, b): (Vec<f64>, Vec<f64>) = (1..=n).map(f).unzip();
        (DenseVector::new(a).expect("nonempty"), DenseVector::new(b).expect("nonempty"))
    };
    let mut out = Vec::new();
    let (a, b) = build(&|j| (j as f64, (n + 1 - j) as f64));
    out.push((format!("inner ramp n={n}"), a, b));
    let (a, b) = build(&|j| (if j % 2 == 0 { j as f64 } else { -(j as f64) }, j as f64 + 0.5));
    out.push((format!("inner mixed-sign n={n}"), a, b));
    // a_j·b_j is the same for every j, so ν = 0.
    let (a, b) = build(&|j| (2f64.powi(j as i32 - 1), 2f64.powi((n - j) as i32)));
    out.push((format!("inner balanced n={n}"), a, b));
    out
}

/// Deterministic matrix instances with inner dimension `n`.
pub fn oracle_matrix_instances(n: usize) -> Vec<(String, DenseMatrix, DenseMatrix)> {
    let mut out = Vec::new();
    let a = DenseMatrix::new(2, n, (0..2 * n).map(|k| k as f64 + 1.0).collect()).expect("shape");
    let b = DenseMatrix::new(n, 3, (0..3 * n).map(|k| if k % 3 == 1 { -(k as f64) - 1.0 } else { k as f64 + 0.5 }).collect())
        .expect("shape");
    out.push((format!("matmul mixed 2x{n}x3 n={n}"), a, b));
    // Column norms of A times row norms of B are constant in j, so ν̄ = 0.
    let mut a = vec![0.0; 2 * n];
    let mut b = vec![0.0; 2 * n];
    for j in 0..n {
        let c = 2f64.powi(j as i32);
        a[j] = c;
        a[n + j] = -2.0 * c;
        b[2 * j] = 1.0 / c;
        b[2 * j + 1] = 3.0 / c;
    }
    out.push((
        format!("matmul balanced 2x{n}x2 n={n}"),
        DenseMatrix::new(2, n, a).expect("shape"),
        DenseMatrix::new(n, 2, b).expect("shape"),
    ));
    out
}

/// Enumerates every small instance under uniform and optimal sampling and
/// compares against the closed-form identities.
pub fn run_oracle(options: OracleOptions) -> CliResult<OracleReport> {
    if options.max_n == 0 || options.max_s == 0 {
        return Err(usage("max-n and max-s must be at least 1"));
    }
    let scale = if options.corrupt_rescaling { CORRUPTION } else { 1.0 };
    let mut report = OracleReport::default();
    for n in 1..=options.max_n {
        for (name, a, b) in oracle_inner_instances(n) {
            let exact = exact_inner(&a, &b)?;
            let moments = MomentTable::deterministic_inner(&a, &b)?;
            let constants = inner_constants(&moments)?;
            let uniform = IndexDistribution::uniform(n)?;
            let optimal = IndexDistribution::optimal_inner(moments.inner_moments.as_deref().expect("inner"))?;
            for s in 1..=options.max_s {
                let tag = format!("{name} s={s}");
                let stat = |dist: &IndexDistribution| {
                    enumerate_moments_with(dist, s, |r| scale * sketch_inner(&a, &b, r, dist).expect("dims").value)
                };
                let u = stat(&uniform)?;
                let o = stat(&optimal)?;
                report.equal(&tag, "uniform mean = a.b", exact, u.mean);
                report.equal(&tag, "optimal mean = a.b", exact, o.mean);
                report.equal(&tag, "uniform var = (n nu + mu)/s", expected_variance_uniform(&constants, s)?, u.variance);
                report.equal(&tag, "optimal var = mu/s", expected_variance_optimal(&constants, s)?, o.variance);
                report.dominance(&tag, u.variance, o.variance, constants.nu);
            }
        }
        for (name, a, b) in oracle_matrix_instances(n) {
            let exact = exact_matmul(&a, &b)?;
            let moments = MomentTable::deterministic_matrix(&a, &b)?;
            let constants = matrix_constants(&moments)?;
            let uniform = IndexDistribution::uniform(n)?;
            let optimal = IndexDistribution::optimal_matrix(
                moments.col_a_moments.as_deref().expect("columns"),
                moments.row_b_moments.as_deref().expect("rows"),
            )?;
            for s in 1..=options.max_s {
                let tag = format!("{name} s={s}");
                let stat = |dist: &IndexDistribution| {
                    enumerate_matrix_moments_with(dist, s, |r| {
                        sketch_matmul(&a, &b, r, dist).expect("dims").value.map(|x| scale * x)
                    })
                };
                let u = stat(&uniform)?;
                let o = stat(&optimal)?;
                report.equal(&tag, "uniform mean = AB (max entry gap)", 0.0, max_gap(&exact, &u.mean));
                report.equal(&tag, "optimal mean = AB (max entry gap)", 0.0, max_gap(&exact, &o.mean));
                report.equal(
                    &tag,
                    "uniform E|X-AB|^2 = (n nu + mu)/s",
                    expected_frobenius_error_uniform(&constants, s)?,
                    u.expected_sq_deviation,
                );
                report.equal(
                    &tag,
                    "optimal E|X-AB|^2 = mu/s",
                    expected_frobenius_error_optimal(&constants, s)?,
                    o.expected_sq_deviation,
                );
                report.dominance(&tag, u.expected_sq_deviation, o.expected_sq_deviation, constants.nu);
            }
        }
    }
    Ok(report)
}

/// Largest entry gap relative to `max(1, |exact entry|)`.
fn max_gap(exact: &DenseMatrix, mean: &DenseMatrix) -> f64 {
    exact
        .as_slice()
        .iter()
        .zip(mean.as_slice())
        .map(|(e, m)| (e - m).abs() / e.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Runs one MLMC estimate per base and renders the reports as text.
pub fn run_estimate(config: &SweepConfig) -> CliResult<String> {
    config.validate()?;
    let f = config.target_function()?;
    let problem = config.problem()?;
    let n = problem.dimension();
    let estimator = Estimator::new(config.execution());
    let mut out = String::new();
    for base in config.estimate_bases() {
        let plan = LevelPlan::capped(config.epsilon, base, config.c1, config.c2, n)?;
        let _ = writeln!(
            out,
            "mode={:?} model={} target={} M={} L={} epsilon={} seed={}",
            config.mode,
            config.model_key(),
            config.target_key(),
            base,
            plan.levels(),
            config.epsilon,
            config.seed
        );
        match &problem {
            Problem::Inner(model) => {
                let r = estimator.mlmc_inner(model.as_ref(), &f, &plan, config.seed)?;
                let _ = writeln!(out, "value = {}", r.value);
                write_levels(&mut out, &r, |v| v.abs());
            }
            Problem::Matmul(model) => {
                let r = estimator.mlmc_matmul(model.as_ref(), &f, &plan, config.seed)?;
                let _ = writeln!(out, "value ({}x{}) =", r.value.rows(), r.value.cols());
                for i in 0..r.value.rows() {
                    let row: Vec<String> = (0..r.value.cols()).map(|j| format!("{:.6e}", r.value.get(i, j))).collect();
                    let _ = writeln!(out, "  [{}]", row.join(", "));
                }
                write_levels(&mut out, &r, |v| v.sq_norm().sqrt());
            }
        }
        let _ = writeln!(out, "output entries = {}", problem.output_entries());
    }
    Ok(out)
}

fn write_levels<V: Estimand>(out: &mut String, r: &EstimateReport<V>, magnitude: impl Fn(&V) -> f64) {
    let _ = writeln!(out, "{:>3} {:>10} {:>16} {:>16} {:>14}", "l", "N_l", "|Y_l|", "variance", "cost_units");
    for s in &r.per_level {
        let _ = writeln!(
            out,
            "{:>3} {:>10} {:>16.6e} {:>16.6e} {:>14}",
            s.level,
            s.replication_count,
            magnitude(&s.estimate),
            s.sample_variance(),
            s.cost_units
        );
    }
    let _ = writeln!(out, "standard error = {:.6e}", r.standard_error);
    let _ = writeln!(out, "total cost units = {}", r.total_cost_units);
    let _ = writeln!(out, "wall time = {:.3} s", r.wall_time.as_secs_f64());
}
