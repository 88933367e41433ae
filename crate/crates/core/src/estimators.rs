//! MLMC estimators for `E[f(aᵀb)]` and `E[f⊙(AB)]`, and the standard Monte
//! Carlo baselines at the finest level.
//!
//! Every replication draws a fresh data pair and a fresh uniform realization
//! from its own substream `(seed, level, replication)`. Within a level-`l`
//! replication the fine term uses all `Mˡ` indices and the coarse term uses
//! the first `Mˡ⁻¹` of them. Replications may run in parallel; their results
//! are collected in replication order and reduced sequentially, level 0
//! upward.

use std::time::{Duration, Instant};

use crate::exec::Execution;
use crate::models::{MatrixPairModel, TargetFunction, VectorPairModel};
use crate::planner::{level_unit_cost, LevelPlan};
use crate::rng::{substream, Purpose, SubstreamRng, MAX_LEVEL, MAX_REPLICATION};
use crate::sampling::{fill_indices, IndexDistribution, Realization};
use crate::sketch::{inner_coupled, matmul_coupled};
use crate::tensor::DenseMatrix;
use crate::{Error, Result};

/// Largest realization the estimators will allocate.
const MAX_SAMPLE_SIZE: u64 = 1 << 28;

/// Values an estimator can average: scalars and matrices.
pub trait Estimand: Clone + Send + Sync + std::fmt::Debug {
    fn add_assign(&mut self, other: &Self);
    fn sub(&self, other: &Self) -> Self;
    fn div(&self, k: f64) -> Self;
    /// Squared magnitude (`x²` or `‖X‖_F²`).
    fn sq_norm(&self) -> f64;
}

impl Estimand for f64 {
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }

    fn sub(&self, other: &Self) -> Self {
        self - other
    }

    fn div(&self, k: f64) -> Self {
        self / k
    }

    fn sq_norm(&self) -> f64 {
        self * self
    }
}

impl Estimand for DenseMatrix {
    fn add_assign(&mut self, other: &Self) {
        for (x, y) in self.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *x += y;
        }
    }

    fn sub(&self, other: &Self) -> Self {
        let entries = self.as_slice().iter().zip(other.as_slice()).map(|(x, y)| x - y).collect();
        DenseMatrix::from_raw(self.rows(), self.cols(), entries)
    }

    fn div(&self, k: f64) -> Self {
        self.map(|x| x / k)
    }

    fn sq_norm(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |acc, x| acc + x * x)
    }
}

/// Per-level summary `Ŷ_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStatistic<V> {
    pub level: u32,
    pub estimate: V,
    pub replication_count: u64,
    /// Mean of the squared coupled differences (`‖·‖_F²` for matrices).
    pub sample_mean_of_squares: f64,
    pub cost_units: u64,
}

impl<V: Estimand> LevelStatistic<V> {
    /// Unbiased sample variance of one coupled difference; zero for a
    /// single replication.
    pub fn sample_variance(&self) -> f64 {
        let n = self.replication_count as f64;
        if self.replication_count < 2 {
            return 0.0;
        }
        ((self.sample_mean_of_squares - self.estimate.sq_norm()) * n / (n - 1.0)).max(0.0)
    }

    /// Standard error of `Ŷ_l`.
    pub fn standard_error(&self) -> f64 {
        (self.sample_variance() / self.replication_count as f64).sqrt()
    }
}

/// One replication as it was computed, for coupling audits.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationTrace<V> {
    pub level: u32,
    pub replication: u64,
    pub realization: Realization,
    /// Length of the prefix that fed the coarse term (`None` at level 0 and
    /// in Monte Carlo runs).
    pub coarse_len: Option<usize>,
    pub fine_value: V,
    pub coarse_value: Option<V>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport<V> {
    /// `Ŷ` for MLMC, `P̂` for Monte Carlo.
    pub value: V,
    /// Empty for Monte Carlo runs.
    pub per_level: Vec<LevelStatistic<V>>,
    pub total_cost_units: u64,
    pub wall_time: Duration,
    pub seed: u64,
    /// Sampling standard error of `value` (Frobenius norm for matrices).
    pub standard_error: f64,
    /// Replication count for Monte Carlo runs, `Σ N_l` for MLMC.
    pub replications: u64,
    pub trace: Option<Vec<ReplicationTrace<V>>>,
}

/// Estimator runner: execution strategy plus optional tracing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Estimator {
    execution: Execution,
    record_trace: bool,
}

type LevelRun<V> = (LevelStatistic<V>, Vec<Sample<V>>);

struct Sample<V> {
    fine: V,
    coarse: Option<V>,
    realization: Option<Vec<usize>>,
}

impl Estimator {
    pub fn new(execution: Execution) -> Self {
        Self { execution, record_trace: false }
    }

    /// Keeps every realization and its fine/coarse values in the report.
    pub fn with_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    pub fn mlmc_inner(
        &self,
        model: &dyn VectorPairModel,
        f: &TargetFunction,
        plan: &LevelPlan,
        seed: u64,
    ) -> Result<EstimateReport<f64>> {
        let n = model.dim();
        check_plan(plan, n)?;
        let dist = IndexDistribution::uniform(n)?;
        self.run_mlmc(n, 1, plan, seed, |rng| model.draw(rng), |(a, b), idx, coarse| {
            let (fine, coarse) = inner_coupled(a.as_slice(), b.as_slice(), idx, &dist, coarse);
            (f.apply(fine), coarse.map(|c| f.apply(c)))
        })
    }

    pub fn mlmc_matmul(
        &self,
        model: &dyn MatrixPairModel,
        f: &TargetFunction,
        plan: &LevelPlan,
        seed: u64,
    ) -> Result<EstimateReport<DenseMatrix>> {
        let (m, n, d) = model.shape();
        check_plan(plan, n)?;
        let dist = IndexDistribution::uniform(n)?;
        self.run_mlmc(n, (m * d) as u64, plan, seed, |rng| model.draw(rng), |(a, b), idx, coarse| {
            let (fine, coarse) = matmul_coupled(a, b, idx, &dist, coarse);
            (f.apply_elementwise(&fine), coarse.map(|c| f.apply_elementwise(&c)))
        })
    }

    /// Average of `f(sketch with M^L uniform samples)` over `replications`
    /// fresh data pairs.
    pub fn mc_inner(
        &self,
        model: &dyn VectorPairModel,
        f: &TargetFunction,
        levels: u32,
        replications: u64,
        base: u64,
        seed: u64,
    ) -> Result<EstimateReport<f64>> {
        let n = model.dim();
        let dist = IndexDistribution::uniform(n)?;
        self.run_mc(n, 1, levels, replications, base, seed, |rng| model.draw(rng), |(a, b), idx| {
            f.apply(inner_coupled(a.as_slice(), b.as_slice(), idx, &dist, None).0)
        })
    }

    pub fn mc_matmul(
        &self,
        model: &dyn MatrixPairModel,
        f: &TargetFunction,
        levels: u32,
        replications: u64,
        base: u64,
        seed: u64,
    ) -> Result<EstimateReport<DenseMatrix>> {
        let (m, n, d) = model.shape();
        let dist = IndexDistribution::uniform(n)?;
        self.run_mc(n, (m * d) as u64, levels, replications, base, seed, |rng| model.draw(rng), |(a, b), idx| {
            f.apply_elementwise(&matmul_coupled(a, b, idx, &dist, None).0)
        })
    }

    fn run_mlmc<D, V, Draw, Eval>(
        &self,
        n: usize,
        md: u64,
        plan: &LevelPlan,
        seed: u64,
        draw: Draw,
        eval: Eval,
    ) -> Result<EstimateReport<V>>
    where
        V: Estimand,
        Draw: Fn(&mut SubstreamRng) -> D + Sync + Send,
        Eval: Fn(&D, &[usize], Option<usize>) -> (V, Option<V>) + Sync + Send,
    {
        let dist = IndexDistribution::uniform(n)?;
        let base = plan.base();
        let record = self.record_trace;
        let exec = ambient(self.execution);
        let start = Instant::now();

        let levels = self.execution.scope(|| -> Result<Vec<LevelRun<V>>> {
            let mut out = Vec::with_capacity(plan.replications().len());
            for (l, &count) in plan.replications().iter().enumerate() {
                let level = l as u32;
                let size = checked_sample_size(plan, level)?;
                let coarse_len = (level > 0).then(|| size / base as usize);
                check_replications(count)?;
                let samples = exec.map_indexed(count, |k| {
                    let mut rng = substream(seed, Purpose::Mlmc, level, k);
                    let data = draw(&mut rng);
                    let mut idx = Vec::with_capacity(size);
                    fill_indices(&dist, size, &mut rng, &mut idx);
                    let (fine, coarse) = eval(&data, &idx, coarse_len);
                    Sample { fine, coarse, realization: record.then_some(idx) }
                });
                let stat = reduce_level(level, &samples, level_unit_cost(base, level) * md);
                out.push((stat, samples));
            }
            Ok(out)
        })?;
        let wall_time = start.elapsed();

        let mut value: Option<V> = None;
        let mut variance = 0.0;
        let mut per_level = Vec::with_capacity(levels.len());
        let mut trace = record.then(Vec::new);
        for (stat, samples) in levels {
            match value.as_mut() {
                None => value = Some(stat.estimate.clone()),
                Some(v) => v.add_assign(&stat.estimate),
            }
            variance += stat.sample_variance() / stat.replication_count as f64;
            if let Some(t) = trace.as_mut() {
                let coarse_len = (stat.level > 0).then(|| (base as usize).pow(stat.level - 1));
                for (k, s) in samples.into_iter().enumerate() {
                    t.push(ReplicationTrace {
                        level: stat.level,
                        replication: k as u64,
                        realization: Realization::from_zero_based(
                            s.realization.expect("recorded"),
                            n,
                        ),
                        coarse_len,
                        fine_value: s.fine,
                        coarse_value: s.coarse,
                    });
                }
            }
            per_level.push(stat);
        }
        Ok(EstimateReport {
            value: value.expect("plans have at least one level"),
            total_cost_units: per_level.iter().map(|s| s.cost_units).sum(),
            replications: per_level.iter().map(|s| s.replication_count).sum(),
            per_level,
            wall_time,
            seed,
            standard_error: variance.sqrt(),
            trace,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn run_mc<D, V, Draw, Eval>(
        &self,
        n: usize,
        md: u64,
        levels: u32,
        replications: u64,
        base: u64,
        seed: u64,
        draw: Draw,
        eval: Eval,
    ) -> Result<EstimateReport<V>>
    where
        V: Estimand,
        Draw: Fn(&mut SubstreamRng) -> D + Sync + Send,
        Eval: Fn(&D, &[usize]) -> V + Sync + Send,
    {
        if replications == 0 {
            return Err(Error::InvalidInput("Monte Carlo needs at least one replication".into()));
        }
        check_replications(replications)?;
        // A single-level plan is only used to validate and size M^L.
        let sizing = LevelPlan::manual(base, vec![1; levels as usize + 1])?;
        let size = checked_sample_size(&sizing, levels)?;
        let dist = IndexDistribution::uniform(n)?;
        let record = self.record_trace;
        let exec = ambient(self.execution);
        let start = Instant::now();
        let samples = self.execution.scope(|| {
            exec.map_indexed(replications, |k| {
                let mut rng = substream(seed, Purpose::MonteCarlo, levels, k);
                let data = draw(&mut rng);
                let mut idx = Vec::with_capacity(size);
                fill_indices(&dist, size, &mut rng, &mut idx);
                let fine = eval(&data, &idx);
                Sample { fine, coarse: None, realization: record.then_some(idx) }
            })
        });
        let wall_time = start.elapsed();
        let unit = size as u64 * md;
        let stat = reduce_level(levels, &samples, unit);
        let trace = record.then(|| {
            samples
                .into_iter()
                .enumerate()
                .map(|(k, s)| ReplicationTrace {
                    level: levels,
                    replication: k as u64,
                    realization: Realization::from_zero_based(s.realization.expect("recorded"), n),
                    coarse_len: None,
                    fine_value: s.fine,
                    coarse_value: None,
                })
                .collect()
        });
        Ok(EstimateReport {
            standard_error: stat.standard_error(),
            value: stat.estimate,
            per_level: Vec::new(),
            total_cost_units: stat.cost_units,
            wall_time,
            seed,
            replications,
            trace,
        })
    }
}

fn ambient(exec: Execution) -> Execution {
    match exec {
        Execution::ParallelWith { .. } => Execution::Parallel,
        other => other,
    }
}

fn check_plan(plan: &LevelPlan, n: usize) -> Result<()> {
    if let Some(dim) = plan.dimension() {
        if dim != n {
            return Err(Error::PlanMismatch(format!("plan built for n={dim}, model has n={n}")));
        }
    }
    if plan.levels() > MAX_LEVEL {
        return Err(Error::PlanMismatch(format!("{} levels exceed {MAX_LEVEL}", plan.levels())));
    }
    Ok(())
}

fn check_replications(count: u64) -> Result<()> {
    if count > MAX_REPLICATION + 1 {
        return Err(Error::InvalidInput(format!("{count} replications exceed the stream space")));
    }
    Ok(())
}

fn checked_sample_size(plan: &LevelPlan, level: u32) -> Result<usize> {
    let size = plan.sample_size(level)?;
    if size > MAX_SAMPLE_SIZE {
        return Err(Error::InvalidInput(format!("sample size {size} at level {level} is too large")));
    }
    Ok(size as usize)
}

fn reduce_level<V: Estimand>(level: u32, samples: &[Sample<V>], unit_cost: u64) -> LevelStatistic<V> {
    let count = samples.len();
    let mut sum: Option<V> = None;
    let mut sum_sq = 0.0;
    for s in samples {
        let diff = match &s.coarse {
            Some(c) => s.fine.sub(c),
            None => s.fine.clone(),
        };
        sum_sq += diff.sq_norm();
        match sum.as_mut() {
            None => sum = Some(diff),
            Some(acc) => acc.add_assign(&diff),
        }
    }
    let n = count as f64;
    LevelStatistic {
        level,
        estimate: sum.expect("at least one replication").div(n),
        replication_count: count as u64,
        sample_mean_of_squares: sum_sq / n,
        cost_units: count as u64 * unit_cost,
    }
}

pub fn mlmc_inner(
    model: &dyn VectorPairModel,
    f: &TargetFunction,
    plan: &LevelPlan,
    seed: u64,
) -> Result<EstimateReport<f64>> {
    Estimator::default().mlmc_inner(model, f, plan, seed)
}

pub fn mlmc_matmul(
    model: &dyn MatrixPairModel,
    f: &TargetFunction,
    plan: &LevelPlan,
    seed: u64,
) -> Result<EstimateReport<DenseMatrix>> {
    Estimator::default().mlmc_matmul(model, f, plan, seed)
}

pub fn mc_inner(
    model: &dyn VectorPairModel,
    f: &TargetFunction,
    levels: u32,
    replications: u64,
    base: u64,
    seed: u64,
) -> Result<EstimateReport<f64>> {
    Estimator::default().mc_inner(model, f, levels, replications, base, seed)
}

pub fn mc_matmul(
    model: &dyn MatrixPairModel,
    f: &TargetFunction,
    levels: u32,
    replications: u64,
    base: u64,
    seed: u64,
) -> Result<EstimateReport<DenseMatrix>> {
    Estimator::default().mc_matmul(model, f, levels, replications, base, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ConstantOnesInner, ConstantOnesMatrix, DeterministicInner, PaperInnerModel};
    use crate::tensor::DenseVector;

    #[test]
    fn constant_model_is_exact_at_every_level() {
        let model = ConstantOnesInner::new(1000).unwrap();
        let plan = LevelPlan::capped(0.1, 7, 1.0, 1.0, 1000).unwrap();
        let r = mlmc_inner(&model, &TargetFunction::identity(), &plan, 3).unwrap();
        assert_eq!(r.value, 1000.0);
        assert_eq!(r.per_level[0].estimate, 1000.0);
        assert!(r.per_level[1..].iter().all(|s| s.estimate == 0.0));
        assert_eq!(r.total_cost_units, 7240);
    }

    #[test]
    fn mc_on_constant_model_and_constant_target() {
        let model = ConstantOnesInner::new(30).unwrap();
        let r = mc_inner(&model, &TargetFunction::identity(), 2, 17, 3, 1).unwrap();
        assert_eq!(r.value, 30.0);
        assert_eq!(r.total_cost_units, 17 * 9);
        assert!(r.per_level.is_empty());

        let noisy = PaperInnerModel::new(40).unwrap();
        let r = mc_inner(&noisy, &TargetFunction::constant(2.5), 1, 9, 4, 1).unwrap();
        assert_eq!(r.value, 2.5);

        let zero = TargetFunction::constant(0.0);
        let m = ConstantOnesMatrix::new(2, 5, 3).unwrap();
        let r = mc_matmul(&m, &zero, 1, 4, 2, 1).unwrap();
        assert_eq!(r.value, DenseMatrix::zeros(2, 3).unwrap());
        assert_eq!(r.total_cost_units, 4 * 2 * 6);
    }

    #[test]
    fn plan_dimension_mismatch_is_rejected() {
        let model = ConstantOnesInner::new(10).unwrap();
        let plan = LevelPlan::capped(0.1, 3, 1.0, 1.0, 11).unwrap();
        assert!(matches!(
            mlmc_inner(&model, &TargetFunction::identity(), &plan, 0),
            Err(Error::PlanMismatch(_))
        ));
    }

    #[test]
    fn level_costs_follow_plan() {
        let model = DeterministicInner::new(
            DenseVector::new(vec![1.0, 2.0]).unwrap(),
            DenseVector::new(vec![3.0, 4.0]).unwrap(),
        )
        .unwrap();
        let plan = LevelPlan::manual(3, vec![5, 4, 2]).unwrap();
        let r = mlmc_inner(&model, &TargetFunction::identity(), &plan, 0).unwrap();
        let costs: Vec<u64> = r.per_level.iter().map(|s| s.cost_units).collect();
        assert_eq!(costs, vec![5, 4 * 4, 2 * 12]);
        assert_eq!(r.replications, 11);
    }

    #[test]
    fn value_is_sum_of_level_estimates() {
        let model = PaperInnerModel::new(50).unwrap();
        let plan = LevelPlan::manual(3, vec![40, 20, 10]).unwrap();
        let r = mlmc_inner(&model, &TargetFunction::f1(), &plan, 8).unwrap();
        let sum = r.per_level.iter().fold(0.0, |acc, s| acc + s.estimate);
        assert_eq!(r.value, sum);
    }

    #[test]
    fn scalar_and_matrix_level_variance() {
        let stat = LevelStatistic {
            level: 1,
            estimate: 2.0,
            replication_count: 4,
            sample_mean_of_squares: 5.0,
            cost_units: 0,
        };
        assert!((stat.sample_variance() - 4.0 / 3.0).abs() < 1e-15);
        let one = LevelStatistic { replication_count: 1, ..stat };
        assert_eq!(one.sample_variance(), 0.0);
    }
}
