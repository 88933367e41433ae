//! Random data models, target functionals and the brute-force reference
//! value used as ground truth for relative errors.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use crate::exec::Execution;
use crate::rng::{substream, Purpose, SubstreamRng};
use crate::tensor::{exact_inner, exact_matmul, DenseMatrix, DenseVector};
use crate::{Error, Result};

/// Source of random vector pairs `(a, b)` of a fixed length.
pub trait VectorPairModel: Send + Sync {
    fn dim(&self) -> usize;
    fn draw(&self, rng: &mut SubstreamRng) -> (DenseVector, DenseVector);
    fn label(&self) -> String;
}

/// Source of random matrix pairs `(A, B)` of shapes `m×n` and `n×d`.
pub trait MatrixPairModel: Send + Sync {
    /// `(m, n, d)`.
    fn shape(&self) -> (usize, usize, usize);
    fn draw(&self, rng: &mut SubstreamRng) -> (DenseMatrix, DenseMatrix);
    fn label(&self) -> String;
}

/// `a_j ~ (j/50)(0.5 − N(0,1))`, `b_j ~ cos(Poi(10) + 2·Exp(1))`.
#[derive(Debug, Clone)]
pub struct PaperInnerModel {
    n: usize,
    poisson: Poisson<f64>,
}

impl PaperInnerModel {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("model length must be at least 1".into()));
        }
        Ok(Self { n, poisson: poisson10() })
    }
}

impl Default for PaperInnerModel {
    fn default() -> Self {
        Self { n: 1000, poisson: poisson10() }
    }
}

fn poisson10() -> Poisson<f64> {
    Poisson::new(10.0).expect("valid Poisson rate")
}

impl VectorPairModel for PaperInnerModel {
    fn dim(&self) -> usize {
        self.n
    }

    fn draw(&self, rng: &mut SubstreamRng) -> (DenseVector, DenseVector) {
        let a = (1..=self.n)
            .map(|j| {
                let z: f64 = rng.sample(StandardNormal);
                (j as f64 / 50.0) * (0.5 - z)
            })
            .collect();
        let b = (0..self.n)
            .map(|_| {
                let p = self.poisson.sample(rng);
                let e: f64 = rng.sample(Exp1);
                (p + 2.0 * e).cos()
            })
            .collect();
        (vec_unchecked(a), vec_unchecked(b))
    }

    fn label(&self) -> String {
        format!("paper-inner(n={})", self.n)
    }
}

/// `A_ij ~ g₁((j/100)(0.5 − N(0,1)))` with `g₁(x) = sin x + N(0,1)·x`, and
/// `B_jk ~ g₂(Poi(10))` with `g₂(x) = cos(x)·H(5 − x)`.
///
/// Both normal draws inside `A_ij` are fresh per entry.
#[derive(Debug, Clone)]
pub struct PaperMatrixModel {
    m: usize,
    n: usize,
    d: usize,
    poisson: Poisson<f64>,
}

impl PaperMatrixModel {
    pub fn new(m: usize, n: usize, d: usize) -> Result<Self> {
        if m == 0 || n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!("model shape ({m}, {n}, {d}) has a zero")));
        }
        Ok(Self { m, n, d, poisson: poisson10() })
    }
}

impl Default for PaperMatrixModel {
    fn default() -> Self {
        Self { m: 10, n: 1000, d: 10, poisson: poisson10() }
    }
}

impl MatrixPairModel for PaperMatrixModel {
    fn shape(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.d)
    }

    fn draw(&self, rng: &mut SubstreamRng) -> (DenseMatrix, DenseMatrix) {
        let mut a = Vec::with_capacity(self.m * self.n);
        for _ in 0..self.m {
            for j in 1..=self.n {
                let z: f64 = rng.sample(StandardNormal);
                let x = (j as f64 / 100.0) * (0.5 - z);
                let w: f64 = rng.sample(StandardNormal);
                a.push(x.sin() + w * x);
            }
        }
        let mut b = Vec::with_capacity(self.n * self.d);
        for _ in 0..self.n * self.d {
            let p = self.poisson.sample(rng);
            b.push(p.cos() * heaviside(5.0 - p));
        }
        (
            DenseMatrix::from_raw(self.m, self.n, a),
            DenseMatrix::from_raw(self.n, self.d, b),
        )
    }

    fn label(&self) -> String {
        format!("paper-matrix(m={}, n={}, d={})", self.m, self.n, self.d)
    }
}

/// `a = b = (1, …, 1)` every draw.
#[derive(Debug, Clone)]
pub struct ConstantOnesInner {
    n: usize,
}

impl ConstantOnesInner {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("model length must be at least 1".into()));
        }
        Ok(Self { n })
    }
}

impl VectorPairModel for ConstantOnesInner {
    fn dim(&self) -> usize {
        self.n
    }

    fn draw(&self, _rng: &mut SubstreamRng) -> (DenseVector, DenseVector) {
        (vec_unchecked(vec![1.0; self.n]), vec_unchecked(vec![1.0; self.n]))
    }

    fn label(&self) -> String {
        format!("constant-ones(n={})", self.n)
    }
}

/// Returns the same pair on every draw.
#[derive(Debug, Clone)]
pub struct DeterministicInner {
    a: DenseVector,
    b: DenseVector,
}

impl DeterministicInner {
    pub fn new(a: DenseVector, b: DenseVector) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!("lengths {} and {}", a.len(), b.len())));
        }
        Ok(Self { a, b })
    }

    /// `a_j = j`, `b_j = n + 1 − j`.
    pub fn ramp(n: usize) -> Result<Self> {
        Self::new(
            DenseVector::new((1..=n).map(|j| j as f64).collect())?,
            DenseVector::new((1..=n).map(|j| (n + 1 - j) as f64).collect())?,
        )
    }

    pub fn vectors(&self) -> (&DenseVector, &DenseVector) {
        (&self.a, &self.b)
    }
}

impl VectorPairModel for DeterministicInner {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn draw(&self, _rng: &mut SubstreamRng) -> (DenseVector, DenseVector) {
        (self.a.clone(), self.b.clone())
    }

    fn label(&self) -> String {
        format!("deterministic(n={})", self.a.len())
    }
}

#[derive(Debug, Clone)]
pub struct ConstantOnesMatrix {
    m: usize,
    n: usize,
    d: usize,
}

impl ConstantOnesMatrix {
    pub fn new(m: usize, n: usize, d: usize) -> Result<Self> {
        if m == 0 || n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!("model shape ({m}, {n}, {d}) has a zero")));
        }
        Ok(Self { m, n, d })
    }
}

impl MatrixPairModel for ConstantOnesMatrix {
    fn shape(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.d)
    }

    fn draw(&self, _rng: &mut SubstreamRng) -> (DenseMatrix, DenseMatrix) {
        (
            DenseMatrix::from_raw(self.m, self.n, vec![1.0; self.m * self.n]),
            DenseMatrix::from_raw(self.n, self.d, vec![1.0; self.n * self.d]),
        )
    }

    fn label(&self) -> String {
        format!("constant-ones(m={}, n={}, d={})", self.m, self.n, self.d)
    }
}

#[derive(Debug, Clone)]
pub struct DeterministicMatrix {
    a: DenseMatrix,
    b: DenseMatrix,
}

impl DeterministicMatrix {
    pub fn new(a: DenseMatrix, b: DenseMatrix) -> Result<Self> {
        if a.cols() != b.rows() {
            return Err(Error::DimensionMismatch(format!("{:?} by {:?}", a.shape(), b.shape())));
        }
        Ok(Self { a, b })
    }

    /// Small positive integer pattern with no zero column of `A` or row of `B`.
    pub fn ramp(m: usize, n: usize, d: usize) -> Result<Self> {
        let a = (0..m * n).map(|p| (1 + (p / n + p % n) % 3) as f64).collect();
        let b = (0..n * d).map(|p| (1 + (p / d + 2 * (p % d)) % 4) as f64).collect();
        Self::new(DenseMatrix::new(m, n, a)?, DenseMatrix::new(n, d, b)?)
    }

    pub fn matrices(&self) -> (&DenseMatrix, &DenseMatrix) {
        (&self.a, &self.b)
    }
}

impl MatrixPairModel for DeterministicMatrix {
    fn shape(&self) -> (usize, usize, usize) {
        (self.a.rows(), self.a.cols(), self.b.cols())
    }

    fn draw(&self, _rng: &mut SubstreamRng) -> (DenseMatrix, DenseMatrix) {
        (self.a.clone(), self.b.clone())
    }

    fn label(&self) -> String {
        let (m, n, d) = self.shape();
        format!("deterministic(m={m}, n={n}, d={d})")
    }
}

fn vec_unchecked(entries: Vec<f64>) -> DenseVector {
    DenseVector::new(entries).expect("model produced an invalid vector")
}

/// Heaviside step with `H(0) = 1`.
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Scalar functional `f` with its nominal Lipschitz constant `C_f`.
#[derive(Clone)]
pub struct TargetFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lipschitz_constant: f64,
    label: String,
}

impl TargetFunction {
    pub fn new(
        label: impl Into<String>,
        lipschitz_constant: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { f: Arc::new(f), lipschitz_constant, label: label.into() }
    }

    pub fn identity() -> Self {
        Self::new("identity", 1.0, |x| x)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), 0.0, move |_| c)
    }

    /// `f(x) = |x|·H(x − 10)`, nominal `C_f = 1`.
    ///
    /// Not globally Lipschitz: there is a jump of height 10 at `x = 10`.
    pub fn f1() -> Self {
        Self::new("f1", 1.0, |x| x.abs() * heaviside(x - 10.0))
    }

    /// `f(x) = x²·sin(1/(|x| + ζ))`.
    pub fn f2(zeta: f64) -> Result<Self> {
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(Error::InvalidInput(format!("zeta must be positive, got {zeta}")));
        }
        // |f'(x)| ≤ 2|x| + 1 is unbounded on ℝ; C_f is left at the nominal 1.
        Ok(Self::new(format!("f2(zeta={zeta:e})"), 1.0, move |x: f64| {
            x * x * (1.0 / (x.abs() + zeta)).sin()
        }))
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// `f⊙(X)`.
    pub fn apply_elementwise(&self, x: &DenseMatrix) -> DenseMatrix {
        x.map(|v| (self.f)(v))
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz_constant
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("label", &self.label)
            .field("lipschitz_constant", &self.lipschitz_constant)
            .finish()
    }
}

pub const DEFAULT_ZETA: f64 = 1e-12;
pub const DEFAULT_REFERENCE_DRAWS: u64 = 100_000;

/// Brute-force ground truth with its Monte Carlo standard error. For matrix
/// values the error is the Frobenius norm of the entrywise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceValue<V> {
    pub value: V,
    pub standard_error: f64,
    pub draws: u64,
}

const REFERENCE_CHUNK: u64 = 1024;

/// Average of `f(aᵀb)` over `draws` fresh pairs, products computed exactly.
pub fn reference_inner(
    model: &dyn VectorPairModel,
    f: &TargetFunction,
    draws: u64,
    seed: u64,
    exec: &Execution,
) -> Result<ReferenceValue<f64>> {
    if draws == 0 {
        return Err(Error::InvalidInput("reference needs at least one draw".into()));
    }
    let chunks = draws.div_ceil(REFERENCE_CHUNK);
    let partial = exec.map_indexed(chunks, |c| {
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for k in c * REFERENCE_CHUNK..((c + 1) * REFERENCE_CHUNK).min(draws) {
            let mut rng = substream(seed, Purpose::Reference, 0, k);
            let (a, b) = model.draw(&mut rng);
            let y = f.apply(exact_inner(&a, &b).expect("model dimensions agree"));
            sum += y;
            sum_sq += y * y;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = draws as f64;
    let mean = sum / n;
    Ok(ReferenceValue { value: mean, standard_error: standard_error(sum_sq / n - mean * mean, draws), draws })
}

/// Average of `f⊙(AB)` over `draws` fresh pairs.
pub fn reference_matmul(
    model: &dyn MatrixPairModel,
    f: &TargetFunction,
    draws: u64,
    seed: u64,
    exec: &Execution,
) -> Result<ReferenceValue<DenseMatrix>> {
    if draws == 0 {
        return Err(Error::InvalidInput("reference needs at least one draw".into()));
    }
    let (m, _, d) = model.shape();
    let chunks = draws.div_ceil(REFERENCE_CHUNK);
    let partial = exec.map_indexed(chunks, |c| {
        let mut sum = vec![0.0; m * d];
        let mut sum_sq = vec![0.0; m * d];
        for k in c * REFERENCE_CHUNK..((c + 1) * REFERENCE_CHUNK).min(draws) {
            let mut rng = substream(seed, Purpose::Reference, 0, k);
            let (a, b) = model.draw(&mut rng);
            let y = f.apply_elementwise(&exact_matmul(&a, &b).expect("model dimensions agree"));
            for ((s, q), v) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(y.as_slice()) {
                *s += v;
                *q += v * v;
            }
        }
        (sum, sum_sq)
    });
    let mut sum = vec![0.0; m * d];
    let mut sum_sq = vec![0.0; m * d];
    for (s, q) in &partial {
        for i in 0..m * d {
            sum[i] += s[i];
            sum_sq[i] += q[i];
        }
    }
    let n = draws as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let spread: f64 = mean
        .iter()
        .zip(&sum_sq)
        .map(|(mu, q)| q / n - mu * mu)
        .sum();
    Ok(ReferenceValue {
        value: DenseMatrix::new(m, d, mean)?,
        standard_error: standard_error(spread, draws),
        draws,
    })
}

fn standard_error(population_variance: f64, draws: u64) -> f64 {
    if draws < 2 {
        return 0.0;
    }
    let n = draws as f64;
    (population_variance.max(0.0) * n / (n - 1.0) / n).sqrt()
}

/// Largest `|f(x) − f(y)| / |x − y|` over `pairs` uniform pairs in
/// `[lo, hi]²`, skipping pairs whose segment contains a point of `exclude`.
pub fn sampled_lipschitz(
    f: &TargetFunction,
    pairs: usize,
    lo: f64,
    hi: f64,
    exclude: &[f64],
    seed: u64,
) -> f64 {
    let mut rng = substream(seed, Purpose::Diagnostics, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = rng.random_range(lo..hi);
        let y = rng.random_range(lo..hi);
        let (l, h) = if x < y { (x, y) } else { (y, x) };
        if h - l < 1e-9 || exclude.iter().any(|&p| l <= p && p <= h) {
            continue;
        }
        worst = worst.max((f.apply(x) - f.apply(y)).abs() / (h - l));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        let f = TargetFunction::f1();
        assert_eq!(f.apply(15.0), 15.0);
        assert_eq!(f.apply(9.99), 0.0);
        assert_eq!(f.apply(10.0), 10.0);
        assert_eq!(f.apply(-20.0), 0.0);
        assert_eq!(f.lipschitz_constant(), 1.0);
    }

    #[test]
    fn f2_examples() {
        let f = TargetFunction::f2(DEFAULT_ZETA).unwrap();
        assert_eq!(f.apply(0.0), 0.0);
        for x in [-50.0, -3.3, -0.01, 0.2, 1.0, 7.5, 123.0] {
            assert!(f.apply(x).abs() <= x * x);
            assert_eq!(f.apply(-x), f.apply(x));
        }
        assert!(TargetFunction::f2(0.0).is_err());
        assert!(TargetFunction::f2(-1.0).is_err());
        assert!(f.label().contains("1e-12"));
    }

    #[test]
    fn inner_experiment_model_shapes_and_ranges() {
        let model = PaperInnerModel::default();
        let (a, b) = model.draw(&mut substream(1, Purpose::Diagnostics, 0, 0));
        assert_eq!((a.len(), b.len()), (1000, 1000));
        assert!(b.as_slice().iter().all(|x| x.abs() <= 1.0));
        let (a2, _) = model.draw(&mut substream(1, Purpose::Diagnostics, 0, 1));
        assert_ne!(a, a2);
    }

    #[test]
    fn inner_experiment_model_mean_of_a100() {
        // E[a_100] = (100/50)·0.5 = 1, sd = 2.
        let model = PaperInnerModel::default();
        let draws = 100_000u64;
        let sum: f64 = (0..draws)
            .map(|k| model.draw(&mut substream(3, Purpose::Diagnostics, 0, k)).0.as_slice()[99])
            .sum();
        let mean = sum / draws as f64;
        assert!((mean - 1.0).abs() < 3.0 * 2.0 / (draws as f64).sqrt(), "{mean}");
    }

    #[test]
    fn matrix_experiment_model_shapes_and_zero_fraction() {
        let model = PaperMatrixModel::default();
        let (a, b) = model.draw(&mut substream(4, Purpose::Diagnostics, 0, 0));
        assert_eq!(a.shape(), (10, 1000));
        assert_eq!(b.shape(), (1000, 10));
        assert!(b.as_slice().iter().all(|x| x.abs() <= 1.0));

        // P(Poi(10) ≤ 5) by summing the pmf.
        let mut pmf = (-10.0f64).exp();
        let mut cdf = pmf;
        for k in 1..=5 {
            pmf *= 10.0 / k as f64;
            cdf += pmf;
        }
        let p_zero = 1.0 - cdf;
        let mut zeros = 0usize;
        let mut total = 0usize;
        for k in 0..10 {
            let (_, b) = model.draw(&mut substream(5, Purpose::Diagnostics, 0, k));
            zeros += b.as_slice().iter().filter(|&&x| x == 0.0).count();
            total += b.as_slice().len();
        }
        let freq = zeros as f64 / total as f64;
        let sigma = (p_zero * (1.0 - p_zero) / total as f64).sqrt();
        assert!((freq - p_zero).abs() < 3.0 * sigma, "{freq} vs {p_zero}");
    }

    #[test]
    fn reference_of_trivial_models() {
        let f = TargetFunction::identity();
        let ones = ConstantOnesInner::new(50).unwrap();
        let r = reference_inner(&ones, &f, 10, 0, &Execution::Sequential).unwrap();
        assert_eq!(r.value, 50.0);
        assert_eq!(r.standard_error, 0.0);

        let det = DeterministicInner::ramp(4).unwrap();
        let r = reference_inner(&det, &f, 1, 0, &Execution::Sequential).unwrap();
        assert_eq!(r.value, 1.0 * 4.0 + 2.0 * 3.0 + 3.0 * 2.0 + 4.0 * 1.0);

        let det = DeterministicMatrix::ramp(2, 3, 2).unwrap();
        let (a, b) = det.matrices();
        let r = reference_matmul(&det, &f, 1, 0, &Execution::Sequential).unwrap();
        assert_eq!(r.value, exact_matmul(a, b).unwrap());
    }

    #[test]
    fn reference_is_thread_count_independent() {
        let model = PaperInnerModel::new(64).unwrap();
        let f = TargetFunction::f1();
        let seq = reference_inner(&model, &f, 3000, 9, &Execution::Sequential).unwrap();
        let par = reference_inner(&model, &f, 3000, 9, &Execution::ParallelWith { threads: 4 }).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn reference_self_consistency_across_seeds() {
        let model = PaperInnerModel::default();
        let f = TargetFunction::f1();
        let exec = Execution::Parallel;
        let r1 = reference_inner(&model, &f, 100_000, 1, &exec).unwrap();
        let r2 = reference_inner(&model, &f, 100_000, 2, &exec).unwrap();
        let combined = (r1.standard_error.powi(2) + r2.standard_error.powi(2)).sqrt();
        assert!((r1.value - r2.value).abs() < 3.0 * combined, "{r1:?} {r2:?}");
    }

    #[test]
    fn sampled_lipschitz_checks() {
        let f1 = TargetFunction::f1();
        let c = sampled_lipschitz(&f1, 100_000, -100.0, 100.0, &[10.0], 17);
        assert!(c <= 1.0 + 1e-12, "C_eff = {c}");
        // The jump at 10 is what breaks the global bound.
        let with_jump = sampled_lipschitz(&f1, 100_000, 9.0, 11.0, &[], 17);
        assert!(with_jump > 1.0);

        let f2 = TargetFunction::f2(DEFAULT_ZETA).unwrap();
        let c2 = sampled_lipschitz(&f2, 100_000, -100.0, 100.0, &[], 17);
        assert!(c2.is_finite() && c2 <= 201.0, "C_eff = {c2}");
    }
}
