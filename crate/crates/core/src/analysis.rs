//! Closed-form variance constants, complexity constants, the `f(M)` curve,
//! and exhaustive enumeration oracles that certify the closed forms on small
//! deterministic instances.
//!
//! For a sketch with `s` samples:
//!
//! - under the optimal distribution `ξ*` the expected variance is `μ / s`;
//! - under the uniform distribution it is `(n·ν + μ) / s`.
//!
//! The matrix case has the same shape with `μ̄, ν̄` and the variance read as
//! the expected squared Frobenius deviation.

use crate::exec::Execution;
use crate::models::{MatrixPairModel, VectorPairModel};
use crate::rng::{substream, Purpose};
use crate::sampling::{IndexDistribution, Realization};
use crate::sketch::{sketch_inner, sketch_matmul};
use crate::tensor::{exact_inner, exact_matmul, frobenius_norm_sq, DenseMatrix, DenseVector};
use crate::{Error, Result};

/// Largest number of outcomes `n^s` the enumeration oracle will visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Default number of model draws used to estimate moments.
pub const DEFAULT_MOMENT_SAMPLES: u64 = 10_000;

/// Second moments that drive the optimal distributions and the variance
/// constants. Any array present must be strictly positive and finite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentTable {
    /// `E[a_j² b_j²]`.
    pub inner_moments: Option<Vec<f64>>,
    /// `E[‖A[:,j]‖²]`.
    pub col_a_moments: Option<Vec<f64>>,
    /// `E[‖B[j,:]‖²]`.
    pub row_b_moments: Option<Vec<f64>>,
    /// `E[(aᵀb)²]` or `E[‖AB‖_F²]`.
    pub cross_term: Option<f64>,
}

impl MomentTable {
    pub fn deterministic_inner(a: &DenseVector, b: &DenseVector) -> Result<Self> {
        let dot = exact_inner(a, b)?;
        let table = Self {
            inner_moments: Some(
                a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * x * y * y).collect(),
            ),
            cross_term: Some(dot * dot),
            ..Default::default()
        };
        table.validate()?;
        Ok(table)
    }

    pub fn deterministic_matrix(a: &DenseMatrix, b: &DenseMatrix) -> Result<Self> {
        let ab = exact_matmul(a, b)?;
        let table = Self {
            col_a_moments: Some((0..a.cols()).map(|j| a.col_norm_sq(j)).collect()),
            row_b_moments: Some((0..b.rows()).map(|j| b.row_norm_sq(j)).collect()),
            cross_term: Some(frobenius_norm_sq(&ab)),
            ..Default::default()
        };
        table.validate()?;
        Ok(table)
    }

    /// Plain averages over `samples` model draws.
    pub fn estimate_inner(
        model: &dyn VectorPairModel,
        samples: u64,
        seed: u64,
        exec: &Execution,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidInput("moment estimation needs at least one sample".into()));
        }
        let n = model.dim();
        let draws = exec.map_indexed(samples, |k| {
            let (a, b) = model.draw(&mut substream(seed, Purpose::Moments, 0, k));
            let dot = exact_inner(&a, &b).expect("model dimensions agree");
            let products: Vec<f64> =
                a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * x * y * y).collect();
            (products, dot * dot)
        });
        let mut moments = vec![0.0; n];
        let mut cross = 0.0;
        for (products, sq) in &draws {
            for (m, p) in moments.iter_mut().zip(products) {
                *m += p;
            }
            cross += sq;
        }
        let count = samples as f64;
        let table = Self {
            inner_moments: Some(moments.into_iter().map(|m| m / count).collect()),
            cross_term: Some(cross / count),
            ..Default::default()
        };
        table.validate()?;
        Ok(table)
    }

    pub fn estimate_matrix(
        model: &dyn MatrixPairModel,
        samples: u64,
        seed: u64,
        exec: &Execution,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidInput("moment estimation needs at least one sample".into()));
        }
        let (_, n, _) = model.shape();
        let draws = exec.map_indexed(samples, |k| {
            let (a, b) = model.draw(&mut substream(seed, Purpose::Moments, 0, k));
            let cols: Vec<f64> = (0..n).map(|j| a.col_norm_sq(j)).collect();
            let rows: Vec<f64> = (0..n).map(|j| b.row_norm_sq(j)).collect();
            let fro = frobenius_norm_sq(&exact_matmul(&a, &b).expect("model dimensions agree"));
            (cols, rows, fro)
        });
        let mut cols = vec![0.0; n];
        let mut rows = vec![0.0; n];
        let mut cross = 0.0;
        for (c, r, f) in &draws {
            for j in 0..n {
                cols[j] += c[j];
                rows[j] += r[j];
            }
            cross += f;
        }
        let count = samples as f64;
        let table = Self {
            col_a_moments: Some(cols.into_iter().map(|x| x / count).collect()),
            row_b_moments: Some(rows.into_iter().map(|x| x / count).collect()),
            cross_term: Some(cross / count),
            ..Default::default()
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, arr) in [
            ("inner moments", &self.inner_moments),
            ("column moments of A", &self.col_a_moments),
            ("row moments of B", &self.row_b_moments),
        ] {
            if let Some(values) = arr {
                if let Some(j) = values.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
                    return Err(Error::InvalidInput(format!(
                        "{name}: entry {} is {}; must be positive and finite",
                        j + 1,
                        values[j]
                    )));
                }
            }
        }
        if let (Some(c), Some(r)) = (&self.col_a_moments, &self.row_b_moments) {
            if c.len() != r.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} column moments vs {} row moments",
                    c.len(),
                    r.len()
                )));
            }
        }
        Ok(())
    }
}

/// `μ` and `ν` (or `μ̄`, `ν̄`) for a problem of length `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceConstants {
    pub mu: f64,
    pub nu: f64,
    pub n: usize,
}

impl VarianceConstants {
    /// `n·ν + μ`, the numerator of the uniform-sampling variance.
    pub fn uniform_numerator(&self) -> f64 {
        self.n as f64 * self.nu + self.mu
    }
}

pub fn inner_constants(moments: &MomentTable) -> Result<VarianceConstants> {
    moments.validate()?;
    let m = moments.inner_moments.as_deref().ok_or(Error::MissingMoments("inner_moments"))?;
    let cross = moments.cross_term.ok_or(Error::MissingMoments("cross_term"))?;
    Ok(constants_from_roots(m.iter().map(|x| x.sqrt()).collect(), cross))
}

pub fn matrix_constants(moments: &MomentTable) -> Result<VarianceConstants> {
    moments.validate()?;
    let cols = moments.col_a_moments.as_deref().ok_or(Error::MissingMoments("col_a_moments"))?;
    let rows = moments.row_b_moments.as_deref().ok_or(Error::MissingMoments("row_b_moments"))?;
    let cross = moments.cross_term.ok_or(Error::MissingMoments("cross_term"))?;
    Ok(constants_from_roots(cols.iter().zip(rows).map(|(c, r)| (c * r).sqrt()).collect(), cross))
}

fn constants_from_roots(roots: Vec<f64>, cross: f64) -> VarianceConstants {
    let n = roots.len();
    let total: f64 = roots.iter().sum();
    let mean = total / n as f64;
    let nu = roots.iter().map(|r| (r - mean) * (r - mean)).sum();
    // (Σ√m)² ≥ E[(aᵀb)²] holds exactly for true and empirical moments alike;
    // only rounding can push μ below zero.
    let mu = (total * total - cross).max(0.0);
    VarianceConstants { mu, nu, n }
}

/// `(n·ν + μ) / s`.
pub fn expected_variance_uniform(c: &VarianceConstants, sample_size: usize) -> Result<f64> {
    check_sample_size(sample_size)?;
    Ok(c.uniform_numerator() / sample_size as f64)
}

/// `μ / s`.
pub fn expected_variance_optimal(c: &VarianceConstants, sample_size: usize) -> Result<f64> {
    check_sample_size(sample_size)?;
    Ok(c.mu / sample_size as f64)
}

/// `(n·ν̄ + μ̄) / s`, the expected squared Frobenius error under `ξᵘ`.
pub fn expected_frobenius_error_uniform(c: &VarianceConstants, sample_size: usize) -> Result<f64> {
    expected_variance_uniform(c, sample_size)
}

/// `μ̄ / s`.
pub fn expected_frobenius_error_optimal(c: &VarianceConstants, sample_size: usize) -> Result<f64> {
    expected_variance_optimal(c, sample_size)
}

fn check_sample_size(s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumeratedMoments {
    pub mean: f64,
    pub variance: f64,
    pub outcomes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedMatrixMoments {
    pub mean: DenseMatrix,
    /// `E‖X − E[X]‖_F²`.
    pub expected_sq_deviation: f64,
    pub outcomes: u64,
}

fn outcome_count(n: usize, s: usize) -> Result<u64> {
    let total = (n as u128).checked_pow(s as u32).unwrap_or(u128::MAX);
    if total > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge { outcomes: total, limit: ENUMERATION_LIMIT });
    }
    Ok(total as u64)
}

/// Visits every ordered realization of size `s` with its probability.
fn for_each_realization(
    dist: &IndexDistribution,
    s: usize,
    mut visit: impl FnMut(&Realization, f64),
) -> Result<u64> {
    check_sample_size(s)?;
    let n = dist.len();
    let outcomes = outcome_count(n, s)?;
    let mut idx = vec![0usize; s];
    for _ in 0..outcomes {
        let weight = idx.iter().fold(1.0, |w, &j| w * dist.probs()[j]);
        visit(&Realization::from_zero_based(idx.clone(), n), weight);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
    Ok(outcomes)
}

/// Exact mean and variance of a scalar statistic of the realization.
pub fn enumerate_moments_with(
    dist: &IndexDistribution,
    sample_size: usize,
    mut statistic: impl FnMut(&Realization) -> f64,
) -> Result<EnumeratedMoments> {
    let mut values = Vec::new();
    let outcomes = for_each_realization(dist, sample_size, |r, w| values.push((statistic(r), w)))?;
    let mean = values.iter().fold(0.0, |acc, (x, w)| acc + w * x);
    let variance = values.iter().fold(0.0, |acc, (x, w)| acc + w * (x - mean) * (x - mean));
    Ok(EnumeratedMoments { mean, variance, outcomes })
}

/// Exact mean and expected squared Frobenius deviation of a matrix statistic.
pub fn enumerate_matrix_moments_with(
    dist: &IndexDistribution,
    sample_size: usize,
    mut statistic: impl FnMut(&Realization) -> DenseMatrix,
) -> Result<EnumeratedMatrixMoments> {
    let mut values = Vec::new();
    let outcomes = for_each_realization(dist, sample_size, |r, w| values.push((statistic(r), w)))?;
    let (rows, cols) = values[0].0.shape();
    let mut mean = vec![0.0; rows * cols];
    for (x, w) in &values {
        for (m, v) in mean.iter_mut().zip(x.as_slice()) {
            *m += w * v;
        }
    }
    let expected_sq_deviation = values.iter().fold(0.0, |acc, (x, w)| {
        acc + w * x.as_slice().iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>()
    });
    Ok(EnumeratedMatrixMoments {
        mean: DenseMatrix::new(rows, cols, mean)?,
        expected_sq_deviation,
        outcomes,
    })
}

/// Exact moments of the inner-product sketch over all `n^s` realizations.
pub fn enumerate_inner_moments(
    a: &DenseVector,
    b: &DenseVector,
    dist: &IndexDistribution,
    sample_size: usize,
) -> Result<EnumeratedMoments> {
    if a.len() != dist.len() || b.len() != dist.len() {
        return Err(Error::DimensionMismatch("vectors and distribution differ in length".into()));
    }
    enumerate_moments_with(dist, sample_size, |r| {
        sketch_inner(a, b, r, dist).expect("dimensions checked").value
    })
}

/// Exact moments of the matrix sketch over all `n^s` realizations.
pub fn enumerate_matmul_moments(
    a: &DenseMatrix,
    b: &DenseMatrix,
    dist: &IndexDistribution,
    sample_size: usize,
) -> Result<EnumeratedMatrixMoments> {
    if a.cols() != dist.len() || b.rows() != dist.len() {
        return Err(Error::DimensionMismatch("matrices and distribution differ in n".into()));
    }
    enumerate_matrix_moments_with(dist, sample_size, |r| {
        sketch_matmul(a, b, r, dist).expect("dimensions checked").value
    })
}

/// `f(M) = (M + 1)² / (M · ln(M)²)`, the dominant cost factor as a function
/// of the base.
pub fn complexity_curve(base: u64) -> Result<f64> {
    if base < 2 {
        return Err(Error::InvalidInput(format!("base must be at least 2, got {base}")));
    }
    let m = base as f64;
    let ln = m.ln();
    Ok((m + 1.0) * (m + 1.0) / m / (ln * ln))
}

/// Constants of the level conditions: bias `c₁`, level variance `c₂`,
/// level cost `c₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// `c₁ = C_f²(nν+μ)`, `c₂ = 2C_f²(M+1)(nν+μ) + 2V[P]`, `c₃ = md(1 + 1/M)`.
/// Pass `md = 1` for the inner-product case and the barred constants for
/// the matrix case.
pub fn theorem_constants(
    lipschitz: f64,
    constants: &VarianceConstants,
    base: u64,
    var_p: f64,
    md: u64,
) -> Result<TheoremConstants> {
    if base < 2 {
        return Err(Error::InvalidInput(format!("base must be at least 2, got {base}")));
    }
    if lipschitz < 0.0 || var_p < 0.0 || md == 0 {
        return Err(Error::InvalidInput("constants must be nonnegative and md ≥ 1".into()));
    }
    let m = base as f64;
    let k = constants.uniform_numerator();
    let cf2 = lipschitz * lipschitz;
    Ok(TheoremConstants {
        c1: cf2 * k,
        c2: 2.0 * cf2 * (m + 1.0) * k + 2.0 * var_p,
        c3: md as f64 * (1.0 + 1.0 / m),
    })
}

/// Complexity constants: `C(Ŷ) ≤ c₄ ε⁻² (ln ε)²`, `L + 1 ≤ c₅ ln ε⁻¹`,
/// `C(P̂) ≤ c₆ ε⁻⁴`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityConstants {
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
}

pub fn complexity_constants(c1: f64, c2: f64, c3: f64, base: u64) -> Result<ComplexityConstants> {
    if base < 2 {
        return Err(Error::InvalidInput(format!("base must be at least 2, got {base}")));
    }
    let m = base as f64;
    let c5 = (1.0 + (2.0 * c1 * c1).ln().max(0.0)) / m.ln() + 2.0;
    let c4 = 2.0 * c2 * c3 * c5 * c5 + 2.0 * c3 * c1 * c1 * m * m / (m - 1.0);
    let c6 = 2.0 * c1 * c1 * c3 * m * m * (2.0 * c2 + (-2.0f64).exp());
    Ok(ComplexityConstants { c4, c5, c6 })
}
