//! Index distributions over `[n]` and i.i.d. index realizations.
//!
//! Indices are 1-based wherever they cross the public API
//! ([`Realization::from_one_based`], [`Realization::one_based`],
//! [`IndexDistribution::prob`]); storage is 0-based.

use rand::Rng;

use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Uniform,
    /// Cumulative sums for inverse-CDF lookup.
    Weighted { cdf: Vec<f64> },
}

/// Strictly positive probability vector `ξ` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexDistribution {
    probs: Vec<f64>,
    kind: Kind,
}

impl IndexDistribution {
    /// Validates an explicit probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty probability vector".into()));
        }
        if let Some(j) = probs.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "probability at index {} is {}; all must be positive and finite",
                j + 1,
                probs[j]
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { probs, kind: Kind::Weighted { cdf } })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("uniform distribution over zero indices".into()));
        }
        Ok(Self { probs: vec![1.0 / n as f64; n], kind: Kind::Uniform })
    }

    /// `ξ*_j = √m_j / Σ_i √m_i` with `m_j = E[a_j² b_j²]`.
    pub fn optimal_inner(second_moments: &[f64]) -> Result<Self> {
        check_moments("second moment", second_moments)?;
        Self::proportional(second_moments.iter().map(|m| m.sqrt()).collect())
    }

    /// `ξ*_j ∝ √(E‖A[:,j]‖² · E‖B[j,:]‖²)`.
    pub fn optimal_matrix(col_a_moments: &[f64], row_b_moments: &[f64]) -> Result<Self> {
        if col_a_moments.len() != row_b_moments.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} column moments vs {} row moments",
                col_a_moments.len(),
                row_b_moments.len()
            )));
        }
        check_moments("column moment", col_a_moments)?;
        check_moments("row moment", row_b_moments)?;
        Self::proportional(
            col_a_moments
                .iter()
                .zip(row_b_moments)
                .map(|(ca, rb)| (ca * rb).sqrt())
                .collect(),
        )
    }

    fn proportional(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        if weights.iter().all(|w| *w == weights[0]) {
            return Self::uniform(weights.len());
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, Kind::Uniform)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `ξ_j` for a 1-based index.
    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index - 1]
    }

    /// `term / ξ_j` for a 0-based index. The uniform case multiplies by `n`,
    /// which is the same quantity without the rounding of `1/n`.
    #[inline]
    pub(crate) fn rescale(&self, j: usize, term: f64) -> f64 {
        match self.kind {
            Kind::Uniform => term * self.probs.len() as f64,
            Kind::Weighted { .. } => term / self.probs[j],
        }
    }

    /// One 0-based index.
    #[inline]
    pub(crate) fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.kind {
            Kind::Uniform => rng.random_range(0..self.probs.len()),
            Kind::Weighted { cdf } => {
                let u: f64 = rng.random();
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
            }
        }
    }
}

fn check_moments(what: &str, moments: &[f64]) -> Result<()> {
    if moments.is_empty() {
        return Err(Error::InvalidInput(format!("no {what}s given")));
    }
    match moments.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
        Some(j) => Err(Error::InvalidInput(format!(
            "{what} at index {} is {}; must be positive and finite",
            j + 1,
            moments[j]
        ))),
        None => Ok(()),
    }
}

/// Ordered i.i.d. index sample drawn with replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Realization {
    indices: Vec<usize>,
    n: usize,
}

impl Realization {
    pub fn from_one_based(indices: &[usize], n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("realization must hold at least one index".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > n) {
            return Err(Error::InvalidInput(format!("index {bad} outside [1, {n}]")));
        }
        Ok(Self { indices: indices.iter().map(|i| i - 1).collect(), n })
    }

    pub(crate) fn from_zero_based(indices: Vec<usize>, n: usize) -> Self {
        debug_assert!(indices.iter().all(|&i| i < n));
        Self { indices, n }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Size of the index set the realization was drawn from.
    pub fn domain(&self) -> usize {
        self.n
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    pub(crate) fn zero_based(&self) -> &[usize] {
        &self.indices
    }

    /// First `size` indices, order preserved. This is the coarse-level
    /// sample in a coupled level pair.
    pub fn prefix(&self, size: usize) -> Result<Realization> {
        if size > self.len() {
            return Err(Error::PrefixTooLong { requested: size, available: self.len() });
        }
        if size == 0 {
            return Err(Error::InvalidInput("prefix size must be at least 1".into()));
        }
        Ok(Self { indices: self.indices[..size].to_vec(), n: self.n })
    }
}

/// `size` i.i.d. draws from `dist`.
pub fn draw_realization<R: Rng + ?Sized>(
    dist: &IndexDistribution,
    size: usize,
    rng: &mut R,
) -> Result<Realization> {
    if size == 0 {
        return Err(Error::InvalidInput("realization size must be at least 1".into()));
    }
    let mut indices = Vec::with_capacity(size);
    fill_indices(dist, size, rng, &mut indices);
    Ok(Realization::from_zero_based(indices, dist.len()))
}

pub(crate) fn fill_indices<R: Rng + ?Sized>(
    dist: &IndexDistribution,
    size: usize,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    out.clear();
    out.extend((0..size).map(|_| dist.sample_index(rng)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};
    use proptest::prelude::*;

    fn assert_probs(d: &IndexDistribution, expected: &[f64]) {
        assert_eq!(d.len(), expected.len());
        for (p, e) in d.probs().iter().zip(expected) {
            assert!((p - e).abs() < 1e-15, "{p} vs {e}");
        }
    }

    #[test]
    fn uniform_examples() {
        assert_probs(&IndexDistribution::uniform(4).unwrap(), &[0.25; 4]);
        assert_probs(&IndexDistribution::uniform(1).unwrap(), &[1.0]);
        assert!(IndexDistribution::uniform(1000).unwrap().probs().iter().all(|&p| p == 0.001));
        assert!(IndexDistribution::uniform(0).is_err());
    }

    #[test]
    fn optimal_inner_examples() {
        assert_probs(&IndexDistribution::optimal_inner(&[9.0, 64.0]).unwrap(), &[3.0 / 11.0, 8.0 / 11.0]);
        assert!(IndexDistribution::optimal_inner(&[2.5; 3]).unwrap().is_uniform());
        assert_probs(&IndexDistribution::optimal_inner(&[1.0, 4.0, 4.0]).unwrap(), &[0.2, 0.4, 0.4]);
        assert!(IndexDistribution::optimal_inner(&[1.0, 0.0]).is_err());
        assert!(IndexDistribution::optimal_inner(&[1.0, f64::INFINITY]).is_err());
        assert!(IndexDistribution::optimal_inner(&[-1.0]).is_err());
    }

    #[test]
    fn optimal_matrix_examples() {
        assert_probs(&IndexDistribution::optimal_matrix(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), &[0.5, 0.5]);
        assert_probs(&IndexDistribution::optimal_matrix(&[4.0, 1.0], &[1.0, 4.0]).unwrap(), &[0.5, 0.5]);
        assert_probs(&IndexDistribution::optimal_matrix(&[1.0, 9.0], &[1.0, 1.0]).unwrap(), &[0.25, 0.75]);
        assert!(matches!(
            IndexDistribution::optimal_matrix(&[1.0], &[1.0, 1.0]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(IndexDistribution::optimal_matrix(&[1.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn explicit_distribution_validation() {
        assert!(IndexDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(IndexDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(IndexDistribution::new(vec![1.0, 0.0]).is_err());
        assert!(IndexDistribution::new(vec![]).is_err());
    }

    #[test]
    fn single_index_domain_is_forced() {
        let d = IndexDistribution::uniform(1).unwrap();
        let r = draw_realization(&d, 50, &mut substream(3, Purpose::Diagnostics, 0, 0)).unwrap();
        assert!(r.one_based().iter().all(|&i| i == 1));
    }

    #[test]
    fn uniform_binary_frequency_within_three_sigma() {
        let d = IndexDistribution::uniform(2).unwrap();
        let size = 100_000;
        let r = draw_realization(&d, size, &mut substream(11, Purpose::Diagnostics, 0, 0)).unwrap();
        let ones = r.one_based().iter().filter(|&&i| i == 1).count() as f64;
        let sigma = (0.25 / size as f64).sqrt();
        assert!((ones / size as f64 - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn draws_are_deterministic() {
        let d = IndexDistribution::new(vec![0.1, 0.2, 0.7]).unwrap();
        let a = draw_realization(&d, 64, &mut substream(5, Purpose::Diagnostics, 1, 2)).unwrap();
        let b = draw_realization(&d, 64, &mut substream(5, Purpose::Diagnostics, 1, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weighted_frequencies_within_five_sigma() {
        let draws = 1_000_000;
        for (case, probs) in [
            vec![1.0],
            vec![0.3, 0.7],
            vec![0.05, 0.15, 0.8],
            vec![0.1, 0.2, 0.3, 0.4],
            vec![0.02, 0.08, 0.3, 0.3, 0.3],
        ]
        .into_iter()
        .enumerate()
        {
            let d = IndexDistribution::new(probs.clone()).unwrap();
            let r = draw_realization(&d, draws, &mut substream(99, Purpose::Diagnostics, 0, case as u64)).unwrap();
            let mut counts = vec![0usize; probs.len()];
            for i in r.one_based() {
                counts[i - 1] += 1;
            }
            for (c, p) in counts.iter().zip(&probs) {
                let freq = *c as f64 / draws as f64;
                assert!((freq - p).abs() < 5.0 * (p / draws as f64).sqrt(), "case {case}: {freq} vs {p}");
            }
        }
    }

    #[test]
    fn prefix_examples() {
        let r = Realization::from_one_based(&[5, 2, 9, 9], 10).unwrap();
        assert_eq!(r.prefix(2).unwrap().one_based(), vec![5, 2]);
        assert_eq!(r.prefix(4).unwrap(), r);
        let r = Realization::from_one_based(&[7, 1, 3, 3, 8, 2, 4, 4, 6], 9).unwrap();
        assert_eq!(r.prefix(3).unwrap().one_based(), vec![7, 1, 3]);
        assert_eq!(r.prefix(10), Err(Error::PrefixTooLong { requested: 10, available: 9 }));
    }

    #[test]
    fn realization_rejects_out_of_range() {
        assert!(Realization::from_one_based(&[0], 3).is_err());
        assert!(Realization::from_one_based(&[4], 3).is_err());
        assert!(Realization::from_one_based(&[], 3).is_err());
    }

    proptest! {
        #[test]
        fn constructed_distributions_are_normalized(weights in prop::collection::vec(1e-3f64..1e3, 1..40)) {
            let d = IndexDistribution::optimal_inner(&weights).unwrap();
            let total: f64 = d.probs().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(d.probs().iter().all(|&p| p > 0.0));
        }

        #[test]
        fn nested_prefixes_compose(
            idx in prop::collection::vec(1usize..=20, 1..50),
            s1 in 1usize..50,
            s2 in 1usize..50,
        ) {
            let r = Realization::from_one_based(&idx, 20).unwrap();
            let (lo, hi) = (s1.min(s2).min(r.len()), s1.max(s2).min(r.len()));
            prop_assert_eq!(r.prefix(hi).unwrap().prefix(lo).unwrap(), r.prefix(lo).unwrap());
        }
    }
}
