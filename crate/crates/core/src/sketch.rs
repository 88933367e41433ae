//! Sampling-and-rescaling sketches of `aᵀb` and `AB`.
//!
//! The `n × s` operator `S` is never stored: a sketch gathers the sampled
//! coordinates (or column/row pairs), divides each term by its sampling
//! probability and averages. Cost is `O(s)` for inner products and
//! `O(s·m·d)` for matrix products.

use crate::sampling::{IndexDistribution, Realization};
use crate::tensor::{DenseMatrix, DenseVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SketchResult<'d, T> {
    pub value: T,
    pub sample_size: usize,
    pub distribution: &'d IndexDistribution,
}

/// `(1/s) Σᵢ a_{rᵢ} b_{rᵢ} / ξ_{rᵢ}`.
pub fn sketch_inner<'d>(
    a: &DenseVector,
    b: &DenseVector,
    r: &Realization,
    dist: &'d IndexDistribution,
) -> Result<SketchResult<'d, f64>> {
    check_inner_dims(a.len(), b.len(), r, dist)?;
    let (value, _) = inner_coupled(a.as_slice(), b.as_slice(), r.zero_based(), dist, None);
    Ok(SketchResult { value, sample_size: r.len(), distribution: dist })
}

/// `(1/s) Σᵢ A[:, rᵢ] B[rᵢ, :] / ξ_{rᵢ}`.
pub fn sketch_matmul<'d>(
    a: &DenseMatrix,
    b: &DenseMatrix,
    r: &Realization,
    dist: &'d IndexDistribution,
) -> Result<SketchResult<'d, DenseMatrix>> {
    check_matmul_dims(a, b, r, dist)?;
    let (value, _) = matmul_coupled(a, b, r.zero_based(), dist, None);
    Ok(SketchResult { value, sample_size: r.len(), distribution: dist })
}

fn check_inner_dims(a: usize, b: usize, r: &Realization, dist: &IndexDistribution) -> Result<()> {
    if a != b || a != dist.len() || r.domain() != a {
        return Err(Error::DimensionMismatch(format!(
            "inner sketch with |a|={a}, |b|={b}, |ξ|={}, realization over [{}]",
            dist.len(),
            r.domain()
        )));
    }
    Ok(())
}

fn check_matmul_dims(
    a: &DenseMatrix,
    b: &DenseMatrix,
    r: &Realization,
    dist: &IndexDistribution,
) -> Result<()> {
    let n = a.cols();
    if b.rows() != n || dist.len() != n || r.domain() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix sketch of {:?} by {:?} with |ξ|={}, realization over [{}]",
            a.shape(),
            b.shape(),
            dist.len(),
            r.domain()
        )));
    }
    Ok(())
}

/// Fine sketch over all of `idx` and, if `coarse_len` is given, the coarse
/// sketch over its prefix, from a single pass. Both are computed with the
/// same summation order as [`sketch_inner`] so they agree bit for bit.
#[inline]
pub(crate) fn inner_coupled(
    a: &[f64],
    b: &[f64],
    idx: &[usize],
    dist: &IndexDistribution,
    coarse_len: Option<usize>,
) -> (f64, Option<f64>) {
    let mut acc = 0.0;
    let mut coarse = None;
    for (i, &j) in idx.iter().enumerate() {
        acc += dist.rescale(j, a[j] * b[j]);
        if coarse_len == Some(i + 1) {
            coarse = Some(acc / (i + 1) as f64);
        }
    }
    (acc / idx.len() as f64, coarse)
}

pub(crate) fn matmul_coupled(
    a: &DenseMatrix,
    b: &DenseMatrix,
    idx: &[usize],
    dist: &IndexDistribution,
    coarse_len: Option<usize>,
) -> (DenseMatrix, Option<DenseMatrix>) {
    let (m, n, d) = (a.rows(), a.cols(), b.cols());
    let a_raw = a.as_slice();
    let mut acc = vec![0.0; m * d];
    let mut coarse = None;
    for (s, &j) in idx.iter().enumerate() {
        let b_row = b.row(j);
        for i in 0..m {
            let aij = a_raw[i * n + j];
            for (o, &bjk) in acc[i * d..(i + 1) * d].iter_mut().zip(b_row) {
                *o += dist.rescale(j, aij * bjk);
            }
        }
        if coarse_len == Some(s + 1) {
            let len = (s + 1) as f64;
            coarse = Some(DenseMatrix::from_raw(m, d, acc.iter().map(|x| x / len).collect()));
        }
    }
    let len = idx.len() as f64;
    for x in acc.iter_mut() {
        *x /= len;
    }
    (DenseMatrix::from_raw(m, d, acc), coarse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};
    use crate::sampling::draw_realization;
    use crate::tensor::{exact_inner, exact_matmul};
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    fn real(idx: &[usize], n: usize) -> Realization {
        Realization::from_one_based(idx, n).unwrap()
    }

    #[test]
    fn constant_vectors_give_zero_variance() {
        let u = IndexDistribution::uniform(4).unwrap();
        let ones = v(&[1.0; 4]);
        for idx in [&[1][..], &[4, 4, 2], &[3, 1, 2, 4, 4, 1]] {
            assert_eq!(sketch_inner(&ones, &ones, &real(idx, 4), &u).unwrap().value, 4.0);
        }
    }

    #[test]
    fn hand_evaluated_uniform_sketch() {
        let u = IndexDistribution::uniform(2).unwrap();
        let s = sketch_inner(&v(&[1.0, 2.0]), &v(&[3.0, 4.0]), &real(&[2, 2, 1], 2), &u).unwrap();
        assert!((s.value - 38.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.sample_size, 3);
    }

    #[test]
    fn optimal_distribution_is_exact_for_same_sign_products() {
        let a = v(&[1.0, 2.0]);
        let b = v(&[3.0, 4.0]);
        let opt = IndexDistribution::optimal_inner(&[9.0, 64.0]).unwrap();
        let mut rng = substream(1, Purpose::Diagnostics, 0, 0);
        for size in 1..20 {
            let r = draw_realization(&opt, size, &mut rng).unwrap();
            let s = sketch_inner(&a, &b, &r, &opt).unwrap();
            assert!((s.value - 11.0).abs() < 1e-12, "{}", s.value);
        }
    }

    #[test]
    fn matmul_examples() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]).unwrap();
        let u = IndexDistribution::uniform(2).unwrap();
        let s = sketch_matmul(&a, &b, &real(&[1], 2), &u).unwrap();
        assert_eq!(s.value, DenseMatrix::from_rows(&[&[10.0, 12.0], &[30.0, 36.0]]).unwrap());

        let i2 = DenseMatrix::identity(2).unwrap();
        let s = sketch_matmul(&i2, &i2, &real(&[1, 2], 2), &u).unwrap();
        assert_eq!(s.value, i2);
    }

    #[test]
    fn single_index_domain_is_exact() {
        let a = DenseMatrix::from_rows(&[&[2.0], &[-1.0], &[0.5]]).unwrap();
        let b = DenseMatrix::from_rows(&[&[3.0, 4.0]]).unwrap();
        let u = IndexDistribution::uniform(1).unwrap();
        let s = sketch_matmul(&a, &b, &real(&[1, 1, 1], 1), &u).unwrap();
        assert_eq!(s.value, exact_matmul(&a, &b).unwrap());
    }

    #[test]
    fn dimension_errors() {
        let u = IndexDistribution::uniform(3).unwrap();
        let r = real(&[1], 3);
        assert!(sketch_inner(&v(&[1.0, 2.0]), &v(&[1.0, 2.0]), &r, &u).is_err());
        let a = DenseMatrix::zeros(2, 3).unwrap();
        let b = DenseMatrix::zeros(2, 2).unwrap();
        assert!(sketch_matmul(&a, &b, &r, &u).is_err());
    }

    #[test]
    fn coupled_kernel_matches_separate_sketches() {
        let a = v(&[0.3, -1.2, 2.5, 4.0, -0.7]);
        let b = v(&[1.1, 0.4, -3.0, 0.25, 2.0]);
        let u = IndexDistribution::uniform(5).unwrap();
        let r = draw_realization(&u, 49, &mut substream(2, Purpose::Diagnostics, 0, 0)).unwrap();
        let (fine, coarse) = inner_coupled(a.as_slice(), b.as_slice(), r.zero_based(), &u, Some(7));
        assert_eq!(fine, sketch_inner(&a, &b, &r, &u).unwrap().value);
        assert_eq!(coarse.unwrap(), sketch_inner(&a, &b, &r.prefix(7).unwrap(), &u).unwrap().value);
    }

    proptest! {
        #[test]
        fn matmul_of_vectors_matches_inner(
            pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8),
            raw_idx in prop::collection::vec(0usize..1000, 1..12),
        ) {
            let n = pairs.len();
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let idx: Vec<usize> = raw_idx.iter().map(|i| i % n + 1).collect();
            let r = real(&idx, n);
            let weights: Vec<f64> = (1..=n).map(|j| j as f64).collect();
            for dist in [IndexDistribution::uniform(n).unwrap(), IndexDistribution::optimal_inner(&weights).unwrap()] {
                let inner = sketch_inner(&v(&a), &v(&b), &r, &dist).unwrap().value;
                let row = DenseMatrix::new(1, n, a.clone()).unwrap();
                let col = DenseMatrix::new(n, 1, b.clone()).unwrap();
                let mat = sketch_matmul(&row, &col, &r, &dist).unwrap().value;
                prop_assert_eq!(mat.get(0, 0), inner);
            }
        }

        #[test]
        fn full_permutation_sample_with_uniform_is_exact_scaled(
            pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8),
        ) {
            // Sampling every index exactly once under ξᵘ recovers aᵀb.
            let n = pairs.len();
            let a = v(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let b = v(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let idx: Vec<usize> = (1..=n).collect();
            let u = IndexDistribution::uniform(n).unwrap();
            let s = sketch_inner(&a, &b, &real(&idx, n), &u).unwrap();
            let exact = exact_inner(&a, &b).unwrap();
            prop_assert!((s.value - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
        }
    }
}
