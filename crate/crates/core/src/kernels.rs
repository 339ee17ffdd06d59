//! Gaussian kernels, median-heuristic bandwidths and Gram matrices.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this many points the median heuristic works on a seeded subsample.
pub const MEDIAN_SUBSAMPLE_LIMIT: usize = 20_000;
const MEDIAN_SUBSAMPLE_SEED: u64 = 0x6d65_6469_616e;

/// Anything that can be viewed as a coordinate vector.
pub trait Point {
    fn coords(&self) -> &[f64];
}

impl Point for f64 {
    fn coords(&self) -> &[f64] {
        std::slice::from_ref(self)
    }
}

impl Point for Vec<f64> {
    fn coords(&self) -> &[f64] {
        self
    }
}

impl Point for [f64] {
    fn coords(&self) -> &[f64] {
        self
    }
}

impl<const N: usize> Point for [f64; N] {
    fn coords(&self) -> &[f64] {
        self
    }
}

impl<T: Point + ?Sized> Point for &T {
    fn coords(&self) -> &[f64] {
        (**self).coords()
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k(x, y) = exp(-‖x − y‖² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    sigma2: f64,
}

impl GaussianKernel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel bandwidth sigma^2 must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    #[inline]
    pub fn from_sq_dist(&self, d2: f64) -> f64 {
        (-d2 / (2.0 * self.sigma2)).exp()
    }

    #[inline]
    pub fn eval<P: Point + ?Sized>(&self, a: &P, b: &P) -> f64 {
        self.from_sq_dist(squared_distance(a.coords(), b.coords()))
    }

    #[inline]
    pub fn eval_scalar(&self, a: f64, b: f64) -> f64 {
        self.from_sq_dist((a - b) * (a - b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    row_digest: u64,
    col_digest: u64,
}

impl GramMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    /// Hash of the bit patterns of the generating row points.
    pub fn row_digest(&self) -> u64 {
        self.row_digest
    }

    pub fn col_digest(&self) -> u64 {
        self.col_digest
    }
}

fn digest<P: Point>(points: &[P]) -> u64 {
    let mut h = DefaultHasher::new();
    for p in points {
        for v in p.coords() {
            v.to_bits().hash(&mut h);
        }
        u64::MAX.hash(&mut h);
    }
    h.finish()
}

fn common_dim<P: Point>(points: &[P]) -> Result<usize> {
    let d = points.first().map(|p| p.coords().len()).ok_or(Error::EmptyInput)?;
    for p in points {
        if p.coords().len() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: p.coords().len(),
            });
        }
    }
    Ok(d)
}

/// Cross-Gram matrix `entries[i][j] = k(rows[i], cols[j])`.
pub fn gram<P: Point>(kernel: &GaussianKernel, rows: &[P], cols: &[P]) -> Result<GramMatrix> {
    let dr = common_dim(rows)?;
    let dc = common_dim(cols)?;
    if dr != dc {
        return Err(Error::DimensionMismatch { left: dr, right: dc });
    }
    let entries = DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        kernel.eval(rows[i].coords(), cols[j].coords())
    });
    Ok(GramMatrix {
        entries,
        row_digest: digest(rows),
        col_digest: digest(cols),
    })
}

/// σ² = median{‖y_i − y_j‖² : i < j} / 2, the median of an even count being
/// the midpoint of the two central values.
pub fn median_heuristic<P: Point>(points: &[P]) -> Result<f64> {
    median_heuristic_seeded(points, MEDIAN_SUBSAMPLE_SEED)
}

/// As [`median_heuristic`], with an explicit seed for the subsample drawn
/// when there are more than [`MEDIAN_SUBSAMPLE_LIMIT`] points.
pub fn median_heuristic_seeded<P: Point>(points: &[P], seed: u64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::AllPointsIdentical);
    }
    common_dim(points)?;
    let chosen: Vec<&[f64]> = if points.len() > MEDIAN_SUBSAMPLE_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, points.len(), MEDIAN_SUBSAMPLE_LIMIT).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| points[i].coords()).collect()
    } else {
        points.iter().map(|p| p.coords()).collect()
    };
    let n = chosen.len();
    let mut d2 = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d2.push(squared_distance(chosen[i], chosen[j]));
        }
    }
    let med = median_in_place(&mut d2);
    if !(med > 0.0) {
        return Err(Error::AllPointsIdentical);
    }
    Ok(med / 2.0)
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (lower, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

/// `n_points` equally spaced values from the smallest to the largest time.
pub fn time_grid(sample_times: &[f64], n_points: usize) -> Result<Vec<f64>> {
    if sample_times.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_points < 2 {
        return Err(Error::InvalidParameter(
            "time grid needs at least 2 points".into(),
        ));
    }
    let lo = sample_times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample_times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    linspace(lo, hi, n_points)
}

pub fn linspace(lo: f64, hi: f64, n_points: usize) -> Result<Vec<f64>> {
    if !(hi > lo) {
        return Err(Error::DegenerateRange(lo));
    }
    let step = (hi - lo) / (n_points - 1) as f64;
    let mut grid: Vec<f64> = (0..n_points).map(|k| lo + step * k as f64).collect();
    grid[n_points - 1] = hi;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_heuristic_examples() {
        assert_eq!(median_heuristic(&[0.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median_heuristic(&[0.0, 1.0, 2.0]).unwrap(), 0.5);
        // four points: six distances {1,1,1,4,4,9} → midpoint of 1 and 4
        assert_eq!(median_heuristic(&[0.0, 1.0, 2.0, 3.0]).unwrap(), 2.5 / 2.0);
        let same = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(matches!(median_heuristic(&same), Err(Error::AllPointsIdentical)));
        assert!(matches!(median_heuristic(&[1.0]), Err(Error::AllPointsIdentical)));
    }

    #[test]
    fn median_heuristic_subsamples_large_inputs() {
        let pts: Vec<f64> = (0..MEDIAN_SUBSAMPLE_LIMIT + 10).map(|i| (i % 97) as f64).collect();
        let a = median_heuristic_seeded(&pts, 1).unwrap();
        let b = median_heuristic_seeded(&pts, 1).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn gram_examples() {
        let k = GaussianKernel::new(2.0).unwrap();
        let g = gram(&k, &[0.0], &[0.0, 2.0, 5.0]).unwrap();
        assert_eq!((g.nrows(), g.ncols()), (1, 3));
        assert_eq!(g.entries()[(0, 0)], 1.0);
        assert!((g.entries()[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
        let err = gram(&k, &[vec![0.0]], &[vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(GaussianKernel::new(0.0).is_err());
    }

    #[test]
    fn grid_examples() {
        assert_eq!(time_grid(&[3.0, 1.0, 5.0], 5).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(time_grid(&[4.0, 2.0, 3.0], 2).unwrap(), vec![2.0, 4.0]);
        assert!(matches!(time_grid(&[2.0, 2.0], 5), Err(Error::DegenerateRange(_))));
    }
}
