//! Deterministic synthetic benchmark data.
//!
//! Four families, all entrywise nonnegative and reproducible from a seed:
//!
//! * `low_rank`: an exact product of uniform `(0, 1]` factors.
//! * `two_clusters`: two Gaussian blobs, shifted to be nonnegative.
//! * `noisy_features`: two clusters in the leading feature rows plus pure
//!   uniform-noise rows appended below them.
//! * `two_rings`: two concentric circles in the plane, offset into the
//!   positive quadrant (nonlinear structure for the kernel solver).

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::NonNegMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    LowRank,
    TwoClusters,
    NoisyFeatures,
    TwoRings,
}

/// Canonical desk-scale instance of each family.
pub fn generate(kind: SyntheticKind, seed: u64) -> Result<NonNegMatrix> {
    match kind {
        SyntheticKind::LowRank => low_rank(20, 30, 2, seed),
        SyntheticKind::TwoClusters => two_clusters(5, 40, seed),
        SyntheticKind::NoisyFeatures => noisy_features(5, 5, 40, seed),
        SyntheticKind::TwoRings => two_rings(30, seed),
    }
}

fn shift_nonnegative(mut data: Array2<f64>) -> Array2<f64> {
    let min = data.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        data.mapv_inplace(|v| v - min);
    }
    data
}

/// Exact rank-`rank` product `H0 W0` with uniform `(0, 1]` factors.
pub fn low_rank(d: usize, n: usize, rank: usize, seed: u64) -> Result<NonNegMatrix> {
    if d == 0 || n == 0 || rank == 0 {
        return Err(Error::param("shape", "d, n, and rank must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
        Array2::from_shape_vec(
            (rows, cols),
            (0..rows * cols).map(|_| 1.0 - rng.gen::<f64>()).collect(),
        )
        .expect("shape matches draw count")
    };
    let h = draw(d, rank, &mut rng);
    let w = draw(rank, n, &mut rng);
    NonNegMatrix::new(h.dot(&w))
}

/// Two Gaussian blobs of `n` samples total (split as evenly as possible),
/// shifted so every entry is nonnegative.
pub fn two_clusters(d: usize, n: usize, seed: u64) -> Result<NonNegMatrix> {
    if d == 0 || n < 2 {
        return Err(Error::param("shape", "need d >= 1 and n >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center_a: Vec<f64> = (0..d).map(|_| 1.0 + rng.gen::<f64>()).collect();
    let center_b: Vec<f64> = (0..d).map(|_| 3.0 + rng.gen::<f64>()).collect();
    let noise = Normal::new(0.0, 0.3).expect("fixed, valid std");
    let half = n / 2;
    let mut data = Array2::zeros((d, n));
    for j in 0..n {
        let center = if j < half { &center_a } else { &center_b };
        for i in 0..d {
            data[[i, j]] = center[i] + noise.sample(&mut rng);
        }
    }
    NonNegMatrix::new(shift_nonnegative(data))
}

/// `informative` cluster-structured feature rows stacked on top of `noisy`
/// rows of uniform noise spanning a comparable range.
pub fn noisy_features(
    informative: usize,
    noisy: usize,
    n: usize,
    seed: u64,
) -> Result<NonNegMatrix> {
    if informative == 0 {
        return Err(Error::param("informative", "need at least one informative row"));
    }
    let clusters = two_clusters(informative, n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e3779b97f4a7c15));
    let mut data = Array2::zeros((informative + noisy, n));
    for i in 0..informative {
        for j in 0..n {
            data[[i, j]] = clusters.get(i, j);
        }
    }
    for i in informative..informative + noisy {
        for j in 0..n {
            data[[i, j]] = 4.0 * rng.gen::<f64>();
        }
    }
    NonNegMatrix::new(data)
}

/// Two concentric circles (radii 1 and 3) around `(4, 4)` with slight radial
/// jitter; `n` samples split as evenly as possible, `d = 2`.
pub fn two_rings(n: usize, seed: u64) -> Result<NonNegMatrix> {
    if n < 2 {
        return Err(Error::param("n", "need at least 2 samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 0.05).expect("fixed, valid std");
    let half = n / 2;
    let mut data = Array2::zeros((2, n));
    for j in 0..n {
        let radius = if j < half { 1.0 } else { 3.0 };
        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
        let r = radius + jitter.sample(&mut rng);
        data[[0, j]] = 4.0 + r * theta.cos();
        data[[1, j]] = 4.0 + r * theta.sin();
    }
    NonNegMatrix::new(shift_nonnegative(data))
}
