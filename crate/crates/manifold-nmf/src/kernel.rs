//! Candidate kernel functions, Gram matrix evaluation, and convex kernel
//! combinations.
//!
//! The bank is restricted to kernels that are entrywise nonnegative on
//! nonnegative data (linear, polynomial with nonnegative offset, Gaussian):
//! the multiplicative updates of the kernel solver split gradients using the
//! Gram entries directly, and kernel values double as graph affinities, so
//! they must stay `>= 0`. The feature map behind a kernel is never
//! materialized; all solver algebra goes through inner products.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::NonNegMatrix;
use crate::simplex::SimplexWeights;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, offset: f64 },
    Gaussian { bandwidth: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, offset } => {
                if degree < 1 {
                    return Err(Error::param("degree", "must be at least 1"));
                }
                if offset < 0.0 || !offset.is_finite() {
                    return Err(Error::param("offset", format!("must be >= 0, got {offset}")));
                }
                Ok(())
            }
            KernelSpec::Gaussian { bandwidth } => {
                if bandwidth <= 0.0 || !bandwidth.is_finite() {
                    return Err(Error::param(
                        "bandwidth",
                        format!("must be > 0, got {bandwidth}"),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            KernelSpec::Linear => "linear".to_string(),
            KernelSpec::Polynomial { degree, offset } => {
                format!("polynomial(degree={degree}, offset={offset})")
            }
            KernelSpec::Gaussian { bandwidth } => format!("gaussian(sigma={bandwidth})"),
        }
    }
}

/// Where a Gram matrix came from: a single kernel or a convex combination.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelProvenance {
    Single(KernelSpec),
    Combination {
        weights: Vec<f64>,
        components: Vec<KernelProvenance>,
    },
}

/// Symmetric, entrywise-nonnegative Gram matrix over `n` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    gram: Array2<f64>,
    provenance: KernelProvenance,
}

impl KernelMatrix {
    /// Wraps a raw Gram matrix. Rejects non-square, non-finite, entrywise
    /// negative, or asymmetric (beyond `1e-10`) input.
    pub fn from_gram(gram: Array2<f64>, provenance: KernelProvenance) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n || n == 0 {
            return Err(Error::dim(format!(
                "gram matrix is {}x{}, expected square and nonempty",
                n,
                gram.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = gram[[i, j]];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::param(
                        "gram",
                        format!("entry ({i}, {j}) is {v}, must be finite and >= 0"),
                    ));
                }
                if (v - gram[[j, i]]).abs() > 1e-10 {
                    return Err(Error::param(
                        "gram",
                        format!("asymmetric at ({i}, {j}): {v} vs {}", gram[[j, i]]),
                    ));
                }
            }
        }
        Ok(KernelMatrix { gram, provenance })
    }

    pub fn n(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    pub fn provenance(&self) -> &KernelProvenance {
        &self.provenance
    }

    /// Exports the Gram matrix; usable with [`crate::io::save_matrix`].
    pub fn to_matrix(&self) -> Result<NonNegMatrix> {
        NonNegMatrix::new(self.gram.clone())
    }
}

/// Evaluates the Gram matrix `K_ij = K(x_i, x_j)` over the columns of `x`.
pub fn gram(spec: &KernelSpec, x: &NonNegMatrix) -> Result<KernelMatrix> {
    spec.validate()?;
    let data = x.as_array();
    let n = data.ncols();
    let mut gram = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = match *spec {
                KernelSpec::Linear => data.column(i).dot(&data.column(j)),
                KernelSpec::Polynomial { degree, offset } => {
                    (data.column(i).dot(&data.column(j)) + offset).powi(degree as i32)
                }
                KernelSpec::Gaussian { bandwidth } => {
                    if i == j {
                        1.0
                    } else {
                        let mut s = 0.0;
                        for r in 0..data.nrows() {
                            let d = data[[r, i]] - data[[r, j]];
                            s += d * d;
                        }
                        (-s / (2.0 * bandwidth * bandwidth)).exp()
                    }
                }
            };
            gram[[i, j]] = v;
            gram[[j, i]] = v;
        }
    }
    KernelMatrix::from_gram(gram, KernelProvenance::Single(spec.clone()))
}

/// Convex combination `sum_k mu_k K^k` of Gram matrices over the same samples.
pub fn combine(kernels: &[KernelMatrix], mu: &SimplexWeights) -> Result<KernelMatrix> {
    if kernels.is_empty() {
        return Err(Error::param("kernels", "need at least one kernel"));
    }
    if mu.len() != kernels.len() {
        return Err(Error::dim(format!(
            "{} kernels but {} weights",
            kernels.len(),
            mu.len()
        )));
    }
    let n = kernels[0].n();
    if kernels.iter().any(|k| k.n() != n) {
        return Err(Error::dim("kernels cover different sample counts".to_string()));
    }
    let mut gram = Array2::zeros((n, n));
    for (k, &w) in kernels.iter().zip(mu.values()) {
        gram.scaled_add(w, k.gram());
    }
    let provenance = KernelProvenance::Combination {
        weights: mu.values().to_vec(),
        components: kernels.iter().map(|k| k.provenance().clone()).collect(),
    };
    KernelMatrix::from_gram(gram, provenance)
}
