//! Diagonal quadratic programs over the probability simplex.
//!
//! Every weight-learning subproblem in this crate has the same shape:
//!
//! ```text
//!     minimize    sum_c q_c v_c^2 + sum_c c_c v_c
//!     subject to  sum_c v_c = 1,  v_c >= 0
//! ```
//!
//! with `q_c >= 0`. The Hessian is diagonal, so the active set can be handled
//! directly through the KKT conditions: at the optimum there is a multiplier
//! `lambda` with `2 q_c v_c + c_c >= lambda` for every coordinate and equality
//! wherever `v_c > 0`, which gives `v_c = max(0, (lambda - c_c) / (2 q_c))`.
//! The multiplier is located by bisection on the monotone water-filling
//! condition `sum_c v_c(lambda) = 1` and then tightened with the closed-form
//! value on the detected support.
//!
//! Coordinates with `q_c = 0` are the limit of the regularized problem as
//! `q_c -> 0+`: if the smallest linear cost among them does not exceed the
//! multiplier of the positive-curvature coordinates, the remaining mass
//! concentrates on the first such coordinate.

use serde::Serialize;

use crate::error::{Error, Result};

/// A point on the probability simplex: nonnegative entries summing to one
/// (within `1e-10`).
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexWeights {
    values: Vec<f64>,
}

impl SimplexWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("values", "must have at least one entry"));
        }
        let mut sum = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::domain(format!("weight {i} is not finite")));
            }
            if v < 0.0 {
                return Err(Error::domain(format!("weight {i} is negative ({v})")));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!(
                "weights sum to {sum}, expected 1 within 1e-10"
            )));
        }
        Ok(SimplexWeights { values })
    }

    /// The barycenter `(1/l, ..., 1/l)`.
    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::param("len", "must be at least 1"));
        }
        Self::new(vec![1.0 / len as f64; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A diagonal simplex QP instance: quadratic coefficients `q >= 0` and linear
/// coefficients `c` of any sign.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagQP {
    q: Vec<f64>,
    c: Vec<f64>,
}

impl DiagQP {
    pub fn new(q: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::param("q", "problem must have at least one coordinate"));
        }
        if q.len() != c.len() {
            return Err(Error::dim(format!(
                "q has {} coordinates but c has {}",
                q.len(),
                c.len()
            )));
        }
        for (i, &qc) in q.iter().enumerate() {
            if !qc.is_finite() || qc < 0.0 {
                return Err(Error::param("q", format!("coordinate {i} is {qc}, must be >= 0")));
            }
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("c", "coordinates must be finite"));
        }
        Ok(DiagQP { q, c })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Objective value at a point of matching length.
    pub fn objective(&self, v: &[f64]) -> f64 {
        self.q
            .iter()
            .zip(&self.c)
            .zip(v)
            .map(|((&q, &c), &x)| q * x * x + c * x)
            .sum()
    }
}

/// Exact minimizer of the diagonal QP on the simplex.
pub fn solve(problem: &DiagQP) -> Result<SimplexWeights> {
    let l = problem.len();
    if l == 1 {
        return SimplexWeights::new(vec![1.0]);
    }
    let q = problem.q();
    // Shift the linear costs so the smallest is zero; the argmin is invariant
    // and the water-filling arithmetic avoids large cancellations.
    let cmin = problem.c().iter().cloned().fold(f64::INFINITY, f64::min);
    let cs: Vec<f64> = problem.c().iter().map(|&v| v - cmin).collect();

    let positive: Vec<usize> = (0..l).filter(|&i| q[i] > 0.0).collect();
    let zero: Vec<usize> = (0..l).filter(|&i| q[i] == 0.0).collect();

    let mut v = vec![0.0; l];

    if positive.is_empty() {
        // Pure linear program: all mass on the first smallest cost.
        let j0 = zero
            .iter()
            .copied()
            .min_by(|&a, &b| cs[a].total_cmp(&cs[b]).then(a.cmp(&b)))
            .expect("zero set is nonempty when positive set is empty");
        v[j0] = 1.0;
        return SimplexWeights::new(v);
    }

    let lambda_star = water_fill(&positive, q, &cs);

    if !zero.is_empty() {
        let j0 = zero
            .iter()
            .copied()
            .min_by(|&a, &b| cs[a].total_cmp(&cs[b]).then(a.cmp(&b)))
            .expect("zero set checked nonempty");
        if cs[j0] <= lambda_star {
            // The free coordinate caps the multiplier at its own cost and
            // absorbs whatever mass the curved coordinates leave over.
            let mut taken = 0.0;
            for &i in &positive {
                let vi = ((cs[j0] - cs[i]) / (2.0 * q[i])).max(0.0);
                v[i] = vi;
                taken += vi;
            }
            v[j0] = (1.0 - taken).max(0.0);
            return SimplexWeights::new(v);
        }
    }

    for &i in &positive {
        v[i] = ((lambda_star - cs[i]) / (2.0 * q[i])).max(0.0);
    }
    SimplexWeights::new(v)
}

/// Locates `lambda` with `sum_i max(0, (lambda - cs_i) / (2 q_i)) = 1` over the
/// given coordinates, by bisection followed by a closed-form solve on the
/// detected support.
fn water_fill(idx: &[usize], q: &[f64], cs: &[f64]) -> f64 {
    let phi = |lambda: f64| -> f64 {
        idx.iter()
            .map(|&i| ((lambda - cs[i]) / (2.0 * q[i])).max(0.0))
            .sum()
    };
    let mut lo = idx.iter().map(|&i| cs[i]).fold(f64::INFINITY, f64::min);
    let mut hi = idx.iter().map(|&i| cs[i]).fold(f64::NEG_INFINITY, f64::max)
        + 2.0 * idx.iter().map(|&i| q[i]).fold(0.0, f64::max);
    debug_assert!(phi(hi) >= 1.0);
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rough = 0.5 * (lo + hi);
    // Closed-form multiplier on the support the bisection settled on.
    let mut inv_sum = 0.0;
    let mut cost_sum = 0.0;
    for &i in idx {
        if rough >= cs[i] {
            inv_sum += 1.0 / (2.0 * q[i]);
            cost_sum += cs[i] / (2.0 * q[i]);
        }
    }
    if inv_sum > 0.0 {
        (1.0 + cost_sum) / inv_sum
    } else {
        rough
    }
}

/// Exhaustive lattice search over the simplex, used as an independent test
/// oracle. Evaluates every point with coordinates `k/N`, `N = round(1/step)`.
pub fn grid_oracle(problem: &DiagQP, step: f64) -> Result<SimplexWeights> {
    let l = problem.len();
    if l > 4 {
        return Err(Error::param("l", "grid oracle is limited to l <= 4"));
    }
    if step <= 0.0 || step > 1.0 || step.is_nan() {
        return Err(Error::param("step", "must lie in (0, 1]"));
    }
    let n = (1.0 / step).round().max(1.0) as usize;
    let mut counts = vec![0usize; l];
    let mut best: Option<(f64, Vec<f64>)> = None;
    enumerate(problem, n, 0, n, &mut counts, &mut best);
    let (_, values) = best.expect("lattice always contains the vertices");
    SimplexWeights::new(values)
}

fn enumerate(
    problem: &DiagQP,
    n: usize,
    coord: usize,
    remaining: usize,
    counts: &mut [usize],
    best: &mut Option<(f64, Vec<f64>)>,
) {
    let l = counts.len();
    if coord == l - 1 {
        counts[coord] = remaining;
        let v: Vec<f64> = counts.iter().map(|&k| k as f64 / n as f64).collect();
        let obj = problem.objective(&v);
        let better = match best {
            Some((b, _)) => obj < *b,
            None => true,
        };
        if better {
            *best = Some((obj, v));
        }
        return;
    }
    for k in 0..=remaining {
        counts[coord] = k;
        enumerate(problem, n, coord + 1, remaining - k, counts, best);
    }
}

/// Complementary-slackness residual of a candidate solution.
///
/// With gradient `g_c = 2 q_c v_c + c_c` and `lambda = min_c g_c`, returns
/// `max_c v_c * (g_c - lambda)`; zero at an exact KKT point.
pub fn kkt_residual(problem: &DiagQP, v: &SimplexWeights) -> f64 {
    let grads: Vec<f64> = problem
        .q()
        .iter()
        .zip(problem.c())
        .zip(v.values())
        .map(|((&q, &c), &x)| 2.0 * q * x + c)
        .collect();
    let lambda = grads.iter().cloned().fold(f64::INFINITY, f64::min);
    grads
        .iter()
        .zip(v.values())
        .map(|(&g, &x)| x * (g - lambda))
        .fold(0.0, f64::max)
}
