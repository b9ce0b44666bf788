//! Soft-margin C-SVC over precomputed kernel matrices.
//!
//! The dual
//!
//! ```text
//! min_α ½ αᵀQα − eᵀα   s.t.  yᵀα = 0,  0 ≤ α_i ≤ C,   Q_ij = y_i y_j K_ij
//! ```
//!
//! is solved by SMO with maximal-violating-pair selection: `i` is the index
//! in the up-set with the largest `−y_i ∇_i`, `j` the index in the low-set
//! with the smallest. Written in terms of prediction errors this is the pair
//! with the largest `|E_i − E_j|`.

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::linalg::Matrix;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    /// Iteration budget in units of `n` pair updates.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-3,
            max_passes: 1000,
        }
    }
}

impl SvmParams {
    pub fn with_c(c: f64) -> Self {
        SvmParams {
            c,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvmModel {
    pub alphas: Vec<f64>,
    pub labels: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    /// Pair updates performed.
    pub iterations: usize,
    pub converged: bool,
}

impl BinarySvmModel {
    /// `f(x) = Σ α_i y_i K(x_i, x) + b`.
    pub fn decision_value(&self, k_row: &[f64]) -> Result<f64> {
        if k_row.len() != self.alphas.len() {
            return Err(Error::dim(
                "kernel row length",
                self.alphas.len(),
                k_row.len(),
            ));
        }
        Ok(self
            .alphas
            .iter()
            .zip(&self.labels)
            .zip(k_row)
            .map(|((a, y), k)| a * y * k)
            .sum::<f64>()
            + self.bias)
    }

    /// Dual objective `eᵀα − ½ αᵀQα` (to be maximized).
    pub fn dual_objective(&self, k: &KernelMatrix) -> f64 {
        dual_objective(k, &self.labels, &self.alphas)
    }
}

/// `eᵀα − ½ αᵀQα` for arbitrary `α`.
pub fn dual_objective(k: &KernelMatrix, y: &[f64], alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * k.get(i, j);
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Solves the C-SVC dual for labels `y ∈ {−1, +1}`.
pub fn solve_dual(k: &KernelMatrix, y: &[f64], params: &SvmParams) -> Result<BinarySvmModel> {
    let n = k.n();
    if y.len() != n {
        return Err(Error::dim("label count", n, y.len()));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument(
            "binary labels must be +1 or -1".into(),
        ));
    }
    if !(params.c > 0.0) || !params.c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "C must be positive, got {}",
            params.c
        )));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    let c = params.c;
    let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j);

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let budget = params.max_passes.saturating_mul(n.max(1));
    let mut iterations = 0;
    let mut converged = false;
    let mut warned_non_psd = false;

    while iterations < budget {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if up && v > g_max {
                g_max = v;
                i = t;
            }
            if low && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < params.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                if !warned_non_psd {
                    log::warn!("kernel matrix is not positive semidefinite; clamping curvature");
                    warned_non_psd = true;
                }
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                if !warned_non_psd {
                    log::warn!("kernel matrix is not positive semidefinite; clamping curvature");
                    warned_non_psd = true;
                }
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }
    if !converged {
        log::warn!(
            "SMO stopped after {iterations} updates without reaching tol {}",
            params.tol
        );
    }

    // b = −ρ, with ρ the mean of y_i ∇_i over free vectors, or the midpoint
    // of the feasible interval when none are free.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };

    Ok(BinarySvmModel {
        alphas: alpha,
        labels: y.to_vec(),
        bias: -rho,
        c,
        iterations,
        converged,
    })
}

/// One binary model per class, in ascending class order.
#[derive(Debug, Clone, PartialEq)]
pub struct OvrModel {
    pub models: Vec<(usize, BinarySvmModel)>,
}

impl OvrModel {
    pub fn classes(&self) -> Vec<usize> {
        self.models.iter().map(|(c, _)| *c).collect()
    }

    /// Per-class decision values for one kernel row.
    pub fn decision_values(&self, k_row: &[f64]) -> Result<Vec<f64>> {
        self.models
            .iter()
            .map(|(_, m)| m.decision_value(k_row))
            .collect()
    }

    /// Predicted class per row of the test×train block. Ties go to the
    /// smallest class id.
    pub fn predict(&self, k_cross: &Matrix) -> Result<Vec<usize>> {
        let n_train = self.models.first().map_or(0, |(_, m)| m.alphas.len());
        if k_cross.cols() != n_train {
            return Err(Error::dim("cross kernel columns", n_train, k_cross.cols()));
        }
        (0..k_cross.rows())
            .map(|r| {
                let scores = self.decision_values(k_cross.row(r))?;
                let mut best = 0;
                for (idx, s) in scores.iter().enumerate() {
                    if *s > scores[best] {
                        best = idx;
                    }
                }
                Ok(self.models[best].0)
            })
            .collect()
    }
}

/// One-vs-rest training: class `c` against all others, for every class
/// present in `labels`.
pub fn fit_ovr(k: &KernelMatrix, labels: &[usize], params: &SvmParams) -> Result<OvrModel> {
    if labels.len() != k.n() {
        return Err(Error::dim("label count", k.n(), labels.len()));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let models = std::thread::scope(|scope| {
        let handles: Vec<_> = classes
            .iter()
            .map(|&cls| {
                scope.spawn(move || {
                    let y: Vec<f64> = labels
                        .iter()
                        .map(|&l| if l == cls { 1.0 } else { -1.0 })
                        .collect();
                    solve_dual(k, &y, params).map(|m| (cls, m))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("SVM worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(OvrModel { models })
}

pub fn predict(model: &OvrModel, k_cross: &Matrix) -> Result<Vec<usize>> {
    model.predict(k_cross)
}

/// Fraction of exact matches.
pub fn accuracy<L: PartialEq>(predicted: &[L], actual: &[L]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::dim(
            "prediction count",
            actual.len(),
            predicted.len(),
        ));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument(
            "accuracy of empty prediction set".into(),
        ));
    }
    let hits = predicted.iter().zip(actual).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}
