//! C-SVM on a precomputed kernel, solved in the dual by sequential minimal
//! optimization with second-order working-set selection.

use crate::error::{Error, Result};
use crate::gram::GramMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct SvmConfig<T> {
    /// Box constraint.
    pub c: T,
    /// Maximal KKT violation accepted at termination.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> SvmConfig<T> {
    pub fn new(c: T) -> Self {
        SvmConfig {
            c,
            tolerance: T::of(1e-3),
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel<T> {
    /// Dual coefficients, one per training point.
    pub alphas: Vec<T>,
    pub labels: Vec<i8>,
    pub bias: T,
    /// Positions (into the training set) with a non-zero coefficient.
    pub support: Vec<usize>,
    pub c: T,
    pub iterations: usize,
}

impl<T: Scalar> SvmModel<T> {
    /// Dual objective `1/2 a'Qa - sum(a)` (minimized by the solver).
    pub fn objective(&self, kernel: impl Fn(usize, usize) -> T) -> T {
        let n = self.alphas.len();
        let mut quad = T::zero();
        for i in 0..n {
            for j in 0..n {
                let yij = T::of(f64::from(self.labels[i] * self.labels[j]));
                quad += self.alphas[i] * self.alphas[j] * yij * kernel(i, j);
            }
        }
        T::of(0.5) * quad - self.alphas.iter().copied().sum::<T>()
    }

    pub fn decision(&self, row: &[T]) -> T {
        self.support
            .iter()
            .map(|&s| self.alphas[s] * T::of(f64::from(self.labels[s])) * row[s])
            .sum::<T>()
            + self.bias
    }
}

/// Trains on the sub-block of `gram` indexed by `train`; `labels[k]` is the
/// class of `train[k]`.
pub fn svm_train<T: Scalar>(
    gram: &GramMatrix<T>,
    train: &[usize],
    labels: &[i8],
    config: &SvmConfig<T>,
) -> Result<SvmModel<T>> {
    if train.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} training indices but {} labels",
            train.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = train.iter().find(|&&i| i >= gram.n()) {
        return Err(Error::Shape(format!("training index {bad} outside the Gram matrix")));
    }
    let n = train.len();
    let mut block = Vec::with_capacity(n * n);
    for &i in train {
        let row = gram.row(i);
        block.extend(train.iter().map(|&j| row[j]));
    }
    train_dense(&block, labels, config)
}

/// Trains on a dense row-major kernel block of size `labels.len()` squared.
pub fn train_dense<T: Scalar>(kernel: &[T], labels: &[i8], config: &SvmConfig<T>) -> Result<SvmModel<T>> {
    let n = labels.len();
    if kernel.len() != n * n {
        return Err(Error::Shape(format!("kernel block has {} entries for {n} points", kernel.len())));
    }
    if !(config.c > T::zero()) {
        return Err(Error::InvalidParameter(format!("C must be > 0, got {}", config.c)));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::InvalidParameter(format!("label {bad} is not -1 or +1")));
    }
    match labels.first() {
        None => return Err(Error::InvalidParameter("empty training set".into())),
        Some(&first) if labels.iter().all(|&y| y == first) => return Err(Error::SingleClass(first)),
        _ => {}
    }

    let c = config.c;
    let tau = T::of(1e-12);
    let y: Vec<T> = labels.iter().map(|&l| T::of(f64::from(l))).collect();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let q = |i: usize, j: usize| y[i] * y[j] * k(i, j);
    let mut alpha = vec![T::zero(); n];
    // gradient of 1/2 a'Qa - e'a at a = 0
    let mut grad = vec![-T::one(); n];

    let in_up = |a: T, yi: T| (yi > T::zero() && a < c) || (yi < T::zero() && a > T::zero());
    let in_low = |a: T, yi: T| (yi > T::zero() && a > T::zero()) || (yi < T::zero() && a < c);

    let mut iterations = 0;
    loop {
        // i maximizes -y G over I_up
        let mut g_max = T::neg_infinity();
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v >= g_max {
                    g_max = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut g_min = T::infinity();
        let mut j_sel = None;
        let mut best_gain = T::infinity();
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                g_min = g_min.min(v);
                let b = g_max - v;
                if b > T::zero() {
                    let mut a = k(i, i) + k(t, t) - T::of(2.0) * k(i, t);
                    if a <= T::zero() {
                        a = tau;
                    }
                    let gain = -(b * b) / a;
                    if gain <= best_gain {
                        best_gain = gain;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let violation = g_max - g_min;
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            break;
        };
        if violation < config.tolerance {
            break;
        }
        if iterations >= config.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                violation: violation.to_f64_lossy(),
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + T::of(2.0) * q(i, j);
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > T::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - T::of(2.0) * q(i, j);
            if quad <= T::zero() {
                quad = tau;
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
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // offset from free vectors, or the middle of the feasible interval
    let (mut upper, mut lower) = (T::infinity(), T::neg_infinity());
    let (mut free_sum, mut free) = (T::zero(), 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < T::zero() {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= T::zero() {
            if y[t] > T::zero() {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / T::of_u64(free as u64)
    } else {
        (upper + lower) / T::of(2.0)
    };
    let support = (0..n).filter(|&t| alpha[t] > T::zero()).collect();
    Ok(SvmModel {
        alphas: alpha,
        labels: labels.to_vec(),
        bias: -rho,
        support,
        c,
        iterations,
    })
}

/// Predicts from kernel rows between test points and the training points.
/// A decision value of exactly zero maps to `+1`.
pub fn svm_predict<T: Scalar>(model: &SvmModel<T>, rows: &[Vec<T>]) -> Result<Vec<i8>> {
    rows.iter()
        .map(|row| {
            if row.len() != model.alphas.len() {
                return Err(Error::Shape(format!(
                    "kernel row has {} columns, model has {} training points",
                    row.len(),
                    model.alphas.len()
                )));
            }
            Ok(if model.decision(row) < T::zero() { -1 } else { 1 })
        })
        .collect()
}

/// Predicts Gram rows `test` against the model's training indices `train`.
pub fn predict_indices<T: Scalar>(
    model: &SvmModel<T>,
    gram: &GramMatrix<T>,
    train: &[usize],
    test: &[usize],
) -> Result<Vec<i8>> {
    let rows: Vec<Vec<T>> = test
        .iter()
        .map(|&i| train.iter().map(|&j| gram.get(i, j)).collect())
        .collect();
    svm_predict(model, &rows)
}
