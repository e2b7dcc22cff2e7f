//! Class-weighted, L2-regularized binary logistic regression.
//!
//! The objective is the weighted sum of per-example log losses plus
//! `lambda/2 * |w|^2` (the bias is not penalized). It is minimized by
//! full-batch gradient descent with Armijo backtracking from the zero
//! vector, so a fit is a pure function of its inputs.
//!
//! Each coordinate of the descent direction is divided by a fixed bound on
//! the matching Hessian diagonal (`lambda + sum c_i x_ij^2 / 4`, and
//! `sum c_i / 4` for the bias). Without it the bias and a strongly
//! penalized weight vector move on scales many orders of magnitude apart.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseVector;

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TrainError {
    #[error("train_fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("class {label} has {count} members; at least 2 are required")]
    ClassTooSmall { label: u8, count: usize },
    #[error("both classes must be present (positives {positives}, negatives {negatives})")]
    SingleClass { positives: usize, negatives: usize },
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("vector dimension {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature space {found} does not match the model's space {expected}")]
    FeatureSpaceMismatch { expected: String, found: String },
    #[error("lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("non-finite loss or gradient at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("loss increased to {loss} after exhausting backtracking at iteration {iteration}")]
    Divergence { iteration: usize, loss: f64 },
}

/// SplitMix64 (Steele, Lea and Flood): a 64-bit counter passed through a
/// fixed avalanche mix. Used for every seeded shuffle in the crate.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform value in `0..n` by widening multiplication.
    pub fn below(&mut self, n: usize) -> usize {
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 42,
        }
    }
}

/// Indices into the input, each list ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Training share of a class of size `n`: `floor(f*n)`, plus one when the
/// fractional part is at least one half.
pub fn class_train_count(n: usize, train_fraction: f64) -> usize {
    let exact = train_fraction * n as f64;
    let floor = libm::floor(exact);
    let extra = usize::from(exact - floor >= 0.5);
    (floor as usize + extra).min(n)
}

/// Stratified split. Each class is shuffled independently (negatives
/// first, then positives, from one seeded generator) and its first
/// `class_train_count` members go to training.
pub fn stratified_split(labels: &[bool], spec: &SplitSpec) -> Result<Split, TrainError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(TrainError::InvalidFraction(spec.train_fraction));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for class in [false, true] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(TrainError::ClassTooSmall {
                label: u8::from(class),
                count: members.len(),
            });
        }
        rng.shuffle(&mut members);
        let k = class_train_count(members.len(), spec.train_fraction);
        split.train.extend_from_slice(&members[..k]);
        split.test.extend_from_slice(&members[k..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Per-class loss multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w_pos: f64,
    pub w_neg: f64,
}

impl ClassWeights {
    pub fn uniform() -> ClassWeights {
        ClassWeights { w_pos: 1.0, w_neg: 1.0 }
    }

    pub fn of(&self, label: bool) -> f64 {
        if label {
            self.w_pos
        } else {
            self.w_neg
        }
    }
}

/// Balanced weights `N / (2 * n_c)`.
pub fn class_weights(labels: &[bool]) -> Result<ClassWeights, TrainError> {
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(TrainError::SingleClass { positives, negatives });
    }
    let n = labels.len() as f64;
    Ok(ClassWeights {
        w_pos: n / (2.0 * positives as f64),
        w_neg: n / (2.0 * negatives as f64),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Infinity norm of the gradient fell to `tol`.
    Converged,
    MaxIter,
    /// Backtracking could not find a decrease that floating point can
    /// resolve; the loss did not go up.
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub max_iter: usize,
    pub tol: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub final_loss: f64,
    pub stop: StopReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    /// Decision threshold: predict positive iff p >= threshold.
    pub threshold: f64,
    pub feature_space_id: String,
    pub training: Option<TrainingSummary>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

impl LogisticModel {
    pub fn zeros(dimension: usize, lambda: f64, feature_space_id: &str) -> LogisticModel {
        LogisticModel {
            weights: vec![0.0; dimension],
            bias: 0.0,
            lambda,
            threshold: DEFAULT_THRESHOLD,
            feature_space_id: feature_space_id.into(),
            training: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn check_space(&self, feature_space_id: &str) -> Result<(), TrainError> {
        if self.feature_space_id != feature_space_id {
            return Err(TrainError::FeatureSpaceMismatch {
                expected: self.feature_space_id.clone(),
                found: feature_space_id.into(),
            });
        }
        Ok(())
    }

    fn check_dim(&self, x: &SparseVector) -> Result<(), TrainError> {
        if x.dimension() != self.dimension() {
            return Err(TrainError::DimensionMismatch {
                expected: self.dimension(),
                found: x.dimension(),
            });
        }
        Ok(())
    }

    /// `sigmoid(w·x + b)` for a vector from the space `feature_space_id`.
    pub fn predict_proba(&self, feature_space_id: &str, x: &SparseVector) -> Result<f64, TrainError> {
        self.check_space(feature_space_id)?;
        self.check_dim(x)?;
        Ok(sigmoid(x.dot(&self.weights) + self.bias))
    }

    pub fn predict(&self, feature_space_id: &str, x: &SparseVector) -> Result<bool, TrainError> {
        Ok(self.predict_proba(feature_space_id, x)? >= self.threshold)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Gradient {
    pub fn inf_norm(&self) -> f64 {
        self.weights.iter().fold(self.bias.abs(), |m, g| m.max(g.abs()))
    }

}

fn diagonal_scale(dim: usize, lambda: f64, x: &[SparseVector], y: &[bool], cw: &ClassWeights) -> (Vec<f64>, f64) {
    let mut w = vec![lambda; dim];
    let mut b = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let c = 0.25 * cw.of(yi);
        for &(j, v) in xi.entries() {
            w[j] += c * v * v;
        }
        b += c;
    }
    (w, if b > 0.0 { b } else { 1.0 })
}

fn check_inputs(dim: usize, x: &[SparseVector], y: &[bool]) -> Result<(), TrainError> {
    if x.len() != y.len() {
        return Err(TrainError::LengthMismatch {
            features: x.len(),
            labels: y.len(),
        });
    }
    if let Some(bad) = x.iter().find(|v| v.dimension() != dim) {
        return Err(TrainError::DimensionMismatch {
            expected: dim,
            found: bad.dimension(),
        });
    }
    Ok(())
}

fn objective(
    weights: &[f64],
    bias: f64,
    lambda: f64,
    x: &[SparseVector],
    y: &[bool],
    cw: &ClassWeights,
    iteration: usize,
) -> Result<(f64, Gradient), TrainError> {
    let mut grad = Gradient {
        weights: weights.iter().map(|w| lambda * w).collect(),
        bias: 0.0,
    };
    let mut loss = 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>();
    for (xi, &yi) in x.iter().zip(y) {
        let z = xi.dot(weights) + bias;
        let c = cw.of(yi);
        loss += c * if yi { softplus(-z) } else { softplus(z) };
        let r = c * (sigmoid(z) - if yi { 1.0 } else { 0.0 });
        for &(j, v) in xi.entries() {
            grad.weights[j] += r * v;
        }
        grad.bias += r;
    }
    if !loss.is_finite() || !grad.bias.is_finite() || grad.weights.iter().any(|g| !g.is_finite()) {
        return Err(TrainError::NonFinite { iteration });
    }
    Ok((loss, grad))
}

/// Weighted log loss with L2 penalty and its exact gradient (bias included)
/// at the model's current parameters.
pub fn loss_and_grad(
    model: &LogisticModel,
    x: &[SparseVector],
    y: &[bool],
    cw: &ClassWeights,
) -> Result<(f64, Gradient), TrainError> {
    check_inputs(model.dimension(), x, y)?;
    objective(&model.weights, model.bias, model.lambda, x, y, cw, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: DEFAULT_LAMBDA,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub model: LogisticModel,
    /// Objective value at the start and after every accepted step.
    pub loss_trace: Vec<f64>,
}

/// Fits a model over vectors of dimension `dimension` from the space
/// `feature_space_id`.
pub fn train(
    dimension: usize,
    feature_space_id: &str,
    x: &[SparseVector],
    y: &[bool],
    cw: &ClassWeights,
    config: &TrainConfig,
) -> Result<Fit, TrainError> {
    if !(config.lambda > 0.0 && config.lambda.is_finite()) {
        return Err(TrainError::InvalidLambda(config.lambda));
    }
    check_inputs(dimension, x, y)?;
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Err(TrainError::SingleClass {
            positives,
            negatives: y.len() - positives,
        });
    }

    let (scale_w, scale_b) = diagonal_scale(dimension, config.lambda, x, y, cw);
    let mut model = LogisticModel::zeros(dimension, config.lambda, feature_space_id);
    let (mut loss, mut grad) = objective(&model.weights, model.bias, config.lambda, x, y, cw, 0)?;
    let mut trace = vec![loss];
    let mut step = 1.0;
    let mut iterations = 0;
    let stop = loop {
        if grad.inf_norm() <= config.tol {
            break StopReason::Converged;
        }
        if iterations == config.max_iter {
            break StopReason::MaxIter;
        }
        iterations += 1;
        let dir_w: Vec<f64> = grad.weights.iter().zip(&scale_w).map(|(g, d)| g / d).collect();
        let dir_b = grad.bias / scale_b;
        let slope = grad.weights.iter().zip(&dir_w).map(|(g, d)| g * d).sum::<f64>() + grad.bias * dir_b;
        let mut t = step;
        let mut accepted = None;
        let mut last_trial = loss;
        for _ in 0..MAX_HALVINGS {
            let w: Vec<f64> = model.weights.iter().zip(&dir_w).map(|(w, d)| w - t * d).collect();
            let b = model.bias - t * dir_b;
            if let Ok((l, g)) = objective(&w, b, config.lambda, x, y, cw, iterations) {
                if l <= loss - ARMIJO_C * t * slope {
                    accepted = Some((w, b, l, g));
                    break;
                }
                last_trial = l;
            }
            t *= 0.5;
        }
        match accepted {
            Some((w, b, l, g)) => {
                model.weights = w;
                model.bias = b;
                loss = l;
                grad = g;
                trace.push(loss);
                step = (t * 2.0).min(1.0);
            }
            None if last_trial > loss + 1e-12 * loss.abs().max(1.0) => {
                return Err(TrainError::Divergence {
                    iteration: iterations,
                    loss: last_trial,
                })
            }
            None => break StopReason::Stalled,
        }
    };
    model.training = Some(TrainingSummary {
        max_iter: config.max_iter,
        tol: config.tol,
        iterations,
        final_grad_norm: grad.inf_norm(),
        final_loss: loss,
        stop,
    });
    Ok(Fit {
        model,
        loss_trace: trace,
    })
}
