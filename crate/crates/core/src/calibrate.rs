//! Decision-threshold calibration over a precision–recall sweep.
//!
//! The sweep is exact: thresholds are taken at 0, 1, every distinct score
//! and every midpoint between neighbouring distinct scores, which visits
//! every confusion matrix reachable under the rule "positive iff p >= τ".

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PRECISION_FLOOR: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CalibrationError {
    #[error("no scores to sweep")]
    Empty,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score at position {0} is not finite")]
    NonFinite(usize),
    #[error("precision floor must lie in [0, 1], got {0}")]
    InvalidFloor(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub tau: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ThresholdPoint {
    /// Metrics from counts; each ratio is 0 when its denominator is 0.
    ///
    /// F1 is computed as `2tp / (2tp + fp + fn)`, a single correctly
    /// rounded division, so equal F1 values compare equal bit for bit.
    pub fn from_counts(tau: f64, tp: usize, fp: usize, fn_: usize, tn: usize) -> ThresholdPoint {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        ThresholdPoint {
            tau,
            tp,
            fp,
            fn_,
            tn,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Candidate thresholds in ascending order.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut taus = Vec::with_capacity(2 * distinct.len() + 1);
    taus.push(0.0);
    taus.push(1.0);
    taus.extend_from_slice(&distinct);
    taus.extend(distinct.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    taus
}

/// One [`ThresholdPoint`] per candidate threshold, ascending in τ.
pub fn pr_sweep(scores: &[f64], gold: &[bool]) -> Result<Vec<ThresholdPoint>, CalibrationError> {
    if scores.len() != gold.len() {
        return Err(CalibrationError::LengthMismatch {
            scores: scores.len(),
            labels: gold.len(),
        });
    }
    if scores.is_empty() {
        return Err(CalibrationError::Empty);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(CalibrationError::NonFinite(i));
    }
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(gold.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    // positives_below[k]: gold positives among the k lowest scores
    let mut positives_below = Vec::with_capacity(pairs.len() + 1);
    positives_below.push(0usize);
    for (_, g) in &pairs {
        positives_below.push(positives_below.last().unwrap() + usize::from(*g));
    }
    let n = pairs.len();
    let positives = positives_below[n];

    Ok(candidate_thresholds(scores)
        .into_iter()
        .map(|tau| {
            let below = sorted.partition_point(|&s| s < tau);
            let fn_ = positives_below[below];
            let tp = positives - fn_;
            let fp = (n - below) - tp;
            let tn = below - fn_;
            ThresholdPoint::from_counts(tau, tp, fp, fn_, tn)
        })
        .collect())
}

/// The largest τ among the F1 maximizers.
pub fn select_tau_max_f1(points: &[ThresholdPoint]) -> Result<f64, CalibrationError> {
    let mut best: Option<&ThresholdPoint> = None;
    for p in points {
        best = match best {
            Some(b) if p.f1 < b.f1 || (p.f1 == b.f1 && p.tau < b.tau) => Some(b),
            _ => Some(p),
        };
    }
    best.map(|p| p.tau).ok_or(CalibrationError::Empty)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorSelection {
    pub tau: f64,
    pub floor_met: bool,
}

/// The smallest τ reaching `floor` precision with at least one true
/// positive. When no point qualifies, the τ of highest precision (largest
/// on ties) is returned with `floor_met = false`.
pub fn select_tau_precision_floor(points: &[ThresholdPoint], floor: f64) -> Result<FloorSelection, CalibrationError> {
    if !(0.0..=1.0).contains(&floor) {
        return Err(CalibrationError::InvalidFloor(floor));
    }
    if points.is_empty() {
        return Err(CalibrationError::Empty);
    }
    let qualifying = points
        .iter()
        .filter(|p| p.tp > 0 && p.precision >= floor)
        .min_by(|a, b| a.tau.total_cmp(&b.tau));
    if let Some(p) = qualifying {
        return Ok(FloorSelection {
            tau: p.tau,
            floor_met: true,
        });
    }
    let fallback = points
        .iter()
        .max_by(|a, b| a.precision.total_cmp(&b.precision).then(a.tau.total_cmp(&b.tau)))
        .unwrap();
    log::warn!("precision floor {floor} unmet; falling back to tau {}", fallback.tau);
    Ok(FloorSelection {
        tau: fallback.tau,
        floor_met: false,
    })
}
