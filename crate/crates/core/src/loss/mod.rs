//! Training losses as pure functions returning values and analytic gradients
//! with respect to the predictions, plus their current/future composition.
//!
//! All per-pixel losses use mean reduction. Probabilities entering any BCE
//! variant are clamped to `[PROB_EPS, 1 - PROB_EPS]`; the clamp has zero
//! derivative outside that band.

mod pixel;
mod pose;
mod total;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::NUM_CLASSES;

pub use pixel::{binary_ce, confidence_target, point_loss, seg_loss, BinaryTarget};
pub use pose::{huber, huber_grad, pose_loss, PairSet, PoseGradient, PoseLoss};
pub use total::{total_loss, LossReport, LossTerm, LossTerms, TermBreakdown};

pub const PROB_EPS: f64 = 1e-7;

/// Weights for composing the current and future loss sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_seg: f64,
    pub lambda_pose: f64,
    pub lambda_point: f64,
    pub lambda_motion: f64,
    pub lambda_conf: f64,
    /// Weight of the translation term inside the pose loss.
    pub lambda_trans: f64,
    pub lambda_future: f64,
    /// Extra multiplier on every future-frame term; must exceed 1.
    pub omega: f64,
    /// Scale of the L1 point loss.
    pub alpha: f64,
    pub huber_delta: f64,
    /// Point error (normalized units) below which a pixel is high-confidence.
    pub conf_threshold: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_seg: 1.0,
            lambda_pose: 1.0,
            lambda_point: 1.0,
            lambda_motion: 1.0,
            lambda_conf: 0.05,
            lambda_trans: 0.1,
            lambda_future: 1.0,
            omega: 10.0,
            alpha: 1.0,
            huber_delta: 1.0,
            conf_threshold: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("lambda_seg", self.lambda_seg),
            ("lambda_pose", self.lambda_pose),
            ("lambda_point", self.lambda_point),
            ("lambda_motion", self.lambda_motion),
            ("lambda_conf", self.lambda_conf),
            ("lambda_trans", self.lambda_trans),
            ("lambda_future", self.lambda_future),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(self.omega.is_finite() && self.omega > 1.0) {
            return Err(Error::Config(format!(
                "omega must exceed 1, got {}",
                self.omega
            )));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("huber_delta", self.huber_delta),
            ("conf_threshold", self.conf_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-class BCE weights in [`crate::grid::CLASS_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassWeightTable([f64; NUM_CLASSES]);

impl Default for ClassWeightTable {
    fn default() -> Self {
        // road, vehicle, person, traffic light, traffic sign, sky, background
        Self([0.5, 1.2, 1.6, 1.8, 1.8, 0.3, 0.2])
    }
}

impl ClassWeightTable {
    pub fn new(weights: [f64; NUM_CLASSES]) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Config(format!(
                "class weights must be finite and >= 0, got {w}"
            )));
        }
        Ok(Self(weights))
    }

    pub fn uniform() -> Self {
        Self([1.0; NUM_CLASSES])
    }

    pub fn weights(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ClassWeightTable {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: [f64; NUM_CLASSES] = v.try_into().map_err(|v: Vec<f64>| {
            Error::Config(format!(
                "class weight table needs {NUM_CLASSES} entries, got {}",
                v.len()
            ))
        })?;
        Self::new(arr)
    }
}

impl From<ClassWeightTable> for Vec<f64> {
    fn from(t: ClassWeightTable) -> Self {
        t.0.to_vec()
    }
}

/// Clamped probability and the derivative of the clamp.
pub(crate) fn clamp_prob(p: f64) -> (f64, f64) {
    if p < PROB_EPS {
        (PROB_EPS, 0.0)
    } else if p > 1.0 - PROB_EPS {
        (1.0 - PROB_EPS, 0.0)
    } else {
        (p, 1.0)
    }
}

/// BCE of a clamped probability and its derivative w.r.t. the unclamped input.
pub(crate) fn bce_with_grad(p: f64, y: f64) -> (f64, f64) {
    let (pc, dclamp) = clamp_prob(p);
    let value = -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());
    let grad = (pc - y) / (pc * (1.0 - pc)) * dclamp;
    (value, grad)
}
