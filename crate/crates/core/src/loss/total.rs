use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LossWeights;
use crate::error::{Error, Result};

/// One loss term: its value and, optionally, its gradient w.r.t. the
/// prediction it was computed from (flattened).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
}

impl From<f64> for LossTerm {
    fn from(value: f64) -> Self {
        Self {
            value,
            gradient: None,
        }
    }
}

/// The five terms summed for either the current or the future frames.
/// `pose` already includes its `lambda_trans`-weighted translation part and
/// `point` its `alpha` scale.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTerms {
    pub seg: LossTerm,
    pub pose: LossTerm,
    pub point: LossTerm,
    pub motion: LossTerm,
    pub conf: LossTerm,
}

impl LossTerms {
    pub fn from_values(seg: f64, pose: f64, point: f64, motion: f64, conf: f64) -> Self {
        Self {
            seg: seg.into(),
            pose: pose.into(),
            point: point.into(),
            motion: motion.into(),
            conf: conf.into(),
        }
    }

    fn named(&self) -> [(&'static str, &LossTerm); 5] {
        [
            ("seg", &self.seg),
            ("pose", &self.pose),
            ("point", &self.point),
            ("motion", &self.motion),
            ("conf", &self.conf),
        ]
    }
}

fn lambda_for(name: &str, w: &LossWeights) -> f64 {
    match name {
        "seg" => w.lambda_seg,
        "pose" => w.lambda_pose,
        "point" => w.lambda_point,
        "motion" => w.lambda_motion,
        "conf" => w.lambda_conf,
        _ => unreachable!("unknown loss term {name}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermBreakdown {
    pub weight: f64,
    pub current: f64,
    pub future: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    /// `sum_k lambda_k * current_k`
    pub current: f64,
    /// `omega * sum_k lambda_k * future_k`
    pub future: f64,
    pub lambda_future: f64,
    pub omega: f64,
    pub terms: BTreeMap<String, TermBreakdown>,
    /// Gradients of `total` w.r.t. each term's prediction, keyed
    /// `current.<term>` / `future.<term>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradients: Option<BTreeMap<String, Vec<f64>>>,
}

impl LossReport {
    /// Recomputes the total from the per-term breakdown.
    pub fn recombine(&self) -> f64 {
        let current: f64 = self.terms.values().map(|t| t.weight * t.current).sum();
        let future: f64 = self.terms.values().map(|t| t.weight * t.future).sum();
        current + self.lambda_future * self.omega * future
    }
}

/// `L_total = L_current + lambda_future * L_future`, with
/// `L_current = sum_k lambda_k L_k` and `L_future = omega * sum_k lambda_k L_k`.
pub fn total_loss(
    current: &LossTerms,
    future: &LossTerms,
    weights: &LossWeights,
) -> Result<LossReport> {
    weights.validate()?;
    let mut terms = BTreeMap::new();
    let mut gradients = BTreeMap::new();
    let (mut cur_sum, mut fut_sum) = (0.0, 0.0);
    let future_scale = weights.lambda_future * weights.omega;

    for ((name, c), (_, f)) in current.named().into_iter().zip(future.named()) {
        for (side, term) in [("current", c), ("future", f)] {
            if !term.value.is_finite() {
                return Err(Error::NonFinite(format!("{side}.{name}")));
            }
        }
        let lambda = lambda_for(name, weights);
        cur_sum += lambda * c.value;
        fut_sum += lambda * f.value;
        terms.insert(
            name.to_string(),
            TermBreakdown {
                weight: lambda,
                current: c.value,
                future: f.value,
            },
        );
        if let Some(g) = &c.gradient {
            gradients.insert(
                format!("current.{name}"),
                g.iter().map(|v| lambda * v).collect(),
            );
        }
        if let Some(g) = &f.gradient {
            gradients.insert(
                format!("future.{name}"),
                g.iter().map(|v| future_scale * lambda * v).collect(),
            );
        }
    }

    let future_total = weights.omega * fut_sum;
    Ok(LossReport {
        total: cur_sum + weights.lambda_future * future_total,
        current: cur_sum,
        future: future_total,
        lambda_future: weights.lambda_future,
        omega: weights.omega,
        terms,
        gradients: (!gradients.is_empty()).then_some(gradients),
    })
}
