use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{geodesic_rotation_distance, relative_pose, Pose};

/// Frame pairs `(i, j)` over which relative poses are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSet {
    /// `(i, i + 1)`
    #[default]
    Consecutive,
    /// every `i < j`
    All,
}

impl PairSet {
    pub fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            PairSet::Consecutive => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            PairSet::All => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
        }
    }
}

pub fn huber(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        0.5 * r * r
    } else {
        delta * (r.abs() - 0.5 * delta)
    }
}

pub fn huber_grad(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        r
    } else {
        delta * r.signum()
    }
}

/// Gradient of the pose loss for each predicted pose.
///
/// `rotation[k]` is taken w.r.t. a right perturbation `R_k * exp(hat(w))` at
/// `w = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseGradient {
    pub translation: Vec<Vector3<f64>>,
    pub rotation: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseLoss {
    pub value: f64,
    pub rotation_term: f64,
    pub translation_term: f64,
    pub gradient: PoseGradient,
}

/// `(A12 - A21, A20 - A02, A01 - A10)`: the derivative of `tr(A * hat(w))`.
fn trace_hat_grad(a: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        a[(1, 2)] - a[(2, 1)],
        a[(2, 0)] - a[(0, 2)],
        a[(0, 1)] - a[(1, 0)],
    )
}

/// `L_rot + lambda_trans * L_trans` over relative poses `T_i^-1 T_j`.
///
/// `L_rot` is the mean geodesic angle between predicted and target relative
/// rotations; `L_trans` the mean element-wise Huber of relative-translation
/// residuals.
pub fn pose_loss(
    pred: &[Pose],
    target: &[Pose],
    pair_set: PairSet,
    delta: f64,
    lambda_trans: f64,
) -> Result<PoseLoss> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "pose sequences differ in length: {} vs {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "pose loss needs at least 2 frames, got {}",
            pred.len()
        )));
    }
    let pairs = pair_set.pairs(pred.len());
    let np = pairs.len() as f64;

    let mut grad_t = vec![Vector3::zeros(); pred.len()];
    let mut grad_w = vec![Vector3::zeros(); pred.len()];
    let (mut rot_sum, mut trans_sum) = (0.0, 0.0);

    for &(i, j) in &pairs {
        let rel_p = relative_pose(&pred[i], &pred[j]);
        let rel_t = relative_pose(&target[i], &target[j]);
        let q_p = rel_p.rotation();
        let q_t = rel_t.rotation();

        let theta = geodesic_rotation_distance(q_t, q_p)?;
        rot_sum += theta;
        let sin = theta.sin();
        if sin > 1e-12 {
            // d theta = -d cos / sin, cos = (tr(q_t^T q_p) - 1) / 2
            let scale = -0.5 / sin / np;
            grad_w[j] += scale * trace_hat_grad(&(q_t.transpose() * q_p));
            grad_w[i] -= scale * trace_hat_grad(&(q_p * q_t.transpose()));
        }

        let dt = *rel_p.translation();
        let r = dt - rel_t.translation();
        trans_sum += r.iter().map(|&v| huber(v, delta)).sum::<f64>();
        let g = r.map(|v| huber_grad(v, delta)) * (lambda_trans / (3.0 * np));
        let rg = pred[i].rotation() * g;
        grad_t[j] += rg;
        grad_t[i] -= rg;
        grad_w[i] += g.cross(&dt);
    }

    let rotation_term = rot_sum / np;
    let translation_term = trans_sum / (3.0 * np);
    Ok(PoseLoss {
        value: rotation_term + lambda_trans * translation_term,
        rotation_term,
        translation_term,
        gradient: PoseGradient {
            translation: grad_t,
            rotation: grad_w,
        },
    })
}
