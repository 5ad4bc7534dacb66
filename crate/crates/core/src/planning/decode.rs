use serde::{Deserialize, Serialize};

use super::{AnchorSet, ModePrediction, PlanTrajectory, Waypoints, NUM_WAYPOINTS, PLAN_DIM};
use crate::error::{Error, Result};

fn check_shapes(anchors: &AnchorSet, pred: &ModePrediction) -> Result<()> {
    if anchors.is_empty() {
        return Err(Error::InvalidInput("empty anchor set".into()));
    }
    let k = anchors.len();
    if pred.confidences.len() != k || pred.offsets.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "{k} anchors but {} confidences and {} offset sets",
            pred.confidences.len(),
            pred.offsets.len()
        )));
    }
    if pred.confidences.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("mode confidences".into()));
    }
    if pred
        .offsets
        .iter()
        .flatten()
        .flatten()
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("mode offsets".into()));
    }
    Ok(())
}

fn add(a: &Waypoints, b: &Waypoints) -> Waypoints {
    std::array::from_fn(|k| [a[k][0] + b[k][0], a[k][1] + b[k][1]])
}

/// Index of the largest value; the lowest index wins ties.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Picks the highest-confidence mode and adds its offsets to its anchor.
pub fn decode_plan(anchors: &AnchorSet, pred: &ModePrediction) -> Result<(PlanTrajectory, usize)> {
    check_shapes(anchors, pred)?;
    let m = argmax(&pred.confidences);
    Ok((
        PlanTrajectory::new(add(&anchors.anchors[m], &pred.offsets[m])),
        m,
    ))
}

fn mean_waypoint_distance(a: &Waypoints, b: &Waypoints) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .sum::<f64>()
        / NUM_WAYPOINTS as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningLoss {
    pub target_mode: usize,
    pub focal: f64,
    pub l1: f64,
    /// d focal / d confidence logits.
    pub grad_confidences: Vec<f64>,
    /// d l1 / d offsets; nonzero only for the target mode.
    pub grad_offsets: Vec<Waypoints>,
}

/// Focal classification loss over the softmax of the confidences plus the
/// mean absolute waypoint error of the target mode's decoded trajectory.
///
/// The target mode is the anchor closest to `gt` in mean L2 waypoint
/// distance (lowest index on ties).
pub fn planning_losses(
    anchors: &AnchorSet,
    pred: &ModePrediction,
    gt: &PlanTrajectory,
    gamma: f64,
) -> Result<PlanningLoss> {
    check_shapes(anchors, pred)?;
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidInput(format!(
            "focal gamma must be >= 0, got {gamma}"
        )));
    }
    if gt.waypoints.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ground-truth waypoints".into()));
    }

    let dists: Vec<f64> = anchors
        .anchors
        .iter()
        .map(|a| mean_waypoint_distance(a, &gt.waypoints))
        .collect();
    let mut t = 0;
    for (i, &d) in dists.iter().enumerate().skip(1) {
        if d < dists[t] {
            t = i;
        }
    }

    // stable softmax
    let z = &pred.confidences;
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
    let probs: Vec<f64> = z.iter().map(|v| (v - lse).exp()).collect();
    let log_pt = z[t] - lse;
    let pt = probs[t];
    let q = 1.0 - pt;
    let focal = -q.powf(gamma) * log_pt;

    let first = if gamma == 0.0 || q == 0.0 {
        0.0
    } else {
        gamma * q.powf(gamma - 1.0) * pt * log_pt
    };
    let scale = first - q.powf(gamma);
    let grad_confidences = probs
        .iter()
        .enumerate()
        .map(|(k, &pk)| scale * (if k == t { 1.0 } else { 0.0 } - pk))
        .collect();

    let decoded = add(&anchors.anchors[t], &pred.offsets[t]);
    let mut l1 = 0.0;
    let mut grad_offsets = vec![[[0.0; 2]; NUM_WAYPOINTS]; anchors.len()];
    for k in 0..NUM_WAYPOINTS {
        for c in 0..2 {
            let r = decoded[k][c] - gt.waypoints[k][c];
            l1 += r.abs();
            grad_offsets[t][k][c] = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            } / PLAN_DIM as f64;
        }
    }
    l1 /= PLAN_DIM as f64;

    Ok(PlanningLoss {
        target_mode: t,
        focal,
        l1,
        grad_confidences,
        grad_offsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchors(k: usize) -> AnchorSet {
        AnchorSet {
            anchors: (0..k)
                .map(|m| std::array::from_fn(|w| [(w + 1) as f64 * (1.0 + m as f64), m as f64]))
                .collect(),
            seed: 0,
            objective_history: vec![],
        }
    }

    fn zero_pred(conf: Vec<f64>) -> ModePrediction {
        let k = conf.len();
        ModePrediction {
            confidences: conf,
            offsets: vec![[[0.0; 2]; NUM_WAYPOINTS]; k],
        }
    }

    #[test]
    fn one_hot_returns_anchor_verbatim() {
        let a = anchors(5);
        let mut conf = vec![0.0; 5];
        conf[3] = 1.0;
        let (plan, m) = decode_plan(&a, &zero_pred(conf)).unwrap();
        assert_eq!(m, 3);
        assert_eq!(plan.waypoints, a.anchors[3]);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let (_, m) = decode_plan(&anchors(4), &zero_pred(vec![0.7; 4])).unwrap();
        assert_eq!(m, 0);
    }

    #[test]
    fn shape_errors() {
        let empty = AnchorSet {
            anchors: vec![],
            seed: 0,
            objective_history: vec![],
        };
        assert!(decode_plan(&empty, &zero_pred(vec![])).is_err());
        assert!(matches!(
            decode_plan(&anchors(3), &zero_pred(vec![0.0; 2])),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn focal_half_probability_gamma_two() {
        let a = anchors(2);
        let gt = PlanTrajectory::new(a.anchors[0]);
        let l = planning_losses(&a, &zero_pred(vec![0.3, 0.3]), &gt, 2.0).unwrap();
        assert_eq!(l.target_mode, 0);
        assert!((l.focal - 0.25 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(l.l1, 0.0);
    }

    #[test]
    fn gamma_zero_is_cross_entropy() {
        let a = anchors(3);
        let gt = PlanTrajectory::new(a.anchors[2]);
        let z = vec![0.4, -1.2, 2.0];
        let l = planning_losses(&a, &zero_pred(z.clone()), &gt, 0.0).unwrap();
        let ce = -(z[2].exp() / z.iter().map(|v| v.exp()).sum::<f64>()).ln();
        assert!((l.focal - ce).abs() < 1e-12);
    }

    #[test]
    fn l1_gradient_only_on_target_mode() {
        let a = anchors(3);
        let mut gt = PlanTrajectory::new(a.anchors[1]);
        gt.waypoints[0][0] += 0.5;
        let l = planning_losses(&a, &zero_pred(vec![0.0; 3]), &gt, 2.0).unwrap();
        assert_eq!(l.target_mode, 1);
        assert!((l.l1 - 0.5 / 16.0).abs() < 1e-15);
        assert_eq!(l.grad_offsets[1][0][0], -1.0 / 16.0);
        assert!(l.grad_offsets[0].iter().flatten().all(|&g| g == 0.0));
    }
}
