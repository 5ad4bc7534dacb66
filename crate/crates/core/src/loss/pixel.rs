use nalgebra::Vector3;

use super::{bce_with_grad, ClassWeightTable};
use crate::error::{Error, Result};
use crate::geometry::PointMap;
use crate::grid::{
    ensure_same_shape, validate_labels, Grid, LabelMap, Mask, SemanticMap, NUM_CLASSES,
};

fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

/// Class-weighted multi-label BCE of per-channel probabilities against the
/// one-hot target, averaged over pixels and channels.
///
/// The gradient has the layout of `pred` (channel-last).
pub fn seg_loss(
    pred: &SemanticMap,
    target: &LabelMap,
    weights: &ClassWeightTable,
) -> Result<(f64, Vec<f64>)> {
    if pred.height() != target.height() || pred.width() != target.width() {
        return Err(Error::ShapeMismatch(format!(
            "semantic prediction {}x{} vs target {}x{}",
            pred.height(),
            pred.width(),
            target.height(),
            target.width()
        )));
    }
    validate_labels(target)?;
    ensure_finite(pred.as_slice(), "semantic prediction")?;

    let count = (target.len() * NUM_CLASSES) as f64;
    if count == 0.0 {
        return Err(Error::Degenerate("empty semantic map".into()));
    }
    let w = weights.weights();
    let mut value = 0.0;
    let mut grad = vec![0.0; pred.as_slice().len()];
    for (i, &label) in target.as_slice().iter().enumerate() {
        let px = pred.pixel(i);
        for c in 0..NUM_CLASSES {
            let y = if c == label as usize { 1.0 } else { 0.0 };
            let (v, g) = bce_with_grad(px[c], y);
            value += w[c] * v;
            grad[i * NUM_CLASSES + c] = w[c] * g / count;
        }
    }
    Ok((value / count, grad))
}

/// `alpha` times the mean absolute coordinate difference over pixels valid in
/// both maps. Exact zeros get subgradient 0.
pub fn point_loss(
    pred: &PointMap,
    target: &PointMap,
    alpha: f64,
) -> Result<(f64, Vec<Vector3<f64>>)> {
    pred.ensure_same_shape(target)?;
    let joint: Vec<bool> = pred
        .valid()
        .iter()
        .zip(target.valid())
        .map(|(&a, &b)| a && b)
        .collect();
    let n = joint.iter().filter(|&&v| v).count();
    if n == 0 {
        return Err(Error::Degenerate("no jointly valid points".into()));
    }
    let count = (3 * n) as f64;
    let mut value = 0.0;
    let mut grad = vec![Vector3::zeros(); joint.len()];
    for (i, &ok) in joint.iter().enumerate() {
        if !ok {
            continue;
        }
        let r = pred.points()[i] - target.points()[i];
        value += r.abs().sum();
        grad[i] = r.map(|v| alpha * sign0(v) / count);
    }
    Ok((alpha * value / count, grad))
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Binary label grid plus the pixels it applies to.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTarget {
    pub labels: Grid<f64>,
    pub mask: Mask,
}

/// 1 where the point error is strictly below `threshold`, 0 elsewhere; only
/// pixels valid in both maps are in the mask.
pub fn confidence_target(
    pred_points: &PointMap,
    target_points: &PointMap,
    threshold: f64,
) -> Result<BinaryTarget> {
    pred_points.ensure_same_shape(target_points)?;
    let (h, w) = (pred_points.height(), pred_points.width());
    let mut labels = Grid::filled(h, w, 0.0);
    let mut mask = Grid::filled(h, w, false);
    for i in 0..h * w {
        if pred_points.valid()[i] && target_points.valid()[i] {
            mask.as_mut_slice()[i] = true;
            let err = (pred_points.points()[i] - target_points.points()[i]).norm();
            if err < threshold {
                labels.as_mut_slice()[i] = 1.0;
            }
        }
    }
    Ok(BinaryTarget { labels, mask })
}

/// Mean BCE over masked pixels; the gradient is zero outside the mask.
pub fn binary_ce(pred: &Grid<f64>, target: &Grid<f64>, mask: &Mask) -> Result<(f64, Grid<f64>)> {
    ensure_same_shape(pred, target, "binary prediction vs target")?;
    ensure_same_shape(pred, mask, "binary prediction vs mask")?;
    ensure_finite(pred.as_slice(), "binary prediction")?;
    if let Some(y) = target.as_slice().iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::InvalidInput(format!(
            "binary target {y} outside [0, 1]"
        )));
    }
    let n = mask.as_slice().iter().filter(|&&m| m).count();
    if n == 0 {
        return Err(Error::Degenerate("empty mask".into()));
    }
    let count = n as f64;
    let mut value = 0.0;
    let mut grad = Grid::filled(pred.height(), pred.width(), 0.0);
    for i in 0..pred.len() {
        if !mask.as_slice()[i] {
            continue;
        }
        let (v, g) = bce_with_grad(pred.as_slice()[i], target.as_slice()[i]);
        value += v;
        grad.as_mut_slice()[i] = g / count;
    }
    Ok((value / count, grad))
}
