use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DepthMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleShift {
    pub scale: f64,
    pub shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthScores {
    pub absrel: f64,
    pub rmse_m: f64,
}

fn joint_pairs<'a>(a: &'a DepthMap, b: &'a DepthMap) -> impl Iterator<Item = (f64, f64)> + 'a {
    a.depth()
        .iter()
        .zip(b.depth())
        .zip(a.valid().iter().zip(b.valid()))
        .filter_map(|((&x, &y), (&va, &vb))| (va && vb).then_some((x, y)))
}

/// Least-squares `(s, t)` minimizing `sum (s * pred + t - gt)^2` over pixels
/// valid in both maps, and the aligned prediction `s * pred + t`.
///
/// The aligned map keeps the joint validity mask even where the fit drives a
/// value to zero or below.
pub fn align_depth_scale_shift(pred: &DepthMap, gt: &DepthMap) -> Result<(ScaleShift, DepthMap)> {
    pred.ensure_same_shape(gt)?;
    let pairs: Vec<(f64, f64)> = joint_pairs(pred, gt).collect();
    if pairs.len() < 2 {
        return Err(Error::Degenerate(format!(
            "scale/shift alignment needs at least 2 jointly valid pixels, found {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_p = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_g = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut spp, mut spg) = (0.0, 0.0);
    for &(p, g) in &pairs {
        let dp = p - mean_p;
        spp += dp * dp;
        spg += dp * (g - mean_g);
    }
    if spp == 0.0 || pairs.iter().all(|p| p.0 == pairs[0].0) {
        return Err(Error::Singular(
            "prediction is constant over the valid set".into(),
        ));
    }
    let scale = spg / spp;
    let shift = mean_g - scale * mean_p;

    let valid: Vec<bool> = pred
        .valid()
        .iter()
        .zip(gt.valid())
        .map(|(&a, &b)| a && b)
        .collect();
    let depth = pred
        .depth()
        .iter()
        .zip(&valid)
        .map(|(&d, &v)| if v { scale * d + shift } else { 0.0 })
        .collect();
    Ok((
        ScaleShift { scale, shift },
        DepthMap::from_parts_unchecked(pred.height(), pred.width(), depth, valid),
    ))
}

/// AbsRel and RMSE over pixels valid in both maps.
pub fn depth_metrics(aligned: &DepthMap, gt: &DepthMap) -> Result<DepthScores> {
    aligned.ensure_same_shape(gt)?;
    let (mut rel, mut sq, mut n) = (0.0, 0.0, 0usize);
    for (a, g) in joint_pairs(aligned, gt) {
        let e = a - g;
        rel += e.abs() / g;
        sq += e * e;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Degenerate("no jointly valid depth pixels".into()));
    }
    let n = n as f64;
    Ok(DepthScores {
        absrel: rel / n,
        rmse_m: (sq / n).sqrt(),
    })
}
