use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{geodesic_rotation_distance, relative_pose, Pose};

/// `x -> scale * rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajScores {
    pub ate_m: f64,
    pub rot_deg: f64,
    pub trans_m: f64,
}

/// Closed-form least-squares similarity (or rigid, when `with_scale` is
/// false) transform taking `pred` onto `gt` (Umeyama 1991).
///
/// The reflection case is resolved by flipping the axis of the smallest
/// singular value, so the returned rotation always has determinant +1.
pub fn umeyama_align(
    pred: &[Vector3<f64>],
    gt: &[Vector3<f64>],
    with_scale: bool,
) -> Result<Similarity> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "trajectory lengths differ: {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "alignment needs at least 3 positions, got {}",
            pred.len()
        )));
    }
    let n = pred.len() as f64;
    let mu_p = pred.iter().sum::<Vector3<f64>>() / n;
    let mu_g = gt.iter().sum::<Vector3<f64>>() / n;

    let mut cov = Matrix3::zeros();
    let mut var_p = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        let dp = p - mu_p;
        cov += (g - mu_g) * dp.transpose();
        var_p += dp.norm_squared();
    }
    cov /= n;
    var_p /= n;
    if with_scale && var_p == 0.0 {
        return Err(Error::Degenerate(
            "predicted positions all coincide; scale is undefined".into(),
        ));
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = svd.singular_values;
    let mut signs = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        signs[d.imin()] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = if with_scale {
        d.component_mul(&signs).sum() / var_p
    } else {
        1.0
    };
    let translation = mu_g - scale * (rotation * mu_p);
    Ok(Similarity {
        scale,
        rotation,
        translation,
    })
}

/// ATE after aligning positions, plus mean rotation (degrees) and translation
/// errors over consecutive relative poses `(i, i+1)`.
///
/// Relative translations of the prediction are multiplied by the alignment
/// scale before comparison.
pub fn trajectory_scores(pred: &[Pose], gt: &[Pose], with_scale: bool) -> Result<TrajScores> {
    let p: Vec<Vector3<f64>> = pred.iter().map(|x| *x.translation()).collect();
    let g: Vec<Vector3<f64>> = gt.iter().map(|x| *x.translation()).collect();
    let sim = umeyama_align(&p, &g, with_scale)?;

    let ate_m = (p
        .iter()
        .zip(&g)
        .map(|(a, b)| (sim.apply(a) - b).norm_squared())
        .sum::<f64>()
        / p.len() as f64)
        .sqrt();

    let pairs = pred.len() - 1;
    let (mut rot, mut trans) = (0.0, 0.0);
    for i in 0..pairs {
        let rp = relative_pose(&pred[i], &pred[i + 1]);
        let rg = relative_pose(&gt[i], &gt[i + 1]);
        rot += geodesic_rotation_distance(rp.rotation(), rg.rotation())?;
        trans += (sim.scale * rp.translation() - rg.translation()).norm();
    }
    Ok(TrajScores {
        ate_m,
        rot_deg: (rot / pairs as f64).to_degrees(),
        trans_m: trans / pairs as f64,
    })
}
