//! Central finite-difference checks of every analytic loss gradient.
//!
//! Each check draws random instances away from the non-differentiable points
//! (BCE clamp band, L1 zero residuals, Huber corner, geodesic angle near 0 or
//! pi) and compares the analytic gradient against central differences.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{geodesic_rotation_distance, relative_pose, so3_exp, PointMap, Pose};
use crate::grid::{Grid, SemanticMap, NUM_CLASSES};
use crate::loss::{
    binary_ce, confidence_target, point_loss, pose_loss, seg_loss, ClassWeightTable, PairSet,
};
use crate::planning::{planning_losses, AnchorSet, ModePrediction, PlanTrajectory, NUM_WAYPOINTS};

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Distance from a kink below which an instance is redrawn.
pub const KINK_MARGIN: f64 = 1e-4;

pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|)` in the Euclidean norm; 0 when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let l2 = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = l2(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = l2(&mut analytic.iter().copied()).max(l2(&mut numeric.iter().copied()));
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub loss: String,
    pub instances: usize,
    pub max_relative_error: f64,
    pub worst_instance: usize,
    pub passed: bool,
}

fn summarize(loss: &str, errors: Vec<f64>) -> GradCheck {
    let (worst_instance, max_relative_error) = errors
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    GradCheck {
        loss: loss.to_string(),
        instances: errors.len(),
        max_relative_error,
        worst_instance,
        passed: errors.iter().all(|&e| e < REL_TOL),
    }
}

fn prob<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(0.05..0.95)
}

/// Residual with `|r| >= 1e-3`, random sign.
fn off_kink<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    let m = rng.gen_range(1e-3..1.0) * scale;
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

fn random_rotation<R: Rng>(rng: &mut R, max_angle: f64) -> Matrix3<f64> {
    let axis = Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    let axis = if axis.norm() < 1e-3 {
        Vector3::z()
    } else {
        axis.normalize()
    };
    so3_exp(&(axis * rng.gen_range(0.0..max_angle)))
}

pub fn check_seg<R: Rng>(rng: &mut R, n: usize) -> Result<GradCheck> {
    let w = ClassWeightTable::default();
    let mut errs = Vec::with_capacity(n);
    for _ in 0..n {
        let (h, wd) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let labels = Grid::from_fn(h, wd, |_, _| rng.gen_range(0..NUM_CLASSES as u8));
        let probs: Vec<f64> = (0..h * wd * NUM_CLASSES).map(|_| prob(rng)).collect();
        let (_, g) = seg_loss(&SemanticMap::new(h, wd, probs.clone())?, &labels, &w)?;
        let num = central_difference(
            |x| {
                seg_loss(&SemanticMap::new(h, wd, x.to_vec()).unwrap(), &labels, &w)
                    .unwrap()
                    .0
            },
            &probs,
            FD_STEP,
        );
        errs.push(relative_error(&g, &num));
    }
    Ok(summarize("seg", errs))
}

fn random_point_maps<R: Rng>(
    rng: &mut R,
    h: usize,
    w: usize,
) -> (Vec<Vector3<f64>>, Vec<bool>, PointMap) {
    let target = PointMap::from_fn(h, w, |_, _| {
        Some(Vector3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.5..5.0),
        ))
    });
    let pts: Vec<Vector3<f64>> = target
        .points()
        .iter()
        .map(|p| p + Vector3::new(off_kink(rng, 1.0), off_kink(rng, 1.0), off_kink(rng, 1.0)))
        .collect();
    // keep at least one pixel valid
    let mut valid: Vec<bool> = (0..h * w).map(|_| rng.gen_bool(0.8)).collect();
    valid[0] = true;
    (pts, valid, target)
}

fn flatten3(v: &[Vector3<f64>]) -> Vec<f64> {
    v.iter().flat_map(|p| p.iter().copied()).collect()
}

fn unflatten3(x: &[f64]) -> Vec<Vector3<f64>> {
    x.chunks_exact(3)
        .map(|c| Vector3::new(c[0], c[1], c[2]))
        .collect()
}

pub fn check_point<R: Rng>(rng: &mut R, n: usize) -> Result<GradCheck> {
    let mut errs = Vec::with_capacity(n);
    for _ in 0..n {
        let (h, w) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let alpha = rng.gen_range(0.5..2.0);
        let (pts, valid, target) = random_point_maps(rng, h, w);
        let pred = PointMap::new(h, w, pts.clone(), valid.clone())?;
        let (_, g) = point_loss(&pred, &target, alpha)?;
        let num = central_difference(
            |x| {
                let p = PointMap::new(h, w, unflatten3(x), valid.clone()).unwrap();
                point_loss(&p, &target, alpha).unwrap().0
            },
            &flatten3(&pts),
            FD_STEP,
        );
        errs.push(relative_error(&flatten3(&g), &num));
    }
    Ok(summarize("point", errs))
}

fn check_bce_with<R: Rng>(
    rng: &mut R,
    n: usize,
    name: &str,
    mut target_for: impl FnMut(&mut R, usize, usize) -> Result<(Grid<f64>, Grid<bool>)>,
) -> Result<GradCheck> {
    let mut errs = Vec::with_capacity(n);
    for _ in 0..n {
        let (h, w) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let (target, mask) = target_for(rng, h, w)?;
        let pred: Vec<f64> = (0..h * w).map(|_| prob(rng)).collect();
        let (_, g) = binary_ce(&Grid::new(h, w, pred.clone())?, &target, &mask)?;
        let num = central_difference(
            |x| {
                binary_ce(&Grid::new(h, w, x.to_vec()).unwrap(), &target, &mask)
                    .unwrap()
                    .0
            },
            &pred,
            FD_STEP,
        );
        errs.push(relative_error(g.as_slice(), &num));
    }
    Ok(summarize(name, errs))
}

/// Binary CE as used for motion masks.
pub fn check_motion<R: Rng>(rng: &mut R, n: usize) -> Result<GradCheck> {
    check_bce_with(rng, n, "motion", |rng, h, w| {
        let target = Grid::from_fn(h, w, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
        let mut mask = Grid::from_fn(h, w, |_, _| rng.gen_bool(0.7));
        mask.set(0, 0, true);
        Ok((target, mask))
    })
}

/// Binary CE against targets derived from point-map error.
pub fn check_conf<R: Rng>(rng: &mut R, n: usize) -> Result<GradCheck> {
    check_bce_with(rng, n, "conf", |rng, h, w| {
        let (pts, valid, target) = random_point_maps(rng, h, w);
        let pred = PointMap::new(h, w, pts, valid)?;
        let t = confidence_target(&pred, &target, rng.gen_range(0.3..1.5))?;
        Ok((t.labels, t.mask))
    })
}

fn perturbed(poses: &[Pose], x: &[f64]) -> Vec<Pose> {
    poses
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let dt = Vector3::new(x[6 * k], x[6 * k + 1], x[6 * k + 2]);
            let dw = Vector3::new(x[6 * k + 3], x[6 * k + 4], x[6 * k + 5]);
            Pose::new(p.rotation() * so3_exp(&dw), p.translation() + dt).unwrap()
        })
        .collect()
}

pub fn check_pose<R: Rng>(rng: &mut R, n: usize) -> Result<GradCheck> {
    let (delta, lambda_trans) = (1.0, 0.1);
    let mut errs = Vec::with_capacity(n);
    while errs.len() < n {
        let frames = rng.gen_range(2..5);
        let pair_set = if rng.gen_bool(0.5) {
            PairSet::Consecutive
        } else {
            PairSet::All
        };
        let target: Vec<Pose> = (0..frames)
            .map(|_| {
                let t = Vector3::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                );
                Pose::new(random_rotation(rng, 1.0), t).unwrap()
            })
            .collect();
        let pred: Vec<Pose> = target
            .iter()
            .map(|p| {
                let t = p.translation()
                    + Vector3::new(
                        rng.gen_range(-1.5..1.5),
                        rng.gen_range(-1.5..1.5),
                        rng.gen_range(-1.5..1.5),
                    );
                Pose::new(p.rotation() * random_rotation(rng, 0.8), t).unwrap()
            })
            .collect();

        // redraw near the geodesic singularities and the Huber corner
        let mut near_kink = false;
        for (i, j) in pair_set.pairs(frames) {
            let rp = relative_pose(&pred[i], &pred[j]);
            let rt = relative_pose(&target[i], &target[j]);
            let theta = geodesic_rotation_distance(rt.rotation(), rp.rotation())?;
            let r = rp.translation() - rt.translation();
            near_kink |= !(1e-2..=std::f64::consts::PI - 1e-2).contains(&theta);
            near_kink |= r.iter().any(|v| (v.abs() - delta).abs() < 1e-3);
        }
        if near_kink {
            continue;
        }

        let analytic = pose_loss(&pred, &target, pair_set, delta, lambda_trans)?;
        let mut a = Vec::with_capacity(6 * frames);
        for k in 0..frames {
            a.extend(analytic.gradient.translation[k].iter());
            a.extend(analytic.gradient.rotation[k].iter());
        }
        let num = central_difference(
            |x| {
                pose_loss(&perturbed(&pred, x), &target, pair_set, delta, lambda_trans)
                    .unwrap()
                    .value
            },
            &vec![0.0; 6 * frames],
            FD_STEP,
        );
        errs.push(relative_error(&a, &num));
    }
    Ok(summarize("pose", errs))
}

fn random_planning<R: Rng>(rng: &mut R) -> (AnchorSet, ModePrediction, PlanTrajectory) {
    let k = rng.gen_range(2..7);
    let anchors = AnchorSet {
        anchors: (0..k)
            .map(|_| {
                let speed = rng.gen_range(0.5..6.0);
                let curve = rng.gen_range(-0.5..0.5);
                std::array::from_fn(|w| {
                    let s = (w + 1) as f64 * speed;
                    [s, curve * s * s / 10.0]
                })
            })
            .collect(),
        seed: 0,
        objective_history: vec![],
    };
    let pred = ModePrediction {
        confidences: (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        offsets: (0..k)
            .map(|_| std::array::from_fn(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]))
            .collect(),
    };
    let base = anchors.anchors[rng.gen_range(0..k)];
    let gt = PlanTrajectory::new(std::array::from_fn(|w| {
        [
            base[w][0] + rng.gen_range(-1.0..1.0),
            base[w][1] + rng.gen_range(-1.0..1.0),
        ]
    }));
    (anchors, pred, gt)
}

pub fn check_focal<R: Rng>(rng: &mut R, n: usize) -> Result<GradCheck> {
    let mut errs = Vec::with_capacity(n);
    for _ in 0..n {
        let (anchors, pred, gt) = random_planning(rng);
        let gamma = rng.gen_range(0.0..3.0);
        let l = planning_losses(&anchors, &pred, &gt, gamma)?;
        let num = central_difference(
            |x| {
                let p = ModePrediction {
                    confidences: x.to_vec(),
                    offsets: pred.offsets.clone(),
                };
                planning_losses(&anchors, &p, &gt, gamma).unwrap().focal
            },
            &pred.confidences,
            FD_STEP,
        );
        errs.push(relative_error(&l.grad_confidences, &num));
    }
    Ok(summarize("focal", errs))
}

pub fn check_plan_l1<R: Rng>(rng: &mut R, n: usize) -> Result<GradCheck> {
    let mut errs = Vec::with_capacity(n);
    while errs.len() < n {
        let (anchors, pred, gt) = random_planning(rng);
        let l = planning_losses(&anchors, &pred, &gt, 2.0)?;
        let t = l.target_mode;
        let near_kink = (0..NUM_WAYPOINTS).any(|w| {
            (0..2).any(|c| {
                (anchors.anchors[t][w][c] + pred.offsets[t][w][c] - gt.waypoints[w][c]).abs()
                    < KINK_MARGIN
            })
        });
        if near_kink {
            continue;
        }
        let flat = |o: &[[[f64; 2]; NUM_WAYPOINTS]]| -> Vec<f64> {
            o.iter().flatten().flatten().copied().collect()
        };
        let num = central_difference(
            |x| {
                let offsets = x
                    .chunks_exact(2 * NUM_WAYPOINTS)
                    .map(|c| std::array::from_fn(|w| [c[2 * w], c[2 * w + 1]]))
                    .collect();
                let p = ModePrediction {
                    confidences: pred.confidences.clone(),
                    offsets,
                };
                planning_losses(&anchors, &p, &gt, 2.0).unwrap().l1
            },
            &flat(&pred.offsets),
            FD_STEP,
        );
        errs.push(relative_error(&flat(&l.grad_offsets), &num));
    }
    Ok(summarize("plan_l1", errs))
}

/// Runs every check with `instances` draws each from one seeded stream.
pub fn run_all(seed: u64, instances: usize) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        check_seg(&mut rng, instances)?,
        check_point(&mut rng, instances)?,
        check_motion(&mut rng, instances)?,
        check_conf(&mut rng, instances)?,
        check_pose(&mut rng, instances)?,
        check_focal(&mut rng, instances)?,
        check_plan_l1(&mut rng, instances)?,
    ])
}
