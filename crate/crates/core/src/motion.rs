//! Motion-mask pseudo ground truth from instance tracks and teacher point maps.
//!
//! Per instance: back-project the tracked keypoints through each frame's
//! point map, average them into a centroid, measure frame-to-frame centroid
//! displacement, threshold the displacement count, and paint the masks of
//! dynamic instances into per-frame motion masks.

use std::collections::BTreeSet;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointMap, Pose};
use crate::grid::{Grid, Mask, MotionMask};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicRule {
    /// Dynamic iff at least `k_min` displacements exceed the threshold.
    KMin,
    /// Dynamic iff more than half of the displacements exceed the threshold.
    #[default]
    Majority,
}

/// Coordinate frame in which centroid displacements are measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionFrame {
    /// Centroids are mapped through the frame pose first, so ego-motion
    /// cancels out.
    #[default]
    World,
    /// Raw point-map coordinates.
    Camera,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    /// Displacement threshold in normalized units.
    pub tau_motion: f64,
    pub k_min: usize,
    pub rule: DynamicRule,
    /// Tracker grid density; recorded in summaries, not used by the math here.
    pub grid_size: usize,
    pub frame: MotionFrame,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            tau_motion: 0.1,
            k_min: 2,
            rule: DynamicRule::Majority,
            grid_size: 80,
            frame: MotionFrame::World,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_motion.is_finite() && self.tau_motion > 0.0) {
            return Err(Error::Config(format!(
                "tau_motion must be positive, got {}",
                self.tau_motion
            )));
        }
        if self.k_min < 1 {
            return Err(Error::Config("k_min must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

impl Keypoint {
    pub fn visible(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            visible: true,
        }
    }
}

/// One tracked object: its mask (first frame, optionally every frame) and
/// per-frame 2D keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTrack {
    instance_id: u32,
    first_frame_mask: Mask,
    frame_masks: Option<Vec<Mask>>,
    keypoints: Vec<Vec<Keypoint>>,
}

impl InstanceTrack {
    /// When `frame_masks` is `None`, the first-frame mask stands in for every
    /// frame during rasterization.
    pub fn new(
        instance_id: u32,
        first_frame_mask: Mask,
        frame_masks: Option<Vec<Mask>>,
        keypoints: Vec<Vec<Keypoint>>,
    ) -> Result<Self> {
        if keypoints.is_empty() {
            return Err(Error::InvalidInput(format!(
                "track {instance_id} has no frames"
            )));
        }
        if !keypoints[0].iter().any(|k| k.visible) {
            return Err(Error::InvalidInput(format!(
                "track {instance_id} has no visible keypoint in its first frame"
            )));
        }
        if let Some(masks) = &frame_masks {
            if masks.len() != keypoints.len() {
                return Err(Error::ShapeMismatch(format!(
                    "track {instance_id}: {} frame masks for {} keypoint frames",
                    masks.len(),
                    keypoints.len()
                )));
            }
            if masks.iter().any(|m| !m.same_shape(&first_frame_mask)) {
                return Err(Error::ShapeMismatch(format!(
                    "track {instance_id}: frame masks differ in shape from the first-frame mask"
                )));
            }
        }
        Ok(Self {
            instance_id,
            first_frame_mask,
            frame_masks,
            keypoints,
        })
    }

    pub fn instance_id(&self) -> u32 {
        self.instance_id
    }

    pub fn num_frames(&self) -> usize {
        self.keypoints.len()
    }

    pub fn keypoints(&self) -> &[Vec<Keypoint>] {
        &self.keypoints
    }

    pub fn first_frame_mask(&self) -> &Mask {
        &self.first_frame_mask
    }

    pub fn frame_masks(&self) -> Option<&[Mask]> {
        self.frame_masks.as_deref()
    }

    pub fn mask_at(&self, t: usize) -> &Mask {
        match &self.frame_masks {
            Some(m) => &m[t],
            None => &self.first_frame_mask,
        }
    }
}

/// Mean back-projected 3D position per frame; `None` where no visible,
/// in-bounds keypoint samples a valid point.
pub fn instance_centroids(
    track: &InstanceTrack,
    point_maps: &[PointMap],
) -> Result<Vec<Option<Vector3<f64>>>> {
    if track.num_frames() != point_maps.len() {
        return Err(Error::ShapeMismatch(format!(
            "track {} spans {} frames, {} point maps given",
            track.instance_id,
            track.num_frames(),
            point_maps.len()
        )));
    }
    let centroids: Vec<Option<Vector3<f64>>> = track
        .keypoints
        .iter()
        .zip(point_maps)
        .map(|(kps, pm)| {
            let mut sum = Vector3::zeros();
            let mut n = 0usize;
            for kp in kps.iter().filter(|k| k.visible) {
                // Keypoints that leave the image behave like occluded ones.
                if let Ok(Some(p)) = pm.sample(kp.x, kp.y) {
                    sum += p;
                    n += 1;
                }
            }
            (n > 0).then(|| sum / n as f64)
        })
        .collect();
    if centroids.iter().all(Option::is_none) {
        return Err(Error::Degenerate(format!(
            "track {} has no frame with a valid centroid",
            track.instance_id
        )));
    }
    Ok(centroids)
}

/// Maps camera-frame centroids into the world frame with per-frame poses.
pub fn centroids_to_world(
    centroids: &[Option<Vector3<f64>>],
    poses: &[Pose],
) -> Result<Vec<Option<Vector3<f64>>>> {
    if centroids.len() != poses.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} centroids vs {} poses",
            centroids.len(),
            poses.len()
        )));
    }
    Ok(centroids
        .iter()
        .zip(poses)
        .map(|(c, pose)| c.map(|p| pose.transform_point(&p)))
        .collect())
}

/// `|c_{t+1} - c_t|` for every adjacent pair of valid centroids. A missing
/// centroid removes both pairs it takes part in instead of contributing zero.
pub fn displacement_series(centroids: &[Option<Vector3<f64>>]) -> Result<Vec<f64>> {
    let d: Vec<f64> = centroids
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some((b - a).norm()),
            _ => None,
        })
        .collect();
    if d.is_empty() {
        return Err(Error::Degenerate(
            "fewer than 2 consecutive valid centroids".into(),
        ));
    }
    Ok(d)
}

/// Number of displacements strictly above `tau`.
pub fn frames_above(d: &[f64], tau: f64) -> usize {
    d.iter().filter(|&&v| v > tau).count()
}

pub fn classify_dynamic(d: &[f64], cfg: &MotionConfig) -> bool {
    let moving = frames_above(d, cfg.tau_motion);
    match cfg.rule {
        DynamicRule::KMin => moving >= cfg.k_min,
        DynamicRule::Majority => 2 * moving > d.len(),
    }
}

/// Union of the per-frame masks of every track flagged dynamic.
pub fn rasterize_motion_masks(
    tracks: &[InstanceTrack],
    dynamic: &[bool],
    frames: usize,
    height: usize,
    width: usize,
) -> Result<Vec<MotionMask>> {
    if tracks.len() != dynamic.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} tracks vs {} labels",
            tracks.len(),
            dynamic.len()
        )));
    }
    let mut masks = vec![Grid::filled(height, width, 0.0); frames];
    for (track, _) in tracks.iter().zip(dynamic).filter(|(_, &d)| d) {
        if track.num_frames() != frames {
            return Err(Error::ShapeMismatch(format!(
                "track {} spans {} frames, expected {frames}",
                track.instance_id,
                track.num_frames()
            )));
        }
        for (t, out) in masks.iter_mut().enumerate() {
            let m = track.mask_at(t);
            if m.shape() != (height, width) {
                return Err(Error::ShapeMismatch(format!(
                    "track {} mask is {}x{}, expected {height}x{width}",
                    track.instance_id,
                    m.height(),
                    m.width()
                )));
            }
            for (dst, &on) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
                if on {
                    *dst = 1.0;
                }
            }
        }
    }
    Ok(masks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub instance_id: u32,
    pub displacements: Vec<f64>,
    pub frames_above: usize,
    pub max_displacement: f64,
    pub mean_displacement: f64,
    pub dynamic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoGt {
    pub masks: Vec<MotionMask>,
    /// Sorted by instance id.
    pub instances: Vec<InstanceSummary>,
}

/// Full pipeline: centroids, displacements, classification, rasterization.
///
/// `poses` is required when `cfg.frame` is [`MotionFrame::World`]. Tracks are
/// processed in ascending id order, so the result does not depend on the
/// order of `tracks`.
pub fn generate_pseudo_gt(
    tracks: &[InstanceTrack],
    point_maps: &[PointMap],
    poses: Option<&[Pose]>,
    cfg: &MotionConfig,
) -> Result<PseudoGt> {
    cfg.validate()?;
    let first = point_maps
        .first()
        .ok_or_else(|| Error::InvalidInput("no point maps".into()))?;
    let (h, w) = (first.height(), first.width());
    if point_maps.iter().any(|pm| !pm.same_shape(first)) {
        return Err(Error::ShapeMismatch("point maps differ in shape".into()));
    }
    let poses = match (cfg.frame, poses) {
        (MotionFrame::World, None) => {
            return Err(Error::InvalidInput(
                "world-frame motion needs per-frame poses".into(),
            ))
        }
        (MotionFrame::World, Some(p)) => {
            if p.len() != point_maps.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} poses for {} frames",
                    p.len(),
                    point_maps.len()
                )));
            }
            Some(p)
        }
        (MotionFrame::Camera, _) => None,
    };

    let mut order: Vec<&InstanceTrack> = tracks.iter().collect();
    order.sort_by_key(|t| t.instance_id);
    let mut seen = BTreeSet::new();
    if let Some(dup) = order.iter().find(|t| !seen.insert(t.instance_id)) {
        return Err(Error::InvalidInput(format!(
            "duplicate instance id {}",
            dup.instance_id
        )));
    }

    let mut instances = Vec::with_capacity(order.len());
    for track in &order {
        let attach = |e: Error| Error::Instance {
            id: track.instance_id,
            source: Box::new(e),
        };
        let mut centroids = instance_centroids(track, point_maps).map_err(attach)?;
        if let Some(p) = poses {
            centroids = centroids_to_world(&centroids, p).map_err(attach)?;
        }
        let d = displacement_series(&centroids).map_err(attach)?;
        let dynamic = classify_dynamic(&d, cfg);
        instances.push(InstanceSummary {
            instance_id: track.instance_id,
            frames_above: frames_above(&d, cfg.tau_motion),
            max_displacement: d.iter().copied().fold(0.0, f64::max),
            mean_displacement: d.iter().sum::<f64>() / d.len() as f64,
            displacements: d,
            dynamic,
        });
    }

    let sorted: Vec<InstanceTrack> = order.into_iter().cloned().collect();
    let labels: Vec<bool> = instances.iter().map(|s| s.dynamic).collect();
    let masks = rasterize_motion_masks(&sorted, &labels, point_maps.len(), h, w)?;
    Ok(PseudoGt { masks, instances })
}
