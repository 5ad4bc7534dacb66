//! Anchor-based trajectory decoding and PDMS scoring.
//!
//! Plans are eight planar waypoints at 0.5 s spacing (a 4 s horizon), in the
//! ego frame at `t = 0` unless an explicit start pose is given.

mod decode;
mod geom2;
mod kmeans;
mod pdms;

use serde::{Deserialize, Serialize};

pub use decode::{decode_plan, planning_losses, PlanningLoss};
pub use geom2::{OrientedBox, Rigid2};
pub use kmeans::{kmeans_anchors, kmeans_plus_plus_init, lloyd, KMeansRun, MAX_LLOYD_ITERATIONS};
pub use pdms::{
    rollout_checks, Agent, AgentKind, EgoFootprint, PdmsBreakdown, PdmsConfig, SceneSpec, SUBSTEP_S,
};

pub const NUM_WAYPOINTS: usize = 8;
pub const WAYPOINT_DT: f64 = 0.5;
/// Flattened waypoint dimension used for clustering.
pub const PLAN_DIM: usize = 2 * NUM_WAYPOINTS;

pub type Waypoints = [[f64; 2]; NUM_WAYPOINTS];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanTrajectory {
    #[serde(default)]
    pub start: [f64; 2],
    /// Used only when the first segment has zero length.
    #[serde(default)]
    pub start_heading: f64,
    pub waypoints: Waypoints,
}

impl PlanTrajectory {
    pub fn new(waypoints: Waypoints) -> Self {
        Self {
            start: [0.0, 0.0],
            start_heading: 0.0,
            waypoints,
        }
    }

    pub fn from_flat(flat: &[f64; PLAN_DIM]) -> Self {
        Self::new(unflatten(flat))
    }

    pub fn flatten(&self) -> [f64; PLAN_DIM] {
        flatten(&self.waypoints)
    }

    /// Start position followed by the eight waypoints.
    pub fn positions(&self) -> [[f64; 2]; NUM_WAYPOINTS + 1] {
        let mut out = [[0.0; 2]; NUM_WAYPOINTS + 1];
        out[0] = self.start;
        out[1..].copy_from_slice(&self.waypoints);
        out
    }

    /// Heading of each position in [`Self::positions`]: the direction of the
    /// outgoing segment; the last position inherits its predecessor's heading,
    /// as does any position whose outgoing segment has zero length.
    pub fn headings(&self) -> [f64; NUM_WAYPOINTS + 1] {
        let p = self.positions();
        let mut h = [0.0; NUM_WAYPOINTS + 1];
        let mut prev = self.start_heading;
        for k in 0..NUM_WAYPOINTS {
            let (dx, dy) = (p[k + 1][0] - p[k][0], p[k + 1][1] - p[k][1]);
            h[k] = if dx == 0.0 && dy == 0.0 {
                prev
            } else {
                dy.atan2(dx)
            };
            prev = h[k];
        }
        h[NUM_WAYPOINTS] = h[NUM_WAYPOINTS - 1];
        h
    }

    pub fn transformed(&self, tf: &Rigid2) -> Self {
        Self {
            start: tf.apply(self.start),
            start_heading: self.start_heading + tf.angle,
            waypoints: self.waypoints.map(|w| tf.apply(w)),
        }
    }
}

pub fn flatten(w: &Waypoints) -> [f64; PLAN_DIM] {
    std::array::from_fn(|i| w[i / 2][i % 2])
}

pub fn unflatten(flat: &[f64; PLAN_DIM]) -> Waypoints {
    std::array::from_fn(|k| [flat[2 * k], flat[2 * k + 1]])
}

/// K clustered reference trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub anchors: Vec<Waypoints>,
    pub seed: u64,
    /// Clustering objective after every assignment step.
    #[serde(default)]
    pub objective_history: Vec<f64>,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Per-mode confidences and per-mode waypoint offsets from the decoder head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePrediction {
    pub confidences: Vec<f64>,
    pub offsets: Vec<Waypoints>,
}
