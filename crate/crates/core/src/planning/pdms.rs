//! Non-reactive rollout of a plan through a planar scene and the PDMS
//! subscores computed from it.
//!
//! Every overlap counts as a collision; there is no fault attribution.

use serde::{Deserialize, Serialize};

use super::geom2::{
    lerp, norm, point_in_polygon, polygon_area, polygon_self_intersects, segments_cross, sub,
    wrap_angle, OrientedBox, Rigid2,
};
use super::{PlanTrajectory, NUM_WAYPOINTS, WAYPOINT_DT};
use crate::error::{Error, Result};

/// Sweep resolution of the rollout.
pub const SUBSTEP_S: f64 = 0.1;
const SUBSTEPS_PER_WAYPOINT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Vehicle,
    StaticObject,
}

/// Oriented rectangle moving at constant planar velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub kind: AgentKind,
    pub center: [f64; 2],
    #[serde(default)]
    pub heading: f64,
    pub length: f64,
    pub width: f64,
    #[serde(default)]
    pub velocity: [f64; 2],
}

impl Agent {
    pub fn box_at(&self, t: f64) -> OrientedBox {
        OrientedBox {
            center: [
                self.center[0] + self.velocity[0] * t,
                self.center[1] + self.velocity[1] * t,
            ],
            heading: self.heading,
            length: self.length,
            width: self.width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoFootprint {
    pub length: f64,
    pub width: f64,
}

impl Default for EgoFootprint {
    fn default() -> Self {
        Self {
            length: 4.5,
            width: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// Simple polygon, either winding.
    pub drivable_area: Vec<[f64; 2]>,
    #[serde(default)]
    pub agents: Vec<Agent>,
    #[serde(default)]
    pub ego: EgoFootprint,
    /// Route centerline polyline.
    pub route: Vec<[f64; 2]>,
    /// Progress (m along the route) that counts as EP = 1 for this scenario.
    pub safe_progress_m: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let poly = &self.drivable_area;
        if poly.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "drivable area needs at least 3 vertices, got {}",
                poly.len()
            )));
        }
        let finite = |p: &[f64; 2]| p[0].is_finite() && p[1].is_finite();
        if !poly.iter().all(finite) || !self.route.iter().all(finite) {
            return Err(Error::NonFinite("scene geometry".into()));
        }
        if polygon_area(poly).abs() <= f64::EPSILON {
            return Err(Error::InvalidInput("drivable area has zero area".into()));
        }
        if polygon_self_intersects(poly) {
            return Err(Error::InvalidInput(
                "drivable area is self-intersecting".into(),
            ));
        }
        for (i, a) in self.agents.iter().enumerate() {
            let vals = [
                a.center[0],
                a.center[1],
                a.heading,
                a.velocity[0],
                a.velocity[1],
            ];
            if !vals.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("agents[{i}]")));
            }
            if !(a.length > 0.0 && a.width > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "agents[{i}] has non-positive extent"
                )));
            }
        }
        if !(self.ego.length > 0.0 && self.ego.width > 0.0) {
            return Err(Error::InvalidInput(
                "ego footprint has non-positive extent".into(),
            ));
        }
        if self.route.len() < 2 || route_length(&self.route) <= 0.0 {
            return Err(Error::InvalidInput(
                "route centerline has zero length".into(),
            ));
        }
        if !(self.safe_progress_m > 0.0 && self.safe_progress_m.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "safe_progress_m must be positive, got {}",
                self.safe_progress_m
            )));
        }
        Ok(())
    }

    /// Same scene under a planar rigid transform.
    pub fn transformed(&self, tf: &Rigid2) -> Self {
        Self {
            drivable_area: self.drivable_area.iter().map(|&p| tf.apply(p)).collect(),
            agents: self
                .agents
                .iter()
                .map(|a| Agent {
                    center: tf.apply(a.center),
                    heading: a.heading + tf.angle,
                    velocity: tf.rotate(a.velocity),
                    ..*a
                })
                .collect(),
            ego: self.ego,
            route: self.route.iter().map(|&p| tf.apply(p)).collect(),
            safe_progress_m: self.safe_progress_m,
        }
    }
}

fn route_length(route: &[[f64; 2]]) -> f64 {
    route.windows(2).map(|w| norm(sub(w[1], w[0]))).sum()
}

/// Arc length along `route` of the closest point to `p`; the earliest
/// segment wins ties.
fn project_arc_length(route: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    let mut acc = 0.0;
    for w in route.windows(2) {
        let d = sub(w[1], w[0]);
        let len2 = d[0] * d[0] + d[1] * d[1];
        let len = len2.sqrt();
        if len2 > 0.0 {
            let rel = sub(p, w[0]);
            let u = ((rel[0] * d[0] + rel[1] * d[1]) / len2).clamp(0.0, 1.0);
            let dist = norm(sub(p, lerp(w[0], w[1], u)));
            if dist < best.0 {
                best = (dist, acc + u * len);
            }
        }
        acc += len;
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdmsConfig {
    pub ttc_threshold_s: f64,
    /// m/s^2
    pub max_accel: f64,
    /// m/s^3
    pub max_jerk: f64,
}

impl Default for PdmsConfig {
    fn default() -> Self {
        Self {
            ttc_threshold_s: 1.5,
            max_accel: 4.0,
            max_jerk: 8.0,
        }
    }
}

impl PdmsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ttc_threshold_s", self.ttc_threshold_s),
            ("max_accel", self.max_accel),
            ("max_jerk", self.max_jerk),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "pdms.{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdmsBreakdown {
    pub nc: f64,
    pub dac: f64,
    pub ep: f64,
    pub ttc: f64,
    pub comfort: f64,
    pub pdms: f64,
}

impl PdmsBreakdown {
    /// `(nc * dac) * (5 ep + 5 ttc + 2 comfort) / 12`
    pub fn compose(nc: f64, dac: f64, ep: f64, ttc: f64, comfort: f64) -> Self {
        Self {
            nc,
            dac,
            ep,
            ttc,
            comfort,
            pdms: (nc * dac) * (5.0 * ep + 5.0 * ttc + 2.0 * comfort) / 12.0,
        }
    }
}

struct Sample {
    t: f64,
    pos: [f64; 2],
    heading: f64,
    velocity: [f64; 2],
}

/// Ego state every [`SUBSTEP_S`] from t = 0 to 4 s: position linearly
/// interpolated between waypoints, heading interpolated along the shorter arc,
/// velocity that of the current segment.
fn rollout(plan: &PlanTrajectory) -> Vec<Sample> {
    let p = plan.positions();
    let h = plan.headings();
    let n = NUM_WAYPOINTS * SUBSTEPS_PER_WAYPOINT;
    (0..=n)
        .map(|j| {
            let s = (j / SUBSTEPS_PER_WAYPOINT).min(NUM_WAYPOINTS - 1);
            let frac = (j - s * SUBSTEPS_PER_WAYPOINT) as f64 / SUBSTEPS_PER_WAYPOINT as f64;
            let d = sub(p[s + 1], p[s]);
            Sample {
                t: j as f64 * SUBSTEP_S,
                pos: lerp(p[s], p[s + 1], frac),
                heading: h[s] + wrap_angle(h[s + 1] - h[s]) * frac,
                velocity: [d[0] / WAYPOINT_DT, d[1] / WAYPOINT_DT],
            }
        })
        .collect()
}

fn ego_box(scene: &SceneSpec, pos: [f64; 2], heading: f64) -> OrientedBox {
    OrientedBox {
        center: pos,
        heading,
        length: scene.ego.length,
        width: scene.ego.width,
    }
}

fn inside_drivable(b: &OrientedBox, poly: &[[f64; 2]]) -> bool {
    let corners = b.corners();
    if !corners.iter().all(|&c| point_in_polygon(c, poly)) {
        return false;
    }
    let n = poly.len();
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        for j in 0..n {
            if segments_cross(a, b, poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn lookahead_offsets(threshold: f64) -> Vec<f64> {
    let mut taus: Vec<f64> = (0..)
        .map(|k| k as f64 * SUBSTEP_S)
        .take_while(|&tau| tau < threshold)
        .collect();
    taus.push(threshold);
    taus
}

fn comfortable(plan: &PlanTrajectory, cfg: &PdmsConfig) -> bool {
    let p = plan.positions();
    let diff = |v: &[[f64; 2]]| -> Vec<[f64; 2]> {
        v.windows(2)
            .map(|w| {
                [
                    (w[1][0] - w[0][0]) / WAYPOINT_DT,
                    (w[1][1] - w[0][1]) / WAYPOINT_DT,
                ]
            })
            .collect()
    };
    let vel = diff(&p);
    let acc = diff(&vel);
    let jerk = diff(&acc);
    acc.iter().all(|&a| norm(a) <= cfg.max_accel) && jerk.iter().all(|&j| norm(j) <= cfg.max_jerk)
}

/// Scores `plan` against `scene`.
///
/// - NC: 0 if the swept ego box overlaps any vehicle, 0.5 if it only
///   overlaps static objects, 1 otherwise.
/// - DAC: 1 iff the ego box lies inside the drivable polygon at every sample.
/// - EP: route progress between the start and the last waypoint, divided by
///   `scene.safe_progress_m` and clipped to [0, 1].
/// - TTC: 0 if, from any sample, extrapolating ego and vehicles at constant
///   velocity produces an overlap within `cfg.ttc_threshold_s`.
/// - Comfort: finite-difference acceleration and jerk magnitudes within bounds.
pub fn rollout_checks(
    plan: &PlanTrajectory,
    scene: &SceneSpec,
    cfg: &PdmsConfig,
) -> Result<PdmsBreakdown> {
    scene.validate()?;
    cfg.validate()?;
    let p = plan.positions();
    if p.iter().flatten().any(|v| !v.is_finite()) || !plan.start_heading.is_finite() {
        return Err(Error::NonFinite("plan waypoints".into()));
    }

    let samples = rollout(plan);
    let mut vehicle_hit = false;
    let mut static_hit = false;
    let mut dac = 1.0;
    for s in &samples {
        let ego = ego_box(scene, s.pos, s.heading);
        for a in &scene.agents {
            if ego.overlaps(&a.box_at(s.t)) {
                match a.kind {
                    AgentKind::Vehicle => vehicle_hit = true,
                    AgentKind::StaticObject => static_hit = true,
                }
            }
        }
        if dac == 1.0 && !inside_drivable(&ego, &scene.drivable_area) {
            dac = 0.0;
        }
    }
    let nc = if vehicle_hit {
        0.0
    } else if static_hit {
        0.5
    } else {
        1.0
    };

    let progress =
        project_arc_length(&scene.route, p[NUM_WAYPOINTS]) - project_arc_length(&scene.route, p[0]);
    let ep = (progress / scene.safe_progress_m).clamp(0.0, 1.0);

    let taus = lookahead_offsets(cfg.ttc_threshold_s);
    let vehicles: Vec<&Agent> = scene
        .agents
        .iter()
        .filter(|a| a.kind == AgentKind::Vehicle)
        .collect();
    let ttc_violated = samples.iter().any(|s| {
        taus.iter().any(|&tau| {
            let pos = [
                s.pos[0] + s.velocity[0] * tau,
                s.pos[1] + s.velocity[1] * tau,
            ];
            let ego = ego_box(scene, pos, s.heading);
            vehicles.iter().any(|a| ego.overlaps(&a.box_at(s.t + tau)))
        })
    });
    let ttc = if ttc_violated { 0.0 } else { 1.0 };
    let comfort = if comfortable(plan, cfg) { 1.0 } else { 0.0 };

    Ok(PdmsBreakdown::compose(nc, dac, ep, ttc, comfort))
}
