//! Reference implementations written independently of the library, plus
//! fixtures shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use lfg_core::geometry::{Frame, FrameSequence, PointMap, Pose};
use lfg_core::grid::{Grid, LabelMap, Mask, NUM_CLASSES};
use lfg_core::io::write_sequence;
use lfg_core::motion::{DynamicRule, InstanceTrack, Keypoint, MotionConfig, MotionFrame};
use lfg_core::planning::{
    Agent, AgentKind, EgoFootprint, PlanTrajectory, SceneSpec, Waypoints, WAYPOINT_DT,
};
use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---- rotations and poses ------------------------------------------------

/// Uniform random rotation from a normalized Gaussian-ish quaternion.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            let [w, x, y, z] = q.map(|v| v / n);
            return Matrix3::new(
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            );
        }
    }
}

pub fn rz(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn random_vec<R: Rng>(rng: &mut R, scale: f64) -> Vector3<f64> {
    Vector3::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

pub fn random_pose<R: Rng>(rng: &mut R) -> Pose {
    Pose::new(random_rotation(rng), random_vec(rng, 5.0)).unwrap()
}

/// `arccos((tr(R1^T R2) - 1) / 2)` with the argument clamped to [-1, 1].
pub fn arccos_trace(r1: &Matrix3<f64>, r2: &Matrix3<f64>) -> f64 {
    let mut tr = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            tr += r1[(k, i)] * r2[(k, i)];
        }
    }
    ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

pub fn mat4_mul(a: &Matrix4<f64>, b: &Matrix4<f64>) -> Matrix4<f64> {
    let mut out = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

pub fn max_abs_diff4(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (0..16)
        .map(|i| (a[(i / 4, i % 4)] - b[(i / 4, i % 4)]).abs())
        .fold(0.0, f64::max)
}

// ---- grids --------------------------------------------------------------

/// Bilinear interpolation by explicit weights over the four neighbours.
pub fn bilinear_oracle(pm: &PointMap, x: f64, y: f64) -> Option<Vector3<f64>> {
    let (w, h) = (pm.width(), pm.height());
    let mut acc = Vector3::zeros();
    for yy in 0..h {
        for xx in 0..w {
            let wx = (1.0 - (x - xx as f64).abs()).max(0.0);
            let wy = (1.0 - (y - yy as f64).abs()).max(0.0);
            let weight = wx * wy;
            if weight > 0.0 {
                if !pm.valid()[yy * w + xx] {
                    return None;
                }
                acc += pm.points()[yy * w + xx] * weight;
            }
        }
    }
    Some(acc)
}

pub fn random_labels<R: Rng>(rng: &mut R, h: usize, w: usize) -> LabelMap {
    Grid::from_fn(h, w, |_, _| rng.gen_range(0..NUM_CLASSES as u8))
}

/// Per-pixel tally, then PA / mIoU / mDice / FW-IoU over present classes.
pub fn seg_oracle(pairs: &[(&LabelMap, &LabelMap)]) -> [f64; 4] {
    let mut cm = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (pred, gt) in pairs {
        for (p, g) in pred.as_slice().iter().zip(gt.as_slice()) {
            cm[*g as usize][*p as usize] += 1;
        }
    }
    let total: u64 = cm.iter().flatten().sum();
    let correct: u64 = (0..NUM_CLASSES).map(|c| cm[c][c]).sum();
    let (mut iou, mut dice, mut fw, mut present) = (0.0, 0.0, 0.0, 0);
    #[allow(clippy::needless_range_loop)]
    for c in 0..NUM_CLASSES {
        let gt_c: u64 = (0..NUM_CLASSES).map(|p| cm[c][p]).sum();
        let pred_c: u64 = (0..NUM_CLASSES).map(|g| cm[g][c]).sum();
        let inter = cm[c][c] as f64;
        if gt_c + pred_c == 0 {
            continue;
        }
        present += 1;
        let i = inter / (gt_c as f64 + pred_c as f64 - inter);
        iou += i;
        dice += 2.0 * inter / (gt_c + pred_c) as f64;
        fw += gt_c as f64 / total as f64 * i;
    }
    [
        correct as f64 / total as f64,
        iou / present as f64,
        dice / present as f64,
        fw,
    ]
}

/// AbsRel and RMSE by a plain loop over jointly valid pixels.
pub fn depth_oracle(aligned: &[f64], gt: &[f64], valid: &[bool]) -> (f64, f64) {
    let (mut rel, mut sq, mut n) = (0.0, 0.0, 0.0);
    for i in 0..gt.len() {
        if valid[i] {
            rel += (aligned[i] - gt[i]).abs() / gt[i];
            sq += (aligned[i] - gt[i]).powi(2);
            n += 1.0;
        }
    }
    (rel / n, (sq / n).sqrt())
}

// ---- motion -------------------------------------------------------------

pub struct MotionScene {
    pub tracks: Vec<InstanceTrack>,
    pub point_maps: Vec<PointMap>,
    pub poses: Vec<Pose>,
}

/// Random point maps with holes, random poses and tracks whose keypoints
/// drift by random per-frame steps (some static, some moving).
pub fn random_motion_scene<R: Rng>(rng: &mut R) -> MotionScene {
    let (h, w) = (rng.gen_range(6..12), rng.gen_range(6..12));
    let frames = rng.gen_range(3..7);
    let point_maps: Vec<PointMap> = (0..frames)
        .map(|_| {
            PointMap::from_fn(h, w, |x, y| {
                (rng.gen::<f64>() > 0.08).then(|| {
                    Vector3::new(
                        x as f64 * 0.1 + rng.gen_range(-0.01..0.01),
                        y as f64 * 0.1,
                        2.0 + rng.gen_range(0.0..0.5),
                    )
                })
            })
        })
        .collect();
    let poses: Vec<Pose> = (0..frames)
        .map(|t| Pose::new(rz(0.02 * t as f64), Vector3::new(0.05 * t as f64, 0.0, 0.0)).unwrap())
        .collect();
    let n_tracks = rng.gen_range(0..5);
    let mut tracks = Vec::new();
    for id in 0..n_tracks {
        let speed = if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.5..2.0)
        };
        let n_kp = rng.gen_range(1..5);
        let starts: Vec<(f64, f64)> = (0..n_kp)
            .map(|_| {
                (
                    rng.gen_range(0.0..(w - 1) as f64 * 0.5),
                    rng.gen_range(0.0..(h - 1) as f64),
                )
            })
            .collect();
        let keypoints: Vec<Vec<Keypoint>> = (0..frames)
            .map(|t| {
                starts
                    .iter()
                    .enumerate()
                    .map(|(k, &(x, y))| Keypoint {
                        x: x + speed * t as f64,
                        y,
                        // first keypoint always visible in the first frame
                        visible: (t == 0 && k == 0) || rng.gen_bool(0.85),
                    })
                    .collect()
            })
            .collect();
        let cx = rng.gen_range(0..w);
        let first: Mask = Grid::from_fn(h, w, |x, y| {
            (x as isize - cx as isize).abs() <= 1 && y < h / 2
        });
        let per_frame = rng.gen_bool(0.5).then(|| {
            (0..frames)
                .map(|t| Grid::from_fn(h, w, |x, _| (x + t) % w == cx))
                .collect::<Vec<Mask>>()
        });
        // shuffle ids so ordering by id differs from input order
        let iid = (id * 7 + 3) % 11;
        if let Ok(tr) = InstanceTrack::new(iid as u32, first, per_frame, keypoints) {
            tracks.push(tr);
        }
    }
    MotionScene {
        tracks,
        point_maps,
        poses,
    }
}

/// Per-instance dynamic flags and the rasterized masks, recomputed from
/// scratch; `None` when some track has no usable displacement.
/// `(instance id, displacements, dynamic)` per track, sorted by id.
pub type OracleInstances = Vec<(u32, Vec<f64>, bool)>;

pub fn motion_oracle(
    scene: &MotionScene,
    cfg: &MotionConfig,
) -> Option<(OracleInstances, Vec<Vec<f64>>)> {
    let frames = scene.point_maps.len();
    let (h, w) = (scene.point_maps[0].height(), scene.point_maps[0].width());
    let mut ids: Vec<usize> = (0..scene.tracks.len()).collect();
    ids.sort_by_key(|&i| scene.tracks[i].instance_id());
    let mut summaries = Vec::new();
    let mut masks = vec![vec![0.0; h * w]; frames];
    for &i in &ids {
        let tr = &scene.tracks[i];
        let mut cents: Vec<Option<Vector3<f64>>> = Vec::new();
        for t in 0..frames {
            let pm = &scene.point_maps[t];
            let mut pts = Vec::new();
            for kp in &tr.keypoints()[t] {
                let inside =
                    kp.x >= 0.0 && kp.y >= 0.0 && kp.x <= (w - 1) as f64 && kp.y <= (h - 1) as f64;
                if kp.visible && inside {
                    if let Some(p) = bilinear_oracle(pm, kp.x, kp.y) {
                        pts.push(p);
                    }
                }
            }
            let c = if pts.is_empty() {
                None
            } else {
                let mut s = Vector3::zeros();
                for p in &pts {
                    s += p;
                }
                let c = s / pts.len() as f64;
                Some(match cfg.frame {
                    MotionFrame::World => {
                        let m = scene.poses[t].to_matrix();
                        Vector3::from_fn(|r, _| {
                            m[(r, 0)] * c.x + m[(r, 1)] * c.y + m[(r, 2)] * c.z + m[(r, 3)]
                        })
                    }
                    MotionFrame::Camera => c,
                })
            };
            cents.push(c);
        }
        let mut d = Vec::new();
        for t in 0..frames - 1 {
            if let (Some(a), Some(b)) = (cents[t], cents[t + 1]) {
                d.push(((b.x - a.x).powi(2) + (b.y - a.y).powi(2) + (b.z - a.z).powi(2)).sqrt());
            }
        }
        if d.is_empty() {
            return None;
        }
        let above = d.iter().filter(|&&v| v > cfg.tau_motion).count();
        let dynamic = match cfg.rule {
            DynamicRule::Majority => above * 2 > d.len(),
            DynamicRule::KMin => above >= cfg.k_min,
        };
        if dynamic {
            for (t, out) in masks.iter_mut().enumerate() {
                let m = tr.frame_masks().map_or(tr.first_frame_mask(), |v| &v[t]);
                for (o, &b) in out.iter_mut().zip(m.as_slice()) {
                    if b {
                        *o = 1.0;
                    }
                }
            }
        }
        summaries.push((tr.instance_id(), d, dynamic));
    }
    Some((summaries, masks))
}

// ---- k-means ------------------------------------------------------------

/// Lloyd's algorithm written out directly: assign, average, re-seed empty
/// clusters from the point farthest from its centroid, repeat. Returns the
/// objective after each assignment and the final centroids.
pub fn lloyd_oracle(
    data: &[Vec<f64>],
    init: &[Vec<f64>],
    max_iter: usize,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = init.len();
    let dist =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum() };
    let assign = |cents: &[Vec<f64>]| -> (Vec<usize>, f64) {
        let mut a = vec![0; data.len()];
        let mut obj = 0.0;
        for (i, p) in data.iter().enumerate() {
            let mut best = 0;
            for c in 1..k {
                if dist(p, &cents[c]) < dist(p, &cents[best]) {
                    best = c;
                }
            }
            a[i] = best;
            obj += dist(p, &cents[best]);
        }
        (a, obj)
    };
    let mut cents = init.to_vec();
    let (mut a, obj) = assign(&cents);
    let mut hist = vec![obj];
    for _ in 0..max_iter {
        let mut counts = vec![0usize; k];
        for &c in &a {
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mut m = vec![0.0; data[0].len()];
            for (p, &ci) in data.iter().zip(&a) {
                if ci == c {
                    for (mv, pv) in m.iter_mut().zip(p) {
                        *mv += pv;
                    }
                }
            }
            cents[c] = m.iter().map(|v| v / counts[c] as f64).collect();
        }
        let mut reseeded = false;
        for c in 0..k {
            if counts[c] != 0 {
                continue;
            }
            let cand = (0..data.len()).filter(|&i| counts[a[i]] > 1).fold(
                None,
                |best: Option<(usize, f64)>, i| {
                    let d = dist(&data[i], &cents[a[i]]);
                    match best {
                        Some((_, bd)) if bd >= d => best,
                        _ => Some((i, d)),
                    }
                },
            );
            if let Some((i, _)) = cand {
                counts[a[i]] -= 1;
                a[i] = c;
                counts[c] = 1;
                cents[c] = data[i].clone();
                reseeded = true;
            }
        }
        let (next, obj) = assign(&cents);
        hist.push(obj);
        let done = !reseeded && next == a;
        a = next;
        if done {
            break;
        }
    }
    (hist, cents)
}

// ---- planning -----------------------------------------------------------

pub fn corridor() -> SceneSpec {
    SceneSpec {
        drivable_area: vec![[-10.0, -5.0], [100.0, -5.0], [100.0, 5.0], [-10.0, 5.0]],
        agents: vec![],
        ego: EgoFootprint::default(),
        route: vec![[0.0, 0.0], [100.0, 0.0]],
        safe_progress_m: 40.0,
    }
}

pub fn straight(speed: f64) -> PlanTrajectory {
    let w: Waypoints = std::array::from_fn(|k| [(k + 1) as f64 * speed * WAYPOINT_DT, 0.0]);
    PlanTrajectory::new(w)
}

pub fn vehicle(center: [f64; 2], velocity: [f64; 2]) -> Agent {
    Agent {
        kind: AgentKind::Vehicle,
        center,
        heading: 0.0,
        length: 4.0,
        width: 1.8,
        velocity,
    }
}

/// A plan that stays in the corridor and drives through a stopped car.
pub fn collision_scene() -> (PlanTrajectory, SceneSpec) {
    let mut s = corridor();
    s.agents.push(vehicle([20.0, 0.0], [0.0, 0.0]));
    (straight(10.0), s)
}

/// Progress 16 of 20 m with a jerky speed profile and no other issue:
/// breakdown (1, 1, 0.8, 1, 0).
pub fn ep_comfort_scene() -> (PlanTrajectory, SceneSpec) {
    let xs = [1.0, 2.0, 6.0, 7.0, 8.0, 12.0, 13.0, 16.0];
    let plan = PlanTrajectory::new(std::array::from_fn(|k| [xs[k], 0.0]));
    let mut s = corridor();
    s.safe_progress_m = 20.0;
    (plan, s)
}

/// Index of the maximum, first on ties, then `anchor + offset` by loops.
pub fn decode_oracle(
    anchors: &[Waypoints],
    conf: &[f64],
    offsets: &[Waypoints],
) -> (usize, Waypoints) {
    let mut best = 0;
    for i in 0..conf.len() {
        if conf[i] > conf[best] {
            best = i;
        }
    }
    let mut out = anchors[best];
    for k in 0..out.len() {
        for c in 0..2 {
            out[k][c] += offsets[best][k][c];
        }
    }
    (best, out)
}

/// `-ln softmax(z)_t` via log-sum-exp.
pub fn cross_entropy(z: &[f64], t: usize) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[t]
}

// ---- files --------------------------------------------------------------

/// Writes a sequence with label maps only; `labels[t]` per frame.
pub fn write_label_sequence(
    dir: &Path,
    id: &str,
    observed: usize,
    labels: Vec<LabelMap>,
) -> PathBuf {
    let future = labels.len() - observed;
    let frames = labels
        .into_iter()
        .map(|l| Frame {
            labels: Some(l),
            ..Frame::default()
        })
        .collect();
    write_sequence(
        dir,
        id,
        10,
        &FrameSequence::new(observed, future, frames).unwrap(),
        None,
    )
    .unwrap()
}

pub fn lfg_bin() -> &'static str {
    env!("CARGO_BIN_EXE_lfg")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_lfg(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = std::process::Command::new(lfg_bin());
    cmd.args(args).env_remove("LFG_NUM_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn lfg");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}
