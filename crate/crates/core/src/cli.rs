//! The `lfg` command line.
//!
//! Every subcommand writes one JSON document, to `--out` (atomically) or to
//! standard output. Exit codes: 0 success, 2 invalid input, 3 computation
//! failure, 64 usage error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{normalize_geometry, FrameSequence, PointMap, Pose};
use crate::grid::{Grid, LabelMap, SemanticMap, NUM_CLASSES};
use crate::io::docs::{load_tracks, FuturesFile, ScenarioFile};
use crate::io::manifest::read_json;
use crate::io::{self, convert, load_manifest, load_sequence, Config, ManifestFile};
use crate::loss::{binary_ce, point_loss, pose_loss, seg_loss, total_loss, LossTerms, PairSet};
use crate::metrics::{
    align_depth_scale_shift, depth_metrics, mean_std, static_baseline, trajectory_scores,
    AbsentClassPolicy, ConfusionMatrix,
};
use crate::motion::generate_pseudo_gt;
use crate::planning::{
    decode_plan, kmeans_anchors, planning_losses, rollout_checks, AnchorSet, ModePrediction,
    PdmsBreakdown, PlanTrajectory,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 64;
/// Returned by `loss-check` when a gradient check fails.
pub const EXIT_CHECK_FAILED: i32 = 3;

pub const WORKERS_ENV: &str = "LFG_NUM_WORKERS";

#[derive(Debug, Args)]
struct Common {
    /// Write the JSON result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set loss.omega=5`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Also print the JSON result to standard output when `--out` is given.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Args)]
struct PairArgs {
    /// Prediction manifest; repeat for several sequences.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// Ground-truth manifest, paired with `--pred` by position.
    #[arg(long, required = true)]
    gt: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum FrameSel {
    #[default]
    All,
    Observed,
    Future,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// AbsRel / RMSE after per-frame scale-shift alignment.
    EvalDepth {
        #[command(flatten)]
        pairs: PairArgs,
        #[arg(long, value_enum, default_value_t)]
        frames: FrameSel,
    },
    /// ATE / rotation / translation error after Umeyama alignment.
    EvalTraj {
        #[command(flatten)]
        pairs: PairArgs,
        /// Align with a rigid transform instead of a similarity.
        #[arg(long)]
        rigid: bool,
    },
    /// PA / mIoU / mDice / FW-IoU over pooled frames.
    EvalSeg {
        #[command(flatten)]
        pairs: PairArgs,
        #[arg(long, value_enum, default_value_t)]
        frames: FrameSel,
        #[arg(long, value_enum, default_value_t)]
        absent: AbsentArg,
    },
    /// Scores repeating the last observed labels for every later frame.
    StaticBaseline {
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        /// First predicted frame; defaults to the manifest's num_observed.
        #[arg(long)]
        split: Option<usize>,
    },
    /// Motion-mask pseudo ground truth from instance tracks.
    GenMotionMasks {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        /// Directory for the per-frame mask tensors.
        #[arg(long)]
        mask_dir: Option<PathBuf>,
    },
    /// Finite-difference check of every analytic loss gradient.
    LossCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random instances per loss.
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// K-means anchors from ground-truth futures.
    ClusterAnchors {
        /// JSON file with `{"trajectories": [...]}`.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Highest-confidence mode plus its offsets; losses if `--gt` is given.
    DecodePlan {
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
    },
    /// PDMS breakdown for every scenario in a scenario file.
    ScorePdms {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Rescales a sequence by its mean point norm and writes it to `--out`.
    Normalize {
        #[arg(long)]
        manifest: PathBuf,
        /// Sequence id of the output; defaults to the input id.
        #[arg(long)]
        sequence_id: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum AbsentArg {
    #[default]
    Exclude,
    Zero,
    One,
}

impl From<AbsentArg> for AbsentClassPolicy {
    fn from(a: AbsentArg) -> Self {
        match a {
            AbsentArg::Exclude => AbsentClassPolicy::Exclude,
            AbsentArg::Zero => AbsentClassPolicy::Zero,
            AbsentArg::One => AbsentClassPolicy::One,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lfg",
    version,
    about = "Geometry, loss, metric and planning tools over LFGT tensors"
)]
struct Root {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let root = match Root::try_parse_from(argv) {
        Ok(r) => r,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let json = root.common.json;
    match run(root) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            if json {
                println!(
                    "{}",
                    json!({"error": {"code": e.code(), "message": e.to_string()}})
                );
            }
            e.exit_code()
        }
    }
}

fn run(root: Root) -> Result<i32> {
    let cfg = Config::load(root.common.config.as_deref(), &root.common.overrides)?;
    let c = &root.common;
    let (report, code) = match root.command {
        Command::EvalDepth { pairs, frames } => (eval_depth(&pairs, frames)?, EXIT_OK),
        Command::EvalTraj { pairs, rigid } => (eval_traj(&pairs, rigid)?, EXIT_OK),
        Command::EvalSeg {
            pairs,
            frames,
            absent,
        } => (eval_seg(&pairs, frames, absent.into())?, EXIT_OK),
        Command::StaticBaseline { manifest, split } => {
            (static_baseline_cmd(&manifest, split)?, EXIT_OK)
        }
        Command::GenMotionMasks {
            manifest,
            tracks,
            mask_dir,
        } => (
            gen_motion_masks(&manifest, &tracks, mask_dir.as_deref(), &cfg)?,
            EXIT_OK,
        ),
        Command::LossCheck { seed, points } => loss_check(seed, points, &cfg)?,
        Command::ClusterAnchors { gt, k, seed } => {
            let f: FuturesFile = read_json(&gt)?;
            (
                serde_value(&kmeans_anchors(&f.trajectories, k, seed)?)?,
                EXIT_OK,
            )
        }
        Command::DecodePlan {
            anchors,
            pred,
            gt,
            gamma,
        } => (decode_cmd(&anchors, &pred, gt.as_deref(), gamma)?, EXIT_OK),
        Command::ScorePdms { manifest } => (score_pdms(&manifest, &cfg)?, EXIT_OK),
        Command::Normalize {
            manifest,
            sequence_id,
        } => {
            let out = c
                .out
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("normalize needs --out <DIR>".into()))?;
            let report = normalize_cmd(&manifest, out, sequence_id.as_deref())?;
            // the output directory holds the sequence; the report goes to stdout
            print!("{}", io::to_json_string(&report)?);
            return Ok(EXIT_OK);
        }
    };
    match &c.out {
        Some(path) => {
            io::write_json(path, &report)?;
            if c.json {
                print!("{}", io::to_json_string(&report)?);
            }
        }
        None => print!("{}", io::to_json_string(&report)?),
    }
    Ok(code)
}

fn serde_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize result: {e}")))
}

/// Rayon pool sized by `LFG_NUM_WORKERS` (all cores when unset).
fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            Error::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got `{v}`"
            ))
        })?;
        b = b.num_threads(n);
    }
    let pool = b
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

struct Loaded {
    id: String,
    seq: FrameSequence,
}

fn load(path: &Path) -> Result<(ManifestFile, FrameSequence)> {
    let mf = load_manifest(path)?;
    let seq = load_sequence(&mf)?;
    Ok((mf, seq))
}

fn load_pairs(pairs: &PairArgs) -> Result<Vec<(Loaded, Loaded)>> {
    if pairs.pred.len() != pairs.gt.len() {
        return Err(Error::InvalidInput(format!(
            "{} --pred manifests but {} --gt manifests",
            pairs.pred.len(),
            pairs.gt.len()
        )));
    }
    let loaded: Vec<Result<(Loaded, Loaded)>> = with_pool(|| {
        pairs
            .pred
            .par_iter()
            .zip(&pairs.gt)
            .map(|(p, g)| {
                let (pm, ps) = load(p)?;
                let (gm, gs) = load(g)?;
                if pm.manifest.sequence_id != gm.manifest.sequence_id {
                    return Err(Error::Manifest(format!(
                        "prediction {} paired with ground truth {}",
                        pm.manifest.sequence_id, gm.manifest.sequence_id
                    )));
                }
                if ps.len() != gs.len() || ps.num_observed() != gs.num_observed() {
                    return Err(Error::Manifest(format!(
                        "{}: prediction and ground truth differ in frame layout",
                        pm.manifest.sequence_id
                    )));
                }
                Ok((
                    Loaded {
                        id: pm.manifest.sequence_id,
                        seq: ps,
                    },
                    Loaded {
                        id: gm.manifest.sequence_id,
                        seq: gs,
                    },
                ))
            })
            .collect()
    })?;
    let mut out = loaded.into_iter().collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    check_unique(out.iter().map(|p| p.0.id.as_str()))?;
    Ok(out)
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::InvalidInput(format!("sequence id {id} given twice")));
        }
    }
    Ok(())
}

fn frame_range(seq: &FrameSequence, sel: FrameSel) -> std::ops::Range<usize> {
    match sel {
        FrameSel::All => 0..seq.len(),
        FrameSel::Observed => 0..seq.num_observed(),
        FrameSel::Future => seq.num_observed()..seq.len(),
    }
}

/// Per-sequence metric rows plus their mean and population std.
fn aggregate(command: &str, rows: Vec<(String, Map<String, Value>)>, metrics: &[&str]) -> Value {
    let mut mean = Map::new();
    let mut std = Map::new();
    for m in metrics {
        let vals: Vec<f64> = rows
            .iter()
            .filter_map(|(_, r)| r.get(*m).and_then(Value::as_f64))
            .collect();
        if let Some((mu, sd)) = mean_std(&vals) {
            mean.insert(m.to_string(), json!(mu));
            std.insert(m.to_string(), json!(sd));
        }
    }
    let sequences: Vec<Value> = rows
        .into_iter()
        .map(|(id, mut r)| {
            r.insert("sequence_id".into(), json!(id));
            Value::Object(r)
        })
        .collect();
    json!({"command": command, "sequences": sequences, "mean": mean, "std": std})
}

fn missing(id: &str, frame: usize, what: &str) -> Error {
    Error::Manifest(format!("{id}: frame {frame} has no {what}"))
}

fn eval_depth(pairs: &PairArgs, sel: FrameSel) -> Result<Value> {
    let loaded = load_pairs(pairs)?;
    let rows = with_pool(|| {
        loaded
            .par_iter()
            .map(|(p, g)| {
                let range = frame_range(&g.seq, sel);
                let n = range.len();
                if n == 0 {
                    return Err(Error::InvalidInput(format!("{}: no frames selected", p.id)));
                }
                let (mut absrel, mut rmse) = (0.0, 0.0);
                for i in range {
                    let pd = p.seq.frames()[i]
                        .depth
                        .as_ref()
                        .ok_or_else(|| missing(&p.id, i, "depth"))?;
                    let gd = g.seq.frames()[i]
                        .depth
                        .as_ref()
                        .ok_or_else(|| missing(&g.id, i, "depth"))?;
                    let (_, aligned) = align_depth_scale_shift(pd, gd)?;
                    let s = depth_metrics(&aligned, gd)?;
                    absrel += s.absrel;
                    rmse += s.rmse_m;
                }
                let mut r = Map::new();
                r.insert("frames".into(), json!(n));
                r.insert("absrel".into(), json!(absrel / n as f64));
                r.insert("rmse_m".into(), json!(rmse / n as f64));
                Ok((p.id.clone(), r))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(aggregate("eval-depth", rows, &["absrel", "rmse_m"]))
}

fn poses_of(l: &Loaded) -> Result<Vec<Pose>> {
    l.seq
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| f.pose.ok_or_else(|| missing(&l.id, i, "pose")))
        .collect()
}

fn eval_traj(pairs: &PairArgs, rigid: bool) -> Result<Value> {
    let loaded = load_pairs(pairs)?;
    let rows = with_pool(|| {
        loaded
            .par_iter()
            .map(|(p, g)| {
                let s = trajectory_scores(&poses_of(p)?, &poses_of(g)?, !rigid)?;
                let mut r = Map::new();
                r.insert("frames".into(), json!(p.seq.len()));
                r.insert("ate_m".into(), json!(s.ate_m));
                r.insert("rot_deg".into(), json!(s.rot_deg));
                r.insert("trans_m".into(), json!(s.trans_m));
                Ok((p.id.clone(), r))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut v = aggregate("eval-traj", rows, &["ate_m", "rot_deg", "trans_m"]);
    v["alignment"] = json!(if rigid { "rigid" } else { "similarity" });
    Ok(v)
}

/// Label map of a frame, falling back to the argmax of its semantic map.
fn labels_of(l: &Loaded, i: usize) -> Result<LabelMap> {
    let f = &l.seq.frames()[i];
    match (&f.labels, &f.semantic) {
        (Some(lm), _) => Ok(lm.clone()),
        (None, Some(s)) => Ok(s.argmax()),
        (None, None) => Err(missing(&l.id, i, "label map or semantic map")),
    }
}

fn seg_row(
    cm: &ConfusionMatrix,
    policy: AbsentClassPolicy,
    frames: usize,
) -> Result<Map<String, Value>> {
    let s = cm.scores(policy)?;
    let mut r = Map::new();
    r.insert("frames".into(), json!(frames));
    r.insert("pa".into(), json!(s.pa));
    r.insert("miou".into(), json!(s.miou));
    r.insert("mdice".into(), json!(s.mdice));
    r.insert("fwiou".into(), json!(s.fwiou));
    Ok(r)
}

fn eval_seg(pairs: &PairArgs, sel: FrameSel, policy: AbsentClassPolicy) -> Result<Value> {
    let loaded = load_pairs(pairs)?;
    let rows = with_pool(|| {
        loaded
            .par_iter()
            .map(|(p, g)| {
                let range = frame_range(&g.seq, sel);
                let n = range.len();
                let mut cm = ConfusionMatrix::new();
                for i in range {
                    cm.accumulate(&labels_of(p, i)?, &labels_of(g, i)?)?;
                }
                Ok((p.id.clone(), seg_row(&cm, policy, n)?))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(aggregate(
        "eval-seg",
        rows,
        &["pa", "miou", "mdice", "fwiou"],
    ))
}

fn static_baseline_cmd(manifests: &[PathBuf], split: Option<usize>) -> Result<Value> {
    let mut rows = with_pool(|| {
        manifests
            .par_iter()
            .map(|m| {
                let (mf, seq) = load(m)?;
                let l = Loaded {
                    id: mf.manifest.sequence_id.clone(),
                    seq,
                };
                let labels = (0..l.seq.len())
                    .map(|i| labels_of(&l, i))
                    .collect::<Result<Vec<_>>>()?;
                let split = split.unwrap_or(l.seq.num_observed());
                let s = static_baseline(&labels, split)?;
                let mut r = Map::new();
                r.insert("split".into(), json!(split));
                r.insert("pa".into(), json!(s.pa));
                r.insert("miou".into(), json!(s.miou));
                r.insert("mdice".into(), json!(s.mdice));
                r.insert("fwiou".into(), json!(s.fwiou));
                Ok((l.id, r))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    check_unique(rows.iter().map(|r| r.0.as_str()))?;
    Ok(aggregate(
        "static-baseline",
        rows,
        &["pa", "miou", "mdice", "fwiou"],
    ))
}

fn gen_motion_masks(
    manifest: &Path,
    tracks: &Path,
    mask_dir: Option<&Path>,
    cfg: &Config,
) -> Result<Value> {
    let (mf, seq) = load(manifest)?;
    let id = &mf.manifest.sequence_id;
    let point_maps: Vec<PointMap> = seq
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            f.point_map
                .clone()
                .ok_or_else(|| missing(id, i, "point map"))
        })
        .collect::<Result<_>>()?;
    let poses: Option<Vec<Pose>> = seq.frames().iter().map(|f| f.pose).collect();
    let tracks = load_tracks(tracks)?;
    let gt = generate_pseudo_gt(&tracks, &point_maps, poses.as_deref(), &cfg.motion)?;

    let mut files = Vec::new();
    if let Some(dir) = mask_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, m) in gt.masks.iter().enumerate() {
            let name = format!("frame_{i:04}_motion.lfgt");
            io::write_tensor(&convert::motion_to_tensor(m), dir.join(&name))?;
            files.push(name);
        }
    }
    let dynamic_pixels: Vec<usize> = gt
        .masks
        .iter()
        .map(|m| m.as_slice().iter().filter(|&&v| v != 0.0).count())
        .collect();
    Ok(json!({
        "command": "gen-motion-masks",
        "sequence_id": id,
        "config": serde_value(&cfg.motion)?,
        "instances": serde_value(&gt.instances)?,
        "dynamic_pixels": dynamic_pixels,
        "mask_files": files,
    }))
}

/// Gradient checks, zero-at-target values and the total-loss recombination.
fn loss_check(seed: u64, points: usize, cfg: &Config) -> Result<(Value, i32)> {
    if points == 0 {
        return Err(Error::InvalidInput("--points must be at least 1".into()));
    }
    let checks = crate::gradcheck::run_all(seed, points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);

    let (h, w) = (4, 5);
    let labels: LabelMap = Grid::from_fn(h, w, |_, _| rng.gen_range(0..NUM_CLASSES as u8));
    let one_hot = SemanticMap::one_hot(&labels)?;
    let pm = PointMap::from_fn(h, w, |_, _| {
        Some(Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(1.0..3.0),
        ))
    });
    let binary = Grid::from_fn(h, w, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
    let all = Grid::filled(h, w, true);
    let poses: Vec<Pose> = (0..4)
        .map(|k| {
            Pose::from_axis_angle(
                Vector3::new(0.1 * k as f64, rng.gen_range(-0.5..0.5), 0.2),
                Vector3::new(k as f64, rng.gen_range(-1.0..1.0), 0.5),
            )
        })
        .collect();
    let lw = &cfg.loss;
    let zero = json!({
        "seg": seg_loss(&one_hot, &labels, &cfg.seg_loss.class_weights)?.0,
        "point": point_loss(&pm, &pm, lw.alpha)?.0,
        "motion": binary_ce(&binary, &binary, &all)?.0,
        "pose": pose_loss(&poses, &poses, PairSet::All, lw.huber_delta, lw.lambda_trans)?.value,
    });

    let mut term = || rng.gen_range(0.0..2.0);
    let cur = LossTerms::from_values(term(), term(), term(), term(), term());
    let fut = LossTerms::from_values(term(), term(), term(), term(), term());
    let report = total_loss(&cur, &fut, &cfg.loss)?;
    let recombination_error = (report.recombine() - report.total).abs();

    let passed = checks.iter().all(|c| c.passed) && recombination_error <= 1e-9;
    let v = json!({
        "command": "loss-check",
        "seed": seed,
        "points": points,
        "fd_step": crate::gradcheck::FD_STEP,
        "rel_tol": crate::gradcheck::REL_TOL,
        "gradient_checks": serde_value(&checks)?,
        "zero_at_target": zero,
        "total": serde_value(&report)?,
        "recombination_error": recombination_error,
        "passed": passed,
    });
    Ok((v, if passed { EXIT_OK } else { EXIT_CHECK_FAILED }))
}

fn decode_cmd(anchors: &Path, pred: &Path, gt: Option<&Path>, gamma: f64) -> Result<Value> {
    let anchors: AnchorSet = read_json(anchors)?;
    let pred: ModePrediction = read_json(pred)?;
    let (plan, mode) = decode_plan(&anchors, &pred)?;
    let mut v = json!({"command": "decode-plan", "mode": mode, "plan": serde_value(&plan)?});
    if let Some(gt) = gt {
        let gt: PlanTrajectory = read_json(gt)?;
        let l = planning_losses(&anchors, &pred, &gt, gamma)?;
        v["losses"] = json!({
            "gamma": gamma,
            "target_mode": l.target_mode,
            "focal": l.focal,
            "l1": l.l1,
        });
    }
    Ok(v)
}

fn score_pdms(path: &Path, cfg: &Config) -> Result<Value> {
    let file: ScenarioFile = read_json(path)?;
    file.validate()?;
    let mut order: Vec<_> = file.scenarios.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let scored = with_pool(|| {
        order
            .par_iter()
            .map(|s| {
                rollout_checks(&s.plan, &s.scene, &cfg.pdms).map_err(|e| Error::Scenario {
                    id: s.id.clone(),
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<PdmsBreakdown>>>()
    })??;
    let n = scored.len().max(1) as f64;
    let mean = |f: fn(&PdmsBreakdown) -> f64| scored.iter().map(f).sum::<f64>() / n;
    let scenarios: Vec<Value> = order
        .iter()
        .zip(&scored)
        .map(|(s, b)| json!({"id": s.id, "breakdown": serde_value(b).unwrap()}))
        .collect();
    Ok(json!({
        "command": "score-pdms",
        "config": serde_value(&cfg.pdms)?,
        "scenarios": scenarios,
        "mean": {
            "nc": mean(|b| b.nc),
            "dac": mean(|b| b.dac),
            "ep": mean(|b| b.ep),
            "ttc": mean(|b| b.ttc),
            "comfort": mean(|b| b.comfort),
            "pdms": mean(|b| b.pdms),
        },
    }))
}

fn normalize_cmd(manifest: &Path, out: &Path, id: Option<&str>) -> Result<Value> {
    let (mf, seq) = load(manifest)?;
    let (normalized, scale) = normalize_geometry(&seq)?;
    let id = id.unwrap_or(&mf.manifest.sequence_id);
    let path = io::write_sequence(out, id, mf.manifest.frame_rate_hz, &normalized, Some(scale))?;
    Ok(json!({
        "command": "normalize",
        "sequence_id": id,
        "scale": scale,
        "manifest": path.file_name().map(|n| n.to_string_lossy().into_owned()),
    }))
}
