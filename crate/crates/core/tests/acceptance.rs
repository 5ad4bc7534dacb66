//! Acceptance runner: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p lfg-core --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use lfg_core::geometry::{geodesic_rotation_distance, relative_pose, Pose};
use lfg_core::gradcheck;
use lfg_core::grid::{DepthMap, Grid, SemanticMap};
use lfg_core::io::{decode, encode, read_tensor, write_tensor, Tensor, TensorData};
use lfg_core::loss::{
    binary_ce, confidence_target, point_loss, pose_loss, seg_loss, total_loss, ClassWeightTable,
    LossTerms, LossWeights, PairSet,
};
use lfg_core::metrics::{
    align_depth_scale_shift, depth_metrics, seg_scores, static_baseline, trajectory_scores,
    umeyama_align,
};
use lfg_core::motion::{classify_dynamic, generate_pseudo_gt, MotionConfig};
use lfg_core::planning::{
    decode_plan, flatten, kmeans_anchors, kmeans_plus_plus_init, lloyd, planning_losses,
    rollout_checks, AnchorSet, ModePrediction, PdmsBreakdown, PdmsConfig, PlanTrajectory, Rigid2,
    MAX_LLOYD_ITERATIONS, PLAN_DIM,
};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn geometry() -> Outcome {
    let mut r = rng(1);
    let mut worst_geo: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for _ in 0..10_000 {
        let (a, b) = (random_rotation(&mut r), random_rotation(&mut r));
        let d = geodesic_rotation_distance(&a, &b).map_err(|e| e.to_string())?;
        let d_rev = geodesic_rotation_distance(&b, &a).map_err(|e| e.to_string())?;
        let d_self = geodesic_rotation_distance(&a, &a).map_err(|e| e.to_string())?;
        ensure!(
            d == d_rev && d >= 0.0 && d_self < 1e-6,
            "symmetry/non-negativity/identity violated"
        );
        worst_geo = worst_geo.max((d - arccos_trace(&a, &b)).abs());

        let (pa, pb) = (random_pose(&mut r), random_pose(&mut r));
        let rel = relative_pose(&pa, &pb);
        let back = mat4_mul(&pa.to_matrix(), &rel.to_matrix());
        worst_rel = worst_rel.max(max_abs_diff4(&back, &pb.to_matrix()));
    }
    ensure!(
        worst_geo <= 1e-6,
        "geodesic vs arccos-trace oracle: max error {worst_geo:e}"
    );
    ensure!(
        worst_rel < 1e-6,
        "relative-pose round trip: max error {worst_rel:e}"
    );
    Ok(format!(
        "1e4 pairs, geodesic err {worst_geo:.1e}, round-trip err {worst_rel:.1e}"
    ))
}

fn alignment() -> Outcome {
    let mut r = rng(2);
    let (s, rot, t) = (2.0, rz(0.5), Vector3::new(1.0, 2.0, 3.0));
    let pred: Vec<Vector3<f64>> = (0..10).map(|_| random_vec(&mut r, 5.0)).collect();
    let gt: Vec<Vector3<f64>> = pred.iter().map(|p| s * (rot * p) + t).collect();
    let sim = umeyama_align(&pred, &gt, true).map_err(|e| e.to_string())?;
    let err = (sim.scale - s)
        .abs()
        .max((sim.rotation - rot).abs().max())
        .max((sim.translation - t).abs().max());
    ensure!(err <= 1e-9, "recovery error {err:e}");

    let mut worst_ate: f64 = 0.0;
    for _ in 0..50 {
        let poses: Vec<Pose> = (0..10).map(|_| random_pose(&mut r)).collect();
        let (gs, gr, gt) = (
            r.gen_range(0.2..5.0),
            random_rotation(&mut r),
            random_vec(&mut r, 10.0),
        );
        let moved: Vec<Pose> = poses
            .iter()
            .map(|p| Pose::new(gr * p.rotation(), gs * (gr * p.translation()) + gt).unwrap())
            .collect();
        let sc = trajectory_scores(&poses, &moved, true).map_err(|e| e.to_string())?;
        worst_ate = worst_ate.max(sc.ate_m);
    }
    ensure!(
        worst_ate < 1e-6,
        "ATE after global similarity {worst_ate:e}"
    );
    Ok(format!(
        "recovery err {err:.1e}, worst gauge ATE {worst_ate:.1e}"
    ))
}

fn depth() -> Outcome {
    let mut r = rng(3);
    let n = 16 * 16;
    let pred: Vec<f64> = (0..n)
        .map(|i| {
            if i % 17 == 0 {
                f64::NAN
            } else {
                r.gen_range(0.5..30.0)
            }
        })
        .collect();
    let gt: Vec<f64> = pred.iter().map(|p| 2.0 * p + 3.0).collect();
    let pm = DepthMap::from_raw(16, 16, pred).unwrap();
    let gm = DepthMap::from_raw(16, 16, gt).unwrap();
    let (ss, aligned) = align_depth_scale_shift(&pm, &gm).map_err(|e| e.to_string())?;
    let fit = (ss.scale - 2.0).abs().max((ss.shift - 3.0).abs());
    ensure!(
        fit < 1e-12,
        "constructed (2, 3): got ({}, {})",
        ss.scale,
        ss.shift
    );
    let sc = depth_metrics(&aligned, &gm).map_err(|e| e.to_string())?;
    ensure!(sc.rmse_m < 1e-12, "constructed residual {}", sc.rmse_m);

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let raw = |r: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if r.gen_bool(0.1) {
                        0.0
                    } else {
                        r.gen_range(0.5..80.0)
                    }
                })
                .collect()
        };
        let (p, g) = (raw(&mut r), raw(&mut r));
        let pm = DepthMap::from_raw(16, 16, p).unwrap();
        let gm = DepthMap::from_raw(16, 16, g).unwrap();
        let (_, aligned) = align_depth_scale_shift(&pm, &gm).map_err(|e| e.to_string())?;
        let sc = depth_metrics(&aligned, &gm).map_err(|e| e.to_string())?;
        let joint: Vec<bool> = pm
            .valid()
            .iter()
            .zip(gm.valid())
            .map(|(a, b)| *a && *b)
            .collect();
        let (rel, rmse) = depth_oracle(aligned.depth(), gm.depth(), &joint);
        worst = worst
            .max((sc.absrel - rel).abs())
            .max((sc.rmse_m - rmse).abs());
    }
    ensure!(worst <= 1e-12, "loop oracle mismatch {worst:e}");
    Ok(format!(
        "fit err {fit:.1e}, 100 maps vs loop oracle {worst:.1e}"
    ))
}

fn segmentation() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (p, g) = (random_labels(&mut r, 16, 16), random_labels(&mut r, 16, 16));
        let s = seg_scores(&p, &g).map_err(|e| e.to_string())?;
        let o = seg_oracle(&[(&p, &g)]);
        for (a, b) in [s.pa, s.miou, s.mdice, s.fwiou].iter().zip(o) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure!(worst <= 1e-12, "confusion oracle mismatch {worst:e}");

    let frame = random_labels(&mut r, 16, 16);
    let seq = vec![frame; 6];
    let sb = static_baseline(&seq, 3).map_err(|e| e.to_string())?;
    ensure!(
        [sb.pa, sb.miou, sb.mdice, sb.fwiou] == [1.0; 4],
        "static baseline on a static sequence: {sb:?}"
    );
    let dir = tempfile::tempdir().unwrap();
    let m = write_label_sequence(dir.path(), "static", 3, seq);
    let out = run_lfg(&["static-baseline", "--manifest", m.to_str().unwrap()], &[]);
    ensure!(
        out.code == 0,
        "static-baseline exit {}: {}",
        out.code,
        out.stderr
    );
    let v: Value = serde_json::from_str(&out.stdout).map_err(|e| e.to_string())?;
    for k in ["pa", "miou", "mdice", "fwiou"] {
        ensure!(
            v["mean"][k] == 1.0,
            "CLI static-baseline {k} = {}",
            v["mean"][k]
        );
    }
    Ok(format!(
        "100 pairs vs oracle {worst:.1e}, static baseline 1.0 (library and CLI)"
    ))
}

fn losses() -> Outcome {
    let mut r = rng(5);
    let (h, w) = (5, 6);
    let labels = random_labels(&mut r, h, w);
    let pm = lfg_core::geometry::PointMap::from_fn(h, w, |_, _| Some(random_vec(&mut r, 2.0)));
    let binary = Grid::from_fn(h, w, |_, _| if r.gen_bool(0.5) { 1.0 } else { 0.0 });
    let all = Grid::filled(h, w, true);
    let poses: Vec<Pose> = (0..5).map(|_| random_pose(&mut r)).collect();
    let conf_t = confidence_target(&pm, &pm, 0.1).map_err(|e| e.to_string())?;
    let anchors = AnchorSet {
        anchors: vec![
            straight(5.0).waypoints,
            straight(8.0).waypoints,
            straight(11.0).waypoints,
        ],
        seed: 0,
        objective_history: vec![],
    };
    let peaked = ModePrediction {
        confidences: vec![0.0, 40.0, 0.0],
        offsets: vec![[[0.0; 2]; 8]; 3],
    };
    let plan =
        planning_losses(&anchors, &peaked, &straight(8.0), 2.0).map_err(|e| e.to_string())?;
    let zeros = [
        (
            "seg",
            seg_loss(
                &SemanticMap::one_hot(&labels).unwrap(),
                &labels,
                &ClassWeightTable::default(),
            )
            .unwrap()
            .0,
        ),
        ("point", point_loss(&pm, &pm, 1.0).unwrap().0),
        ("motion", binary_ce(&binary, &binary, &all).unwrap().0),
        (
            "conf",
            binary_ce(&conf_t.labels, &conf_t.labels, &conf_t.mask)
                .unwrap()
                .0,
        ),
        (
            "pose",
            pose_loss(&poses, &poses, PairSet::All, 1.0, 0.1)
                .unwrap()
                .value,
        ),
        ("focal", plan.focal),
        ("plan_l1", plan.l1),
    ];
    for (name, v) in zeros {
        ensure!((0.0..=1e-6).contains(&v), "{name} at target = {v:e}");
    }

    let checks = gradcheck::run_all(5, 100).map_err(|e| e.to_string())?;
    let worst_fd = checks
        .iter()
        .map(|c| c.max_relative_error)
        .fold(0.0, f64::max);
    for c in &checks {
        ensure!(
            c.passed && c.instances == 100,
            "gradient check {} failed: {:e}",
            c.loss,
            c.max_relative_error
        );
    }

    let wts = LossWeights::default();
    ensure!(
        (
            wts.alpha,
            wts.lambda_conf,
            wts.lambda_seg,
            wts.lambda_motion,
            wts.omega
        ) == (1.0, 0.05, 1.0, 1.0, 10.0),
        "default constants {wts:?}"
    );
    let mut worst_rc: f64 = 0.0;
    for _ in 0..100 {
        let c: [f64; 5] = std::array::from_fn(|_| r.gen_range(0.0..5.0));
        let f: [f64; 5] = std::array::from_fn(|_| r.gen_range(0.0..5.0));
        let rep = total_loss(
            &LossTerms::from_values(c[0], c[1], c[2], c[3], c[4]),
            &LossTerms::from_values(f[0], f[1], f[2], f[3], f[4]),
            &wts,
        )
        .map_err(|e| e.to_string())?;
        // seg, pose, point, motion, conf
        let lam = [1.0, 1.0, 1.0, 1.0, 0.05];
        let cur: f64 = (0..5).map(|k| lam[k] * c[k]).sum();
        let fut: f64 = (0..5).map(|k| lam[k] * f[k]).sum();
        let oracle = cur + 1.0 * 10.0 * fut;
        worst_rc = worst_rc
            .max((rep.total - oracle).abs())
            .max((rep.recombine() - rep.total).abs());
    }
    ensure!(worst_rc <= 1e-9, "recombination error {worst_rc:e}");
    Ok(format!(
        "7 losses zero at target, 7x100 gradient checks (worst {worst_fd:.1e}), recombination {worst_rc:.1e}"
    ))
}

fn motion() -> Outcome {
    let mut r = rng(6);
    let cfg = MotionConfig::default();
    let (mut compared, mut dynamic_seen, mut worst) = (0, 0, 0.0f64);
    for scene_ix in 0..50 {
        let scene = random_motion_scene(&mut r);
        let got = generate_pseudo_gt(&scene.tracks, &scene.point_maps, Some(&scene.poses), &cfg);
        let Some((inst, masks)) = motion_oracle(&scene, &cfg) else {
            ensure!(
                got.is_err(),
                "scene {scene_ix}: oracle finds an unusable track, pipeline succeeded"
            );
            continue;
        };
        let got = got.map_err(|e| format!("scene {scene_ix}: {e}"))?;
        ensure!(
            got.instances.len() == inst.len(),
            "scene {scene_ix}: instance count"
        );
        for (s, (id, d, dynamic)) in got.instances.iter().zip(&inst) {
            ensure!(
                s.instance_id == *id && s.dynamic == *dynamic,
                "scene {scene_ix}: instance {id} label"
            );
            ensure!(
                s.displacements.len() == d.len(),
                "scene {scene_ix}: instance {id} series length"
            );
            for (a, b) in s.displacements.iter().zip(d) {
                worst = worst.max((a - b).abs());
            }
            dynamic_seen += *dynamic as usize;
        }
        for (m, o) in got.masks.iter().zip(&masks) {
            ensure!(
                m.as_slice() == &o[..],
                "scene {scene_ix}: mask differs from OR oracle"
            );
        }
        compared += 1;

        for factor in [0.25, 2.0, 8.0] {
            let scaled_maps: Vec<_> = scene.point_maps.iter().map(|p| p.scaled(factor)).collect();
            let scaled_poses: Vec<_> = scene
                .poses
                .iter()
                .map(|p| p.with_scaled_translation(factor))
                .collect();
            let scaled_cfg = MotionConfig {
                tau_motion: cfg.tau_motion * factor,
                ..cfg
            };
            let s = generate_pseudo_gt(
                &scene.tracks,
                &scaled_maps,
                Some(&scaled_poses),
                &scaled_cfg,
            )
            .map_err(|e| e.to_string())?;
            ensure!(
                s.masks == got.masks,
                "scene {scene_ix}: masks change under rescaling by {factor}"
            );
            for (a, b) in s.instances.iter().zip(&got.instances) {
                ensure!(
                    a.dynamic == b.dynamic,
                    "scene {scene_ix}: label changes under rescaling"
                );
                ensure!(
                    a.displacements
                        .iter()
                        .zip(&b.displacements)
                        .all(|(x, y)| *x == y * factor),
                    "scene {scene_ix}: displacements not scaled exactly by {factor}"
                );
            }
        }
    }
    ensure!(
        compared >= 40 && dynamic_seen > 0,
        "only {compared} comparable scenes, {dynamic_seen} dynamic"
    );
    ensure!(worst <= 1e-12, "displacement mismatch {worst:e}");
    ensure!(
        classify_dynamic(&[0.2, 0.2, 0.2], &cfg),
        "[0.2, 0.2, 0.2] should be dynamic"
    );
    ensure!(
        !classify_dynamic(&[0.2, 0.05, 0.05], &cfg),
        "[0.2, 0.05, 0.05] should be static"
    );
    Ok(format!("{compared} scenes match brute force ({worst:.1e}), reference series classified, rescaling exact"))
}

fn random_futures(r: &mut ChaCha8Rng, n: usize) -> Vec<PlanTrajectory> {
    let centers: Vec<(f64, f64)> = (0..5)
        .map(|_| (r.gen_range(1.0..12.0), r.gen_range(-0.4..0.4)))
        .collect();
    (0..n)
        .map(|_| {
            let (v, c) = centers[r.gen_range(0..centers.len())];
            let v = v + r.gen_range(-0.5..0.5);
            PlanTrajectory::new(std::array::from_fn(|k| {
                let s = (k + 1) as f64 * 0.5 * v;
                [s, c * s * s / 10.0 + r.gen_range(-0.2..0.2)]
            }))
        })
        .collect()
}

fn planning() -> Outcome {
    let mut r = rng(7);
    let mut worst_lloyd: f64 = 0.0;
    for trial in 0..20 {
        let futures = random_futures(&mut r, 120);
        let (k, seed) = (r.gen_range(2..12), r.gen::<u64>());
        let a = kmeans_anchors(&futures, k, seed).map_err(|e| e.to_string())?;
        let b = kmeans_anchors(&futures, k, seed).map_err(|e| e.to_string())?;
        ensure!(a == b, "trial {trial}: same seed, different anchors");
        ensure!(
            a.objective_history.windows(2).all(|w| w[1] <= w[0]),
            "trial {trial}: objective increased: {:?}",
            a.objective_history
        );

        let data: Vec<[f64; PLAN_DIM]> = futures.iter().map(|f| flatten(&f.waypoints)).collect();
        let init = kmeans_plus_plus_init(&data, k, &mut ChaCha8Rng::seed_from_u64(seed));
        let run = lloyd(&data, init.clone(), MAX_LLOYD_ITERATIONS);
        let as_vec =
            |v: &[[f64; PLAN_DIM]]| -> Vec<Vec<f64>> { v.iter().map(|x| x.to_vec()).collect() };
        let (hist, cents) = lloyd_oracle(&as_vec(&data), &as_vec(&init), MAX_LLOYD_ITERATIONS);
        ensure!(
            hist.len() == run.objective_history.len(),
            "trial {trial}: iteration count differs from oracle"
        );
        for (x, y) in hist.iter().zip(&run.objective_history) {
            worst_lloyd = worst_lloyd.max((x - y).abs() / y.max(1.0));
        }
        for (x, y) in cents.iter().zip(&run.centroids) {
            for (u, v) in x.iter().zip(y) {
                worst_lloyd = worst_lloyd.max((u - v).abs());
            }
        }
        ensure!(
            run.objective_history == a.objective_history,
            "trial {trial}: anchors not from the seeded run"
        );
    }
    ensure!(worst_lloyd <= 1e-9, "Lloyd oracle mismatch {worst_lloyd:e}");

    let anchors = kmeans_anchors(&random_futures(&mut r, 60), 6, 3).unwrap();
    let transforms: [fn(f64) -> f64; 5] = [
        f64::exp,
        |x| 3.0 * x - 7.0,
        f64::atan,
        |x| x * x * x,
        |x| 1.0 / (1.0 + (-x).exp()),
    ];
    let mut worst_ce: f64 = 0.0;
    for _ in 0..200 {
        let pred = ModePrediction {
            confidences: (0..6).map(|_| r.gen_range(-3.0..3.0)).collect(),
            offsets: (0..6)
                .map(|_| std::array::from_fn(|_| [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]))
                .collect(),
        };
        let (plan, mode) = decode_plan(&anchors, &pred).map_err(|e| e.to_string())?;
        let (omode, oplan) = decode_oracle(&anchors.anchors, &pred.confidences, &pred.offsets);
        ensure!(
            mode == omode && plan.waypoints == oplan,
            "decode differs from argmax-and-add oracle"
        );
        for f in transforms {
            let t = ModePrediction {
                confidences: pred.confidences.iter().map(|&c| f(c)).collect(),
                ..pred.clone()
            };
            ensure!(
                decode_plan(&anchors, &t).unwrap().1 == mode,
                "argmax changed under a monotone transform"
            );
        }
        let gt = PlanTrajectory::new(anchors.anchors[r.gen_range(0..6)]);
        let l = planning_losses(&anchors, &pred, &gt, 0.0).map_err(|e| e.to_string())?;
        worst_ce = worst_ce.max((l.focal - cross_entropy(&pred.confidences, l.target_mode)).abs());
    }
    ensure!(
        worst_ce <= 1e-12,
        "focal(gamma=0) vs cross-entropy {worst_ce:e}"
    );

    let cfg = PdmsConfig::default();
    let (plan, scene) = ep_comfort_scene();
    let b = rollout_checks(&plan, &scene, &cfg).map_err(|e| e.to_string())?;
    ensure!(
        (b.nc, b.dac, b.ttc, b.comfort) == (1.0, 1.0, 1.0, 0.0) && (b.ep - 0.8).abs() < 1e-12,
        "expected (1, 1, 0.8, 1, 0), got {b:?}"
    );
    ensure!(
        (b.pdms - 0.75).abs() < 1e-12,
        "pdms {} (expected 0.75)",
        b.pdms
    );
    ensure!(
        PdmsBreakdown::compose(1.0, 1.0, 0.8, 1.0, 0.0).pdms == (5.0 * 0.8 + 5.0) / 12.0,
        "composition formula"
    );
    let (cplan, cscene) = collision_scene();
    let c = rollout_checks(&cplan, &cscene, &cfg).map_err(|e| e.to_string())?;
    ensure!(c.nc == 0.0 && c.pdms == 0.0, "collision: {c:?}");

    let mut worst_eq: f64 = 0.0;
    let mut clean = corridor();
    clean.agents.push(vehicle([60.0, 3.5], [2.0, 0.0]));
    let cases = [(plan, scene), (cplan, cscene), (straight(10.0), clean)];
    for _ in 0..50 {
        let tf = Rigid2 {
            angle: r.gen_range(-3.1..3.1),
            translation: [r.gen_range(-500.0..500.0), r.gen_range(-500.0..500.0)],
        };
        for (p, s) in &cases {
            let base = rollout_checks(p, s, &cfg).unwrap();
            let moved = rollout_checks(&p.transformed(&tf), &s.transformed(&tf), &cfg)
                .map_err(|e| e.to_string())?;
            for (x, y) in [
                (base.nc, moved.nc),
                (base.dac, moved.dac),
                (base.ep, moved.ep),
                (base.ttc, moved.ttc),
                (base.comfort, moved.comfort),
                (base.pdms, moved.pdms),
            ] {
                worst_eq = worst_eq.max((x - y).abs());
            }
        }
    }
    ensure!(
        worst_eq <= 1e-9,
        "rigid-transform equivariance {worst_eq:e}"
    );
    Ok(format!(
        "k-means monotone+reproducible (oracle {worst_lloyd:.1e}), argmax invariant, CE {worst_ce:.1e}, 0.75 and 0 reproduced, equivariance {worst_eq:.1e}"
    ))
}

fn random_tensor(r: &mut ChaCha8Rng) -> Tensor {
    let ndim = r.gen_range(0..5);
    let shape: Vec<usize> = (0..ndim).map(|_| r.gen_range(0..6)).collect();
    let n: usize = shape.iter().product();
    let data = match r.gen_range(0..3) {
        0 => TensorData::F32((0..n).map(|_| f32::from_bits(r.gen())).collect()),
        1 => TensorData::U8((0..n).map(|_| r.gen()).collect()),
        _ => TensorData::I32((0..n).map(|_| r.gen()).collect()),
    };
    Tensor::new(shape, data).unwrap()
}

fn expect_code(run: &Run, exit: i32, code: &str) -> Result<(), String> {
    ensure!(
        run.code == exit && run.stderr.contains(&format!("error[{code}]")),
        "expected exit {exit} with {code}, got exit {} and stderr {:?}",
        run.code,
        run.stderr
    );
    Ok(())
}

fn io_cli() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(8);
    for i in 0..100 {
        let t = random_tensor(&mut r);
        let (a, b) = (
            dir.path().join(format!("a{i}.lfgt")),
            dir.path().join(format!("b{i}.lfgt")),
        );
        write_tensor(&t, &a).map_err(|e| e.to_string())?;
        let back = read_tensor(&a).map_err(|e| e.to_string())?;
        write_tensor(&back, &b).map_err(|e| e.to_string())?;
        let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        ensure!(
            ba == bb && ba == encode(&t),
            "tensor {i}: rewrite not byte-identical"
        );
        ensure!(
            encode(&decode(&ba).unwrap()) == ba,
            "tensor {i}: decode/encode not byte-identical"
        );
    }

    // determinism, including across worker counts
    let p = dir.path();
    let seqs: Vec<_> = (0..3)
        .map(|s| {
            let labels: Vec<_> = (0..4).map(|_| random_labels(&mut r, 8, 8)).collect();
            let pred: Vec<_> = labels
                .iter()
                .map(|l| Grid::from_fn(8, 8, |x, y| if x == y { 0 } else { *l.get(x, y) }))
                .collect();
            let g = write_label_sequence(&p.join(format!("gt{s}")), &format!("seq{s}"), 2, labels);
            let q = write_label_sequence(&p.join(format!("pred{s}")), &format!("seq{s}"), 2, pred);
            (q, g)
        })
        .collect();
    let mut seg_args = vec!["eval-seg".to_string()];
    for (q, g) in seqs.iter().rev() {
        seg_args.extend([
            "--pred".into(),
            q.display().to_string(),
            "--gt".into(),
            g.display().to_string(),
        ]);
    }
    let seg_args: Vec<&str> = seg_args.iter().map(String::as_str).collect();
    let (plan, scene) = collision_scene();
    let (p2, s2) = ep_comfort_scene();
    let scen = p.join("scenarios.json");
    std::fs::write(
        &scen,
        serde_json::to_string(&serde_json::json!({"scenarios": [
            {"id": "b-collision", "plan": plan, "scene": scene},
            {"id": "a-jerky", "plan": p2, "scene": s2},
        ]}))
        .unwrap(),
    )
    .unwrap();
    let runs: [Vec<&str>; 3] = [
        vec!["loss-check", "--seed", "7"],
        vec!["score-pdms", "--manifest", scen.to_str().unwrap()],
        seg_args,
    ];
    for args in &runs {
        let a = run_lfg(args, &[("LFG_NUM_WORKERS", "1")]);
        let b = run_lfg(args, &[("LFG_NUM_WORKERS", "4")]);
        ensure!(a.code == 0, "{} failed: {}", args[0], a.stderr);
        ensure!(
            a.stdout == b.stdout && !a.stdout.is_empty(),
            "{}: output differs between runs",
            args[0]
        );
    }
    let pdms: Value = serde_json::from_str(&run_lfg(&runs[1], &[]).stdout).unwrap();
    ensure!(
        pdms["scenarios"][1]["breakdown"]["pdms"] == 0.0,
        "collision scenario pdms {}",
        pdms["scenarios"][1]
    );

    // error codes
    let (q, g) = &seqs[0];
    let (q, g) = (q.to_str().unwrap(), g.to_str().unwrap());
    let gt_dir = seqs[0].1.parent().unwrap();
    let label_file = gt_dir.join("frame_0000_labels.lfgt");
    let good = std::fs::read(&label_file).unwrap();
    let corrupt = |edit: &dyn Fn(&mut Vec<u8>)| {
        let mut bytes = good.clone();
        edit(&mut bytes);
        std::fs::write(&label_file, bytes).unwrap();
        run_lfg(&["eval-seg", "--pred", q, "--gt", g], &[])
    };
    expect_code(&corrupt(&|b| b[0] = b'X'), 2, "bad_magic")?;
    expect_code(&corrupt(&|b| b[4] = 9), 2, "unsupported_version")?;
    expect_code(&corrupt(&|b| b[8] = 9), 2, "unknown_dtype")?;
    expect_code(
        &corrupt(&|b| b.truncate(b.len() - 1)),
        2,
        "truncated_payload",
    )?;
    std::fs::write(
        &label_file,
        encode(&Tensor::f32(vec![8, 8], vec![0.0; 64]).unwrap()),
    )
    .unwrap();
    expect_code(
        &run_lfg(&["eval-seg", "--pred", q, "--gt", g], &[]),
        2,
        "dtype_mismatch",
    )?;
    std::fs::write(
        &label_file,
        encode(&Tensor::u8(vec![4, 8], vec![0; 32]).unwrap()),
    )
    .unwrap();
    expect_code(
        &run_lfg(&["eval-seg", "--pred", q, "--gt", g], &[]),
        2,
        "shape_mismatch",
    )?;
    std::fs::write(
        &label_file,
        encode(&Tensor::u8(vec![8, 8], vec![7; 64]).unwrap()),
    )
    .unwrap();
    expect_code(
        &run_lfg(&["eval-seg", "--pred", q, "--gt", g], &[]),
        2,
        "invalid_input",
    )?;
    std::fs::remove_file(&label_file).unwrap();
    expect_code(
        &run_lfg(&["eval-seg", "--pred", q, "--gt", g], &[]),
        2,
        "manifest_error",
    )?;

    let geo = p.join("geo");
    let frames = |pose: &dyn Fn(usize) -> Pose, depth: &dyn Fn(usize, usize) -> f64| {
        (0..4)
            .map(|t| lfg_core::geometry::Frame {
                pose: Some(pose(t)),
                depth: Some(
                    DepthMap::from_raw(4, 4, (0..16).map(|i| depth(t, i)).collect()).unwrap(),
                ),
                ..Default::default()
            })
            .collect::<Vec<_>>()
    };
    let write = |name: &str, f| {
        lfg_core::io::write_sequence(
            geo.join(name),
            "g",
            5,
            &lfg_core::geometry::FrameSequence::new(2, 2, f).unwrap(),
            None,
        )
        .unwrap()
        .display()
        .to_string()
    };
    let gt_m = write(
        "gt",
        frames(
            &|t| Pose::from_translation(Vector3::new(t as f64, (t * t) as f64, 0.5 * t as f64)),
            &|_, i| 1.0 + i as f64,
        ),
    );
    let flat_m = write("flat", frames(&|_| Pose::identity(), &|_, _| 2.0));
    let traj = run_lfg(&["eval-traj", "--pred", &flat_m, "--gt", &gt_m], &[]);
    expect_code(&traj, 3, "degenerate_input")?;
    let dep = run_lfg(&["eval-depth", "--pred", &flat_m, "--gt", &gt_m], &[]);
    expect_code(&dep, 3, "singular_system")?;
    let pose_file = geo.join("gt").join("frame_0001_pose.lfgt");
    let mut m = vec![0f32; 16];
    m[0] = 2.0;
    m[5] = 1.0;
    m[10] = 1.0;
    m[15] = 1.0;
    std::fs::write(&pose_file, encode(&Tensor::f32(vec![4, 4], m).unwrap())).unwrap();
    expect_code(
        &run_lfg(&["eval-traj", "--pred", &flat_m, "--gt", &gt_m], &[]),
        2,
        "invalid_pose",
    )?;

    let bad_json = p.join("bad.json");
    std::fs::write(&bad_json, "{\"trajectories\": [").unwrap();
    expect_code(
        &run_lfg(
            &["cluster-anchors", "--gt", bad_json.to_str().unwrap()],
            &[],
        ),
        2,
        "json_error",
    )?;
    let missing = p.join("missing.json");
    expect_code(
        &run_lfg(&["cluster-anchors", "--gt", missing.to_str().unwrap()], &[]),
        2,
        "io_error",
    )?;
    expect_code(
        &run_lfg(
            &["loss-check", "--points", "2", "--set", "loss.omega=0.5"],
            &[],
        ),
        2,
        "config_error",
    )?;
    expect_code(
        &run_lfg(
            &["score-pdms", "--manifest", scen.to_str().unwrap()],
            &[("LFG_NUM_WORKERS", "zero")],
        ),
        2,
        "config_error",
    )?;
    // JSON cannot carry NaN or inf, so non_finite is checked through the library
    let anchors = kmeans_anchors(&random_futures(&mut r, 10), 2, 0).unwrap();
    let nan_pred = ModePrediction {
        confidences: vec![f64::NAN, 0.0],
        offsets: vec![[[0.0; 2]; 8]; 2],
    };
    let nf = decode_plan(&anchors, &nan_pred);
    ensure!(
        matches!(&nf, Err(e) if e.code() == "non_finite" && e.exit_code() == 3),
        "non_finite not raised: {nf:?}"
    );
    let oob =
        lfg_core::geometry::PointMap::from_fn(2, 2, |_, _| Some(Vector3::zeros())).sample(1.5, 0.0);
    ensure!(
        matches!(&oob, Err(e) if e.code() == "out_of_bounds"),
        "out_of_bounds not raised: {oob:?}"
    );

    let usage = run_lfg(&["no-such-command"], &[]);
    ensure!(usage.code == 64, "unknown subcommand exit {}", usage.code);
    let help = run_lfg(&["--help"], &[]);
    ensure!(
        help.code == 0 && help.stdout.contains("score-pdms"),
        "help exit {}",
        help.code
    );
    let json_err = run_lfg(
        &[
            "--json",
            "cluster-anchors",
            "--gt",
            missing.to_str().unwrap(),
        ],
        &[],
    );
    let v: Value = serde_json::from_str(json_err.stdout.trim())
        .map_err(|e| format!("--json error body: {e}"))?;
    ensure!(v["error"]["code"] == "io_error", "--json error body {v}");
    Ok("100 tensors byte-identical, 3 commands deterministic across runs and workers, 16 error codes + usage exit".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("geometry", geometry),
        ("alignment", alignment),
        ("depth", depth),
        ("segmentation", segmentation),
        ("losses", losses),
        ("motion", motion),
        ("planning", planning),
        ("io/cli", io_cli),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS  [{}] {name:<13} {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  [{}] {name:<13} {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
