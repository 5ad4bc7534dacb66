//! C ABI over `lfg-core`.
//!
//! Conventions:
//! - every fallible function returns an [`LfgStatus`]; on failure a message is
//!   available from [`lfg_last_error_message`] on the same thread;
//! - matrices are row-major `double` arrays;
//! - handles ([`LfgTensor`], [`LfgAnchorSet`]) are opaque and must be released
//!   with their `_free` function;
//! - panics never cross the boundary; they surface as `LFG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use lfg_core::geometry::{geodesic_rotation_distance, Pose};
use lfg_core::grid::{DepthMap, Grid};
use lfg_core::io::{read_tensor, write_tensor, Tensor, TensorData};
use lfg_core::metrics::{
    align_depth_scale_shift, depth_metrics, seg_scores, trajectory_scores, umeyama_align,
};
use lfg_core::motion::{classify_dynamic, DynamicRule, MotionConfig};
use lfg_core::planning::{
    decode_plan, flatten, kmeans_anchors, rollout_checks, unflatten, AnchorSet, ModePrediction,
    PdmsConfig, PlanTrajectory, SceneSpec, PLAN_DIM,
};
use lfg_core::Error;
use nalgebra::{Matrix3, Matrix4, Vector3};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfgStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed or inconsistent input.
    InvalidInput = 2,
    /// Well-formed input on which the computation cannot proceed.
    Computation = 3,
    Io = 4,
    BadMagic = 5,
    UnsupportedVersion = 6,
    UnknownDtype = 7,
    Truncated = 8,
    DtypeMismatch = 9,
    Panic = 10,
}

impl From<&Error> for LfgStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::BadMagic(_) => LfgStatus::BadMagic,
            Error::UnsupportedVersion(_) => LfgStatus::UnsupportedVersion,
            Error::UnknownDtype(_) => LfgStatus::UnknownDtype,
            Error::Truncated(_) => LfgStatus::Truncated,
            Error::DtypeMismatch { .. } => LfgStatus::DtypeMismatch,
            Error::Io { .. } => LfgStatus::Io,
            other if other.exit_code() == 3 => LfgStatus::Computation,
            _ => LfgStatus::InvalidInput,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: LfgStatus, msg: impl Into<String>) -> LfgStatus {
    set_last_error(msg.into());
    status
}

fn from_err(e: Error) -> LfgStatus {
    let s = LfgStatus::from(&e);
    fail(s, format!("{}: {e}", e.code()))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), LfgStatus>) -> LfgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LfgStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(LfgStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn st(self) -> Result<T, LfgStatus>;
}

impl<T> OrStatus<T> for Result<T, Error> {
    fn st(self) -> Result<T, LfgStatus> {
        self.map_err(from_err)
    }
}

fn nonnull<T>(p: *const T, name: &str) -> Result<(), LfgStatus> {
    if p.is_null() {
        Err(fail(LfgStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `n` readable values.
unsafe fn input<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], LfgStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    nonnull(p, name)?;
    Ok(slice::from_raw_parts(p, n))
}

/// # Safety
/// `p` must be null or point to `n` writable values.
unsafe fn output<'a, T>(p: *mut T, n: usize, name: &str) -> Result<&'a mut [T], LfgStatus> {
    nonnull(p, name)?;
    Ok(slice::from_raw_parts_mut(p, n))
}

fn mat3(v: &[f64]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| v[r * 3 + c])
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn cstr<'a>(p: *const c_char, name: &str) -> Result<&'a str, LfgStatus> {
    nonnull(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LfgStatus::InvalidInput, format!("{name} is not UTF-8")))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lfg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn lfg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Geodesic angle (radians) between two row-major 3x3 rotations.
///
/// # Safety
/// `r1` and `r2` must point to 9 doubles; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn lfg_geodesic_distance(
    r1: *const f64,
    r2: *const f64,
    out: *mut f64,
) -> LfgStatus {
    guard(|| {
        let a = mat3(input(r1, 9, "r1")?);
        let b = mat3(input(r2, 9, "r2")?);
        let d = geodesic_rotation_distance(&a, &b).st()?;
        output(out, 1, "out")?[0] = d;
        Ok(())
    })
}

/// Least-squares similarity (`with_scale`) or rigid transform mapping the
/// `n` points of `pred` (n x 3) onto `gt`.
///
/// # Safety
/// `pred`, `gt` must hold `3 n` doubles; `out_rotation` 9, `out_translation`
/// 3 and `out_scale` 1 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lfg_umeyama(
    pred: *const f64,
    gt: *const f64,
    n: usize,
    with_scale: bool,
    out_scale: *mut f64,
    out_rotation: *mut f64,
    out_translation: *mut f64,
) -> LfgStatus {
    guard(|| {
        let pts = |p: &[f64]| -> Vec<Vector3<f64>> {
            p.chunks_exact(3)
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect()
        };
        let len = n
            .checked_mul(3)
            .ok_or_else(|| fail(LfgStatus::InvalidInput, "n too large"))?;
        let s = umeyama_align(
            &pts(input(pred, len, "pred")?),
            &pts(input(gt, len, "gt")?),
            with_scale,
        )
        .st()?;
        output(out_scale, 1, "out_scale")?[0] = s.scale;
        let r = output(out_rotation, 9, "out_rotation")?;
        for (i, v) in r.iter_mut().enumerate() {
            *v = s.rotation[(i / 3, i % 3)];
        }
        output(out_translation, 3, "out_translation")?.copy_from_slice(s.translation.as_slice());
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LfgTrajScores {
    pub ate_m: f64,
    pub rot_deg: f64,
    pub trans_m: f64,
}

/// Trajectory errors between `n` predicted and ground-truth poses, each a
/// row-major 4x4 camera-to-world matrix.
///
/// # Safety
/// `pred` and `gt` must hold `16 n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfg_trajectory_scores(
    pred: *const f64,
    gt: *const f64,
    n: usize,
    with_scale: bool,
    out: *mut LfgTrajScores,
) -> LfgStatus {
    guard(|| {
        let len = n
            .checked_mul(16)
            .ok_or_else(|| fail(LfgStatus::InvalidInput, "n too large"))?;
        let poses = |p: &[f64]| -> Result<Vec<Pose>, LfgStatus> {
            p.chunks_exact(16)
                .map(|m| Pose::from_matrix(&Matrix4::from_fn(|r, c| m[r * 4 + c])).st())
                .collect()
        };
        let s = trajectory_scores(
            &poses(input(pred, len, "pred")?)?,
            &poses(input(gt, len, "gt")?)?,
            with_scale,
        )
        .st()?;
        output(out, 1, "out")?[0] = LfgTrajScores {
            ate_m: s.ate_m,
            rot_deg: s.rot_deg,
            trans_m: s.trans_m,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LfgDepthResult {
    pub scale: f64,
    pub shift: f64,
    pub absrel: f64,
    pub rmse_m: f64,
}

/// Scale-shift aligns `pred` to `gt` (both `h x w`; non-finite or
/// non-positive entries are invalid) and scores the aligned map.
///
/// # Safety
/// `pred` and `gt` must hold `h w` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfg_depth_metrics(
    pred: *const f64,
    gt: *const f64,
    height: usize,
    width: usize,
    out: *mut LfgDepthResult,
) -> LfgStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .ok_or_else(|| fail(LfgStatus::InvalidInput, "size overflow"))?;
        let p = DepthMap::from_raw(height, width, input(pred, n, "pred")?.to_vec()).st()?;
        let g = DepthMap::from_raw(height, width, input(gt, n, "gt")?.to_vec()).st()?;
        let (ss, aligned) = align_depth_scale_shift(&p, &g).st()?;
        let s = depth_metrics(&aligned, &g).st()?;
        output(out, 1, "out")?[0] = LfgDepthResult {
            scale: ss.scale,
            shift: ss.shift,
            absrel: s.absrel,
            rmse_m: s.rmse_m,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LfgSegScores {
    pub pa: f64,
    pub miou: f64,
    pub mdice: f64,
    pub fwiou: f64,
}

/// Segmentation scores of two `h x w` label maps (classes 0..6).
///
/// # Safety
/// `pred` and `gt` must hold `h w` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfg_seg_scores(
    pred: *const u8,
    gt: *const u8,
    height: usize,
    width: usize,
    out: *mut LfgSegScores,
) -> LfgStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .ok_or_else(|| fail(LfgStatus::InvalidInput, "size overflow"))?;
        let p = Grid::new(height, width, input(pred, n, "pred")?.to_vec()).st()?;
        let g = Grid::new(height, width, input(gt, n, "gt")?.to_vec()).st()?;
        let s = seg_scores(&p, &g).st()?;
        output(out, 1, "out")?[0] = LfgSegScores {
            pa: s.pa,
            miou: s.miou,
            mdice: s.mdice,
            fwiou: s.fwiou,
        };
        Ok(())
    })
}

pub const LFG_RULE_MAJORITY: u32 = 0;
pub const LFG_RULE_K_MIN: u32 = 1;

/// Dynamic/static decision for a displacement series.
///
/// `rule` is `LFG_RULE_MAJORITY` or `LFG_RULE_K_MIN`; `k_min` is used by the
/// latter only.
///
/// # Safety
/// `displacements` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfg_classify_dynamic(
    displacements: *const f64,
    n: usize,
    tau: f64,
    rule: u32,
    k_min: usize,
    out: *mut bool,
) -> LfgStatus {
    guard(|| {
        let rule = match rule {
            LFG_RULE_MAJORITY => DynamicRule::Majority,
            LFG_RULE_K_MIN => DynamicRule::KMin,
            other => {
                return Err(fail(
                    LfgStatus::InvalidInput,
                    format!("unknown rule {other}"),
                ))
            }
        };
        let cfg = MotionConfig {
            tau_motion: tau,
            k_min,
            rule,
            ..MotionConfig::default()
        };
        cfg.validate().st()?;
        let d = input(displacements, n, "displacements")?;
        output(out, 1, "out")?[0] = classify_dynamic(d, &cfg);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LfgPdms {
    pub nc: f64,
    pub dac: f64,
    pub ep: f64,
    pub ttc: f64,
    pub comfort: f64,
    pub pdms: f64,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PdmsRequest {
    plan: PlanTrajectory,
    scene: SceneSpec,
    #[serde(default)]
    config: PdmsConfig,
}

/// Scores a plan against a scene given as JSON:
/// `{"plan": {...}, "scene": {...}, "config": {...}}` (config optional).
///
/// # Safety
/// `request_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfg_pdms_score(
    request_json: *const c_char,
    out: *mut LfgPdms,
) -> LfgStatus {
    guard(|| {
        let text = cstr(request_json, "request_json")?;
        let req: PdmsRequest = serde_json::from_str(text).map_err(|e| {
            fail(
                LfgStatus::InvalidInput,
                format!("invalid_input: bad request JSON: {e}"),
            )
        })?;
        let b = rollout_checks(&req.plan, &req.scene, &req.config).st()?;
        output(out, 1, "out")?[0] = LfgPdms {
            nc: b.nc,
            dac: b.dac,
            ep: b.ep,
            ttc: b.ttc,
            comfort: b.comfort,
            pdms: b.pdms,
        };
        Ok(())
    })
}

/// Opaque tensor handle.
pub struct LfgTensor(Tensor);

pub const LFG_DTYPE_F32: u32 = 1;
pub const LFG_DTYPE_U8: u32 = 2;
pub const LFG_DTYPE_I32: u32 = 3;

/// Reads an LFGT file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfg_tensor_read(
    path: *const c_char,
    out: *mut *mut LfgTensor,
) -> LfgStatus {
    guard(|| {
        let p = PathBuf::from(cstr(path, "path")?);
        let slot = output(out, 1, "out")?;
        let t = read_tensor(p).st()?;
        slot[0] = Box::into_raw(Box::new(LfgTensor(t)));
        Ok(())
    })
}

/// Builds a tensor by copying `len` elements of dtype `dtype` from `data`.
///
/// # Safety
/// `shape` must hold `ndim` values; `data` must hold `len` elements of the
/// given dtype; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfg_tensor_new(
    dtype: u32,
    shape: *const u64,
    ndim: usize,
    data: *const c_void,
    len: usize,
    out: *mut *mut LfgTensor,
) -> LfgStatus {
    guard(|| {
        let shape: Vec<usize> = input(shape, ndim, "shape")?
            .iter()
            .map(|&d| d as usize)
            .collect();
        let data = match dtype {
            LFG_DTYPE_F32 => TensorData::F32(input(data.cast::<f32>(), len, "data")?.to_vec()),
            LFG_DTYPE_U8 => TensorData::U8(input(data.cast::<u8>(), len, "data")?.to_vec()),
            LFG_DTYPE_I32 => TensorData::I32(input(data.cast::<i32>(), len, "data")?.to_vec()),
            other => return Err(from_err(Error::UnknownDtype(other))),
        };
        let t = Tensor::new(shape, data).st()?;
        output(out, 1, "out")?[0] = Box::into_raw(Box::new(LfgTensor(t)));
        Ok(())
    })
}

/// Writes a tensor atomically.
///
/// # Safety
/// `t` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lfg_tensor_write(t: *const LfgTensor, path: *const c_char) -> LfgStatus {
    guard(|| {
        nonnull(t, "tensor")?;
        let p = PathBuf::from(cstr(path, "path")?);
        write_tensor(&(*t).0, p).st()
    })
}

/// Releases a tensor; null is ignored.
///
/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lfg_tensor_free(t: *mut LfgTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// `LFG_DTYPE_*` code, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lfg_tensor_dtype(t: *const LfgTensor) -> u32 {
    t.as_ref().map_or(0, |t| t.0.dtype().code())
}

/// Number of dimensions, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lfg_tensor_ndim(t: *const LfgTensor) -> usize {
    t.as_ref().map_or(0, |t| t.0.shape().len())
}

/// Copies the shape into `out` (capacity `cap`, at least ndim).
///
/// # Safety
/// `t` must be a live handle; `out` must hold `cap` writable values.
#[no_mangle]
pub unsafe extern "C" fn lfg_tensor_shape(
    t: *const LfgTensor,
    out: *mut u64,
    cap: usize,
) -> LfgStatus {
    guard(|| {
        nonnull(t, "tensor")?;
        let shape = (*t).0.shape();
        if cap < shape.len() {
            return Err(fail(
                LfgStatus::InvalidInput,
                format!("shape needs {} slots, got {cap}", shape.len()),
            ));
        }
        let o = output(out, shape.len(), "out")?;
        for (d, s) in o.iter_mut().zip(shape) {
            *d = *s as u64;
        }
        Ok(())
    })
}

/// Number of elements, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lfg_tensor_len(t: *const LfgTensor) -> usize {
    t.as_ref().map_or(0, |t| t.0.data().len())
}

/// Borrowed pointer to the element data; valid while the handle lives.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lfg_tensor_data(t: *const LfgTensor) -> *const c_void {
    match t.as_ref().map(|t| t.0.data()) {
        Some(TensorData::F32(v)) => v.as_ptr().cast(),
        Some(TensorData::U8(v)) => v.as_ptr().cast(),
        Some(TensorData::I32(v)) => v.as_ptr().cast(),
        None => ptr::null(),
    }
}

/// Opaque anchor-set handle.
pub struct LfgAnchorSet(AnchorSet);

/// K-means anchors from `n` trajectories of 8 (x, y) waypoints each, flattened
/// to 16 doubles per trajectory.
///
/// # Safety
/// `futures` must hold `16 n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfg_anchors_kmeans(
    futures: *const f64,
    n: usize,
    k: usize,
    seed: u64,
    out: *mut *mut LfgAnchorSet,
) -> LfgStatus {
    guard(|| {
        let len = n
            .checked_mul(PLAN_DIM)
            .ok_or_else(|| fail(LfgStatus::InvalidInput, "n too large"))?;
        let trajs: Vec<PlanTrajectory> = input(futures, len, "futures")?
            .chunks_exact(PLAN_DIM)
            .map(|c| PlanTrajectory::from_flat(c.try_into().unwrap()))
            .collect();
        let a = kmeans_anchors(&trajs, k, seed).st()?;
        output(out, 1, "out")?[0] = Box::into_raw(Box::new(LfgAnchorSet(a)));
        Ok(())
    })
}

/// Number of anchors, or 0 for a null handle.
///
/// # Safety
/// `a` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lfg_anchors_len(a: *const LfgAnchorSet) -> usize {
    a.as_ref().map_or(0, |a| a.0.len())
}

/// Copies anchor `index` (16 doubles) into `out`.
///
/// # Safety
/// `a` must be a live handle; `out` must hold 16 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lfg_anchors_get(
    a: *const LfgAnchorSet,
    index: usize,
    out: *mut f64,
) -> LfgStatus {
    guard(|| {
        nonnull(a, "anchors")?;
        let anchors = &(*a).0.anchors;
        let w = anchors.get(index).ok_or_else(|| {
            fail(
                LfgStatus::InvalidInput,
                format!("anchor {index} of {}", anchors.len()),
            )
        })?;
        output(out, PLAN_DIM, "out")?.copy_from_slice(&flatten(w));
        Ok(())
    })
}

/// Decodes the plan: argmax of `confidences` (length k) plus that mode's
/// offsets (`16 k` doubles). Writes 16 doubles to `out_plan` and the mode.
///
/// # Safety
/// Pointers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn lfg_anchors_decode(
    a: *const LfgAnchorSet,
    confidences: *const f64,
    offsets: *const f64,
    k: usize,
    out_plan: *mut f64,
    out_mode: *mut usize,
) -> LfgStatus {
    guard(|| {
        nonnull(a, "anchors")?;
        let len = k
            .checked_mul(PLAN_DIM)
            .ok_or_else(|| fail(LfgStatus::InvalidInput, "k too large"))?;
        let pred = ModePrediction {
            confidences: input(confidences, k, "confidences")?.to_vec(),
            offsets: input(offsets, len, "offsets")?
                .chunks_exact(PLAN_DIM)
                .map(|c| unflatten(c.try_into().unwrap()))
                .collect(),
        };
        let (plan, mode) = decode_plan(&(*a).0, &pred).st()?;
        output(out_plan, PLAN_DIM, "out_plan")?.copy_from_slice(&plan.flatten());
        output(out_mode, 1, "out_mode")?[0] = mode;
        Ok(())
    })
}

/// Releases an anchor set; null is ignored.
///
/// # Safety
/// `a` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lfg_anchors_free(a: *mut LfgAnchorSet) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}
