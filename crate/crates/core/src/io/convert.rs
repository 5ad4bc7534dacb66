//! Domain types to and from tensors.
//!
//! | type           | dtype | shape     | notes                    |
//! |----------------|-------|-----------|--------------------------|
//! | pose           | f32   | 4 x 4     | row-major homogeneous    |
//! | point map      | f32   | H x W x 3 | NaN marks invalid pixels |
//! | depth map      | f32   | H x W     | NaN marks invalid pixels |
//! | label map      | u8    | H x W     | class index              |
//! | semantic map   | f32   | H x W x 7 | per-class probability    |
//! | confidence     | f32   | H x W     |                          |
//! | mask           | u8    | H x W     | 0 or 1                   |

use nalgebra::{Matrix4, Vector3};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::geometry::{PointMap, Pose};
use crate::grid::{validate_labels, DepthMap, Grid, LabelMap, Mask, SemanticMap, NUM_CLASSES};

fn to_f32(v: f64) -> f32 {
    v as f32
}

pub fn pose_to_tensor(p: &Pose) -> Tensor {
    let m = p.to_matrix();
    let data = (0..16).map(|i| to_f32(m[(i / 4, i % 4)])).collect();
    Tensor::f32(vec![4, 4], data).expect("4x4")
}

pub fn tensor_to_pose(t: &Tensor) -> Result<Pose> {
    t.expect_shape(&[Some(4), Some(4)])?;
    let d = t.as_f32()?;
    let m = Matrix4::from_fn(|r, c| d[r * 4 + c] as f64);
    Pose::from_matrix(&m)
}

pub fn point_map_to_tensor(pm: &PointMap) -> Tensor {
    let mut data = Vec::with_capacity(pm.points().len() * 3);
    for (p, &ok) in pm.points().iter().zip(pm.valid()) {
        if ok {
            data.extend(p.iter().map(|&v| to_f32(v)));
        } else {
            data.extend([f32::NAN; 3]);
        }
    }
    Tensor::f32(vec![pm.height(), pm.width(), 3], data).expect("h x w x 3")
}

pub fn tensor_to_point_map(t: &Tensor) -> Result<PointMap> {
    t.expect_shape(&[None, None, Some(3)])?;
    let (h, w) = (t.shape()[0], t.shape()[1]);
    let d = t.as_f32()?;
    let points = d
        .chunks_exact(3)
        .map(|c| Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect();
    PointMap::from_points(h, w, points)
}

pub fn depth_to_tensor(dm: &DepthMap) -> Tensor {
    let data = dm
        .depth()
        .iter()
        .zip(dm.valid())
        .map(|(&d, &ok)| if ok { to_f32(d) } else { f32::NAN })
        .collect();
    Tensor::f32(vec![dm.height(), dm.width()], data).expect("h x w")
}

/// Finite, strictly positive entries are valid.
pub fn tensor_to_depth(t: &Tensor) -> Result<DepthMap> {
    t.expect_shape(&[None, None])?;
    let d = t.as_f32()?.iter().map(|&v| v as f64).collect();
    DepthMap::from_raw(t.shape()[0], t.shape()[1], d)
}

pub fn labels_to_tensor(l: &LabelMap) -> Tensor {
    Tensor::u8(vec![l.height(), l.width()], l.as_slice().to_vec()).expect("h x w")
}

pub fn tensor_to_labels(t: &Tensor) -> Result<LabelMap> {
    t.expect_shape(&[None, None])?;
    let g = Grid::new(t.shape()[0], t.shape()[1], t.as_u8()?.to_vec())?;
    validate_labels(&g)?;
    Ok(g)
}

pub fn semantic_to_tensor(s: &SemanticMap) -> Tensor {
    let data = s.as_slice().iter().map(|&v| to_f32(v)).collect();
    Tensor::f32(vec![s.height(), s.width(), NUM_CLASSES], data).expect("h x w x c")
}

pub fn tensor_to_semantic(t: &Tensor) -> Result<SemanticMap> {
    t.expect_shape(&[None, None, Some(NUM_CLASSES)])?;
    let d = t.as_f32()?.iter().map(|&v| v as f64).collect();
    SemanticMap::new(t.shape()[0], t.shape()[1], d)
}

pub fn real_grid_to_tensor(g: &Grid<f64>) -> Tensor {
    let data = g.as_slice().iter().map(|&v| to_f32(v)).collect();
    Tensor::f32(vec![g.height(), g.width()], data).expect("h x w")
}

pub fn tensor_to_real_grid(t: &Tensor) -> Result<Grid<f64>> {
    t.expect_shape(&[None, None])?;
    let d = t.as_f32()?.iter().map(|&v| v as f64).collect();
    Grid::new(t.shape()[0], t.shape()[1], d)
}

pub fn mask_to_tensor(m: &Mask) -> Tensor {
    let data = m.as_slice().iter().map(|&b| b as u8).collect();
    Tensor::u8(vec![m.height(), m.width()], data).expect("h x w")
}

pub fn tensor_to_mask(t: &Tensor) -> Result<Mask> {
    t.expect_shape(&[None, None])?;
    let d = t.as_u8()?;
    if let Some(v) = d.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidInput(format!("mask value {v} is not 0 or 1")));
    }
    Grid::new(
        t.shape()[0],
        t.shape()[1],
        d.iter().map(|&v| v == 1).collect(),
    )
}

/// Motion masks are stored as binary masks; any nonzero value becomes 1.
pub fn motion_to_tensor(m: &Grid<f64>) -> Tensor {
    let data = m.as_slice().iter().map(|&v| (v != 0.0) as u8).collect();
    Tensor::u8(vec![m.height(), m.width()], data).expect("h x w")
}

pub fn tensor_to_motion(t: &Tensor) -> Result<Grid<f64>> {
    let m = tensor_to_mask(t)?;
    let (h, w) = m.shape();
    Grid::new(
        h,
        w,
        m.as_slice()
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect(),
    )
}
