//! Rigid-transform algebra, point-map sampling and rotation metrics.
//!
//! Poses map camera coordinates into the reference (world) frame:
//! `x_world = R * x_cam + t`. The relative pose between frames `i` and `j`
//! is `T_i^-1 * T_j`, which carries frame-`j` coordinates into frame `i`.

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::grid::{ConfidenceMap, DepthMap, LabelMap, MotionMask, SemanticMap};

/// Tolerance on `R^T R = I` and `det R = 1` when a pose is constructed.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// Slack allowed on the cosine argument before `acos` clamps instead of failing.
pub const TRACE_CLAMP_TOL: f64 = 1e-6;

/// A rigid transform in SE(3).
///
/// The rotation is validated once at construction, so every `Pose` value in
/// circulation is a proper rotation to within [`ORTHONORMAL_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation)?;
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("non-finite translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Pose from an axis-angle vector and a translation. Never fails.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: so3_exp(&axis_angle),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Parses a 4x4 homogeneous matrix. The last row must be `[0 0 0 1]`.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let last = m.row(3);
        let expected = [0.0, 0.0, 0.0, 1.0];
        if last
            .iter()
            .zip(expected)
            .any(|(v, e)| (v - e).abs() > ORTHONORMAL_TOL)
        {
            return Err(Error::InvalidPose(format!(
                "homogeneous row must be [0 0 0 1], got {:?}",
                last.iter().collect::<Vec<_>>()
            )));
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Same rotation, translation multiplied by `factor`.
    pub fn with_scaled_translation(&self, factor: f64) -> Self {
        Self {
            rotation: self.rotation,
            translation: self.translation * factor,
        }
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPose("non-finite rotation entry".into()));
    }
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    if err > ORTHONORMAL_TOL {
        return Err(Error::InvalidPose(format!(
            "rotation is not orthonormal (max |R^T R - I| = {err:.3e})"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ORTHONORMAL_TOL {
        return Err(Error::InvalidPose(format!(
            "rotation determinant is {det}, expected +1"
        )));
    }
    Ok(())
}

/// `a * b`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

/// `T_i^-1 * T_j`: maps frame-`j` coordinates into frame `i`.
pub fn relative_pose(from_i: &Pose, to_j: &Pose) -> Pose {
    from_i.inverse().compose(to_j)
}

/// Skew-symmetric matrix with `hat(w) * v == w x v`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rodrigues exponential map from an axis-angle vector.
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*w).into_inner()
}

/// Rotation of `angle` radians about the z axis.
pub fn rot_z(angle: f64) -> Matrix3<f64> {
    so3_exp(&Vector3::new(0.0, 0.0, angle))
}

/// Angle of `r1^T r2` in `[0, pi]`.
///
/// The angle is evaluated with `atan2(|skew|, cos)`, which keeps full
/// precision near 0 and pi. The cosine part is still range-checked: inputs
/// whose `(trace - 1) / 2` falls outside `[-1, 1]` by more than
/// [`TRACE_CLAMP_TOL`] are rejected as non-rotations.
pub fn geodesic_rotation_distance(r1: &Matrix3<f64>, r2: &Matrix3<f64>) -> Result<f64> {
    let e = r1.transpose() * r2;
    let cos = (e.trace() - 1.0) / 2.0;
    if !cos.is_finite() {
        return Err(Error::NonFinite("rotation".into()));
    }
    if !(-1.0 - TRACE_CLAMP_TOL..=1.0 + TRACE_CLAMP_TOL).contains(&cos) {
        return Err(Error::InvalidPose(format!(
            "trace argument {cos} outside [-1, 1]; not a rotation pair"
        )));
    }
    let sin = 0.5
        * Vector3::new(
            e[(2, 1)] - e[(1, 2)],
            e[(0, 2)] - e[(2, 0)],
            e[(1, 0)] - e[(0, 1)],
        )
        .norm();
    Ok(sin.atan2(cos.clamp(-1.0, 1.0)))
}

/// Per-pixel 3D points for one frame, with an explicit validity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    height: usize,
    width: usize,
    points: Vec<Vector3<f64>>,
    valid: Vec<bool>,
}

impl PointMap {
    pub fn new(
        height: usize,
        width: usize,
        points: Vec<Vector3<f64>>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let n = height * width;
        if points.len() != n || valid.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "point map {height}x{width}: {} points, {} validity flags",
                points.len(),
                valid.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| valid[i] && points[i].iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "valid point at index {i} is not finite"
            )));
        }
        Ok(Self {
            height,
            width,
            points,
            valid,
        })
    }

    /// Every finite point is valid; non-finite points are invalid.
    pub fn from_points(height: usize, width: usize, points: Vec<Vector3<f64>>) -> Result<Self> {
        let valid = points
            .iter()
            .map(|p| p.iter().all(|v| v.is_finite()))
            .collect();
        Self::new(height, width, points, valid)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> Option<Vector3<f64>>,
    ) -> Self {
        let mut points = Vec::with_capacity(height * width);
        let mut valid = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                match f(x, y) {
                    Some(p) if p.iter().all(|v| v.is_finite()) => {
                        points.push(p);
                        valid.push(true);
                    }
                    _ => {
                        points.push(Vector3::repeat(f64::NAN));
                        valid.push(false);
                    }
                }
            }
        }
        Self {
            height,
            width,
            points,
            valid,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn point(&self, x: usize, y: usize) -> Option<&Vector3<f64>> {
        let i = y * self.width + x;
        self.valid[i].then(|| &self.points[i])
    }

    pub fn same_shape(&self, other: &PointMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn ensure_same_shape(&self, other: &PointMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "point maps {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )))
        }
    }

    pub fn valid_points(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.points
            .iter()
            .zip(&self.valid)
            .filter_map(|(p, &v)| v.then_some(p))
    }

    /// Multiplies every point by `factor`. Invalid entries are left untouched.
    pub fn scaled(&self, factor: f64) -> Self {
        let points = self
            .points
            .iter()
            .zip(&self.valid)
            .map(|(p, &v)| if v { p * factor } else { *p })
            .collect();
        Self {
            height: self.height,
            width: self.width,
            points,
            valid: self.valid.clone(),
        }
    }

    /// Bilinear sample at subpixel `(x, y)`.
    ///
    /// Returns `Ok(None)` when any neighbor with non-zero weight is invalid.
    /// At grid nodes the stored value is returned bit-exactly.
    pub fn sample(&self, x: f64, y: f64) -> Result<Option<Vector3<f64>>> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::OutOfBounds("empty point map".into()));
        }
        let (max_x, max_y) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(0.0..=max_x).contains(&x) || !(0.0..=max_y).contains(&y) {
            return Err(Error::OutOfBounds(format!(
                "pixel ({x}, {y}) outside [0, {max_x}] x [0, {max_y}]"
            )));
        }
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);

        let taps = [
            (x0, y0, (1.0 - fx) * (1.0 - fy)),
            (x1, y0, fx * (1.0 - fy)),
            (x0, y1, (1.0 - fx) * fy),
            (x1, y1, fx * fy),
        ];
        let mut acc: Option<Vector3<f64>> = None;
        for (tx, ty, w) in taps {
            if w == 0.0 {
                continue;
            }
            let i = ty * self.width + tx;
            if !self.valid[i] {
                return Ok(None);
            }
            let term = if w == 1.0 {
                self.points[i]
            } else {
                self.points[i] * w
            };
            acc = Some(match acc {
                None => term,
                Some(a) => a + term,
            });
        }
        Ok(acc)
    }
}

/// Free-function form of [`PointMap::sample`].
pub fn sample_point_map(pm: &PointMap, pixel: [f64; 2]) -> Result<Option<Vector3<f64>>> {
    pm.sample(pixel[0], pixel[1])
}

/// Everything known about one frame; each modality is optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    pub pose: Option<Pose>,
    pub point_map: Option<PointMap>,
    pub semantic: Option<SemanticMap>,
    pub confidence: Option<ConfidenceMap>,
    pub motion: Option<MotionMask>,
    pub depth: Option<DepthMap>,
    pub labels: Option<LabelMap>,
}

/// `num_observed` observed frames followed by `num_future` predicted frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    num_observed: usize,
    num_future: usize,
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(num_observed: usize, num_future: usize, frames: Vec<Frame>) -> Result<Self> {
        if frames.len() != num_observed + num_future {
            return Err(Error::ShapeMismatch(format!(
                "sequence declares {num_observed}+{num_future} frames but holds {}",
                frames.len()
            )));
        }
        Ok(Self {
            num_observed,
            num_future,
            frames,
        })
    }

    pub fn num_observed(&self) -> usize {
        self.num_observed
    }

    pub fn num_future(&self) -> usize {
        self.num_future
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn observed(&self) -> &[Frame] {
        &self.frames[..self.num_observed]
    }

    pub fn future(&self) -> &[Frame] {
        &self.frames[self.num_observed..]
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    /// Mean Euclidean norm over all valid points of all frames, if any.
    pub fn mean_point_norm(&self) -> Option<f64> {
        let (sum, count) = self
            .frames
            .iter()
            .filter_map(|f| f.point_map.as_ref())
            .flat_map(|pm| pm.valid_points())
            .fold((0.0, 0usize), |(s, n), p| (s + p.norm(), n + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// Multiplies point coordinates and pose translations by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|f| Frame {
                pose: f.pose.map(|p| p.with_scaled_translation(factor)),
                point_map: f.point_map.as_ref().map(|pm| pm.scaled(factor)),
                ..f.clone()
            })
            .collect();
        Self {
            num_observed: self.num_observed,
            num_future: self.num_future,
            frames,
        }
    }
}

/// Divides point coordinates and pose translations by the mean norm of all
/// valid points; returns the normalized sequence and that mean.
pub fn normalize_geometry(seq: &FrameSequence) -> Result<(FrameSequence, f64)> {
    let scale = seq
        .mean_point_norm()
        .ok_or_else(|| Error::Degenerate("no valid points in sequence".into()))?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Degenerate(format!(
            "mean point norm is {scale}; cannot normalize"
        )));
    }
    Ok((seq.rescaled(1.0 / scale), scale))
}

/// Inverse of [`normalize_geometry`].
pub fn denormalize_geometry(seq: &FrameSequence, scale: f64) -> FrameSequence {
    seq.rescaled(scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pose(angle: f64, t: [f64; 3]) -> Pose {
        Pose::new(rot_z(angle), Vector3::from(t)).unwrap()
    }

    #[test]
    fn compose_identity_and_inverse() {
        let id = Pose::identity();
        assert_eq!(compose(&id, &id), id);

        let t = Pose::from_axis_angle(Vector3::new(0.1, -0.4, 0.7), Vector3::new(1.0, 2.0, -3.0));
        let r = compose(&t, &t.inverse());
        assert_relative_eq!(r.to_matrix(), Matrix4::identity(), epsilon = 1e-12);
    }

    #[test]
    fn compose_matches_dense_matrix_product() {
        let a = pose(0.3, [1.0, 0.0, 0.0]);
        let b = pose(0.4, [0.0, 1.0, 0.0]);
        let dense = a.to_matrix() * b.to_matrix();
        assert_relative_eq!(compose(&a, &b).to_matrix(), dense, epsilon = 1e-15);
    }

    #[test]
    fn non_orthonormal_rotation_is_rejected() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = 1.1;
        assert!(matches!(
            Pose::new(r, Vector3::zeros()),
            Err(Error::InvalidPose(_))
        ));
        // Reflection: orthonormal but det = -1.
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(refl, Vector3::zeros()).is_err());
    }

    #[test]
    fn from_matrix_checks_homogeneous_row() {
        let mut m = Matrix4::identity();
        m[(3, 0)] = 0.5;
        assert!(Pose::from_matrix(&m).is_err());
        let p = pose(0.2, [1.0, 2.0, 3.0]);
        assert_eq!(Pose::from_matrix(&p.to_matrix()).unwrap(), p);
    }

    #[test]
    fn relative_pose_cases() {
        let t = pose(0.8, [3.0, -1.0, 2.0]);
        let r = relative_pose(&t, &t);
        assert_relative_eq!(r.to_matrix(), Matrix4::identity(), epsilon = 1e-12);

        let r = relative_pose(
            &Pose::identity(),
            &Pose::from_translation(Vector3::new(0.0, 0.0, 5.0)),
        );
        assert_relative_eq!(r.translation().norm(), 5.0);

        let a = pose(0.3, [1.0, 2.0, 3.0]);
        let b = Pose::from_axis_angle(Vector3::new(0.2, 0.1, -0.5), Vector3::new(-2.0, 0.5, 1.0));
        let rel = relative_pose(&a, &b);
        let dense = a.to_matrix() * rel.to_matrix();
        assert_relative_eq!(dense, b.to_matrix(), epsilon = 1e-12);
    }

    #[test]
    fn geodesic_distance_cases() {
        let i = Matrix3::identity();
        assert_eq!(geodesic_rotation_distance(&i, &i).unwrap(), 0.0);
        assert_relative_eq!(
            geodesic_rotation_distance(&i, &rot_z(std::f64::consts::PI)).unwrap(),
            std::f64::consts::PI,
            epsilon = 1e-12
        );
        let d = geodesic_rotation_distance(&rot_z(0.3), &rot_z(0.7)).unwrap();
        let oracle = (((rot_z(0.3).transpose() * rot_z(0.7)).trace() - 1.0) / 2.0).acos();
        assert_relative_eq!(d, 0.4, epsilon = 1e-12);
        assert_relative_eq!(d, oracle, epsilon = 1e-12);
    }

    #[test]
    fn geodesic_distance_rejects_non_rotations() {
        let big = Matrix3::identity() * 2.0;
        assert!(geodesic_rotation_distance(&Matrix3::identity(), &big).is_err());
        let mut nan = Matrix3::identity();
        nan[(0, 0)] = f64::NAN;
        assert!(geodesic_rotation_distance(&nan, &Matrix3::identity()).is_err());
    }

    fn ramp_map(h: usize, w: usize) -> PointMap {
        PointMap::from_fn(h, w, |x, y| {
            Some(Vector3::new(
                x as f64 * 1.5,
                y as f64 - 0.25,
                (x * y) as f64 + 1.0,
            ))
        })
    }

    #[test]
    fn sample_at_grid_node_is_exact() {
        let pm = ramp_map(5, 6);
        let p = pm.sample(3.0, 4.0).unwrap().unwrap();
        assert_eq!(p, *pm.point(3, 4).unwrap());
        // last row / column
        let p = pm.sample(5.0, 4.0).unwrap().unwrap();
        assert_eq!(p, *pm.point(5, 4).unwrap());
    }

    #[test]
    fn sample_midpoint_is_linear() {
        let pm = PointMap::from_fn(1, 2, |x, _| Some(Vector3::new(2.0 * x as f64, 0.0, 0.0)));
        let p = pm.sample(0.5, 0.0).unwrap().unwrap();
        assert_eq!(p.x, 1.0);
    }

    #[test]
    fn sample_vetoes_invalid_neighbor() {
        let pm = PointMap::from_fn(2, 2, |x, y| {
            (x + y != 2).then(|| Vector3::new(1.0, 1.0, 1.0))
        });
        assert!(pm.sample(0.5, 0.5).unwrap().is_none());
        // weight-zero invalid neighbor does not veto
        assert!(pm.sample(0.0, 0.5).unwrap().is_some());
    }

    #[test]
    fn sample_out_of_bounds() {
        let pm = ramp_map(3, 3);
        assert!(matches!(pm.sample(2.5, 0.0), Err(Error::OutOfBounds(_))));
        assert!(matches!(pm.sample(0.0, -0.1), Err(Error::OutOfBounds(_))));
    }

    fn seq_with_norm(norm: f64) -> FrameSequence {
        let pm = PointMap::from_fn(2, 2, |x, y| {
            let mut v = Vector3::new(x as f64 + 0.5, y as f64 - 0.3, 1.0);
            v *= norm / v.norm();
            Some(v)
        });
        let frame = Frame {
            pose: Some(Pose::from_translation(Vector3::new(4.0, 0.0, 0.0))),
            point_map: Some(pm),
            ..Default::default()
        };
        FrameSequence::new(1, 1, vec![frame.clone(), frame]).unwrap()
    }

    #[test]
    fn normalize_uniform_norm() {
        let (out, scale) = normalize_geometry(&seq_with_norm(2.0)).unwrap();
        assert_relative_eq!(scale, 2.0, epsilon = 1e-15);
        for f in out.frames() {
            for p in f.point_map.as_ref().unwrap().valid_points() {
                assert_relative_eq!(p.norm(), 1.0, epsilon = 1e-15);
            }
            assert_relative_eq!(f.pose.unwrap().translation().x, 2.0);
        }
    }

    #[test]
    fn normalize_fixed_point() {
        let seq = seq_with_norm(1.0);
        let (out, scale) = normalize_geometry(&seq).unwrap();
        assert_relative_eq!(scale, 1.0, epsilon = 1e-15);
        let a = out.frames()[0].point_map.as_ref().unwrap();
        let b = seq.frames()[0].point_map.as_ref().unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            assert_relative_eq!(p, q, epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_without_points_is_degenerate() {
        let seq = FrameSequence::new(1, 0, vec![Frame::default()]).unwrap();
        assert!(matches!(
            normalize_geometry(&seq),
            Err(Error::Degenerate(_))
        ));
        let zero = PointMap::from_fn(1, 1, |_, _| Some(Vector3::zeros()));
        let seq = FrameSequence::new(
            1,
            0,
            vec![Frame {
                point_map: Some(zero),
                ..Default::default()
            }],
        )
        .unwrap();
        assert!(matches!(
            normalize_geometry(&seq),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn sequence_length_must_match() {
        assert!(FrameSequence::new(2, 1, vec![Frame::default()]).is_err());
    }
}
