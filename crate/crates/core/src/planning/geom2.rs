//! Planar primitives for the rollout checks.

use serde::{Deserialize, Serialize};

/// Planar rotation by `angle` followed by translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rigid2 {
    pub angle: f64,
    pub translation: [f64; 2],
}

impl Rigid2 {
    pub fn rotate(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let r = self.rotate(p);
        [r[0] + self.translation[0], r[1] + self.translation[1]]
    }
}

pub(crate) fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

pub(crate) fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

/// Wraps an angle into `(-pi, pi]`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Rectangle centered at `center`, long side along `heading`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: [f64; 2],
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedBox {
    fn axes(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.heading.sin_cos();
        [[c, s], [-s, c]]
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let [u, v] = self.axes();
        let (hl, hw) = (0.5 * self.length, 0.5 * self.width);
        let at = |a: f64, b: f64| {
            [
                self.center[0] + a * u[0] + b * v[0],
                self.center[1] + a * u[1] + b * v[1],
            ]
        };
        [at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)]
    }

    /// Separating-axis test. Boxes that only touch do not overlap.
    pub fn overlaps(&self, other: &OrientedBox) -> bool {
        let (ca, cb) = (self.corners(), other.corners());
        for axis in self.axes().into_iter().chain(other.axes()) {
            let proj = |cs: &[[f64; 2]; 4]| {
                cs.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                        let d = dot(*c, axis);
                        (lo.min(d), hi.max(d))
                    })
            };
            let (a0, a1) = proj(&ca);
            let (b0, b1) = proj(&cb);
            if a1 <= b0 || b1 <= a0 {
                return false;
            }
        }
        true
    }
}

/// Proper crossing of segments `p1p2` and `q1q2` (shared endpoints and
/// collinear touching excluded).
pub(crate) fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(sub(p2, p1), sub(q1, p1));
    let d2 = cross(sub(p2, p1), sub(q2, p1));
    let d3 = cross(sub(q2, q1), sub(p1, q1));
    let d4 = cross(sub(q2, q1), sub(p2, q1));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Even-odd ray casting.
pub(crate) fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub(crate) fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| cross(poly[i], poly[(i + 1) % n]))
        .sum::<f64>()
}

pub(crate) fn polygon_self_intersects(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            // skip adjacent edges
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}
