//! Small geometric kernel shared by the mesh, gripper and evaluator modules.
//!
//! Everything here works on `nalgebra::Vector3<f64>` and is allocation free.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a, I: IntoIterator<Item = &'a Vec3>>(points: I) -> Self {
        let mut bb = Self::empty();
        for p in points {
            bb.grow(p);
        }
        bb
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        Aabb {
            min: self.min.add_scalar(-margin),
            max: self.max.add_scalar(margin),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && self.max[i] >= other.min[i])
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_sq(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Slab test; returns true if the ray `origin + t * dir`, `t >= 0`, touches the box.
    pub fn hit_by_ray(&self, origin: &Vec3, dir: &Vec3) -> bool {
        let mut t0 = 0.0_f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-300 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return false;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut ta = (self.min[i] - origin[i]) * inv;
            let mut tb = (self.max[i] - origin[i]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

/// Oriented box: `axes` columns are the box's unit axes, `half` the half extents along them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec3,
    pub axes: Matrix3<f64>,
    pub half: Vec3,
}

impl OrientedBox {
    pub fn aabb(&self) -> Aabb {
        let r = self.axes.abs() * self.half;
        Aabb {
            min: self.center - r,
            max: self.center + r,
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let local = self.axes.transpose() * (p - self.center);
        (0..3).all(|i| local[i].abs() <= self.half[i])
    }
}

/// Segment swept by a sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn aabb(&self) -> Aabb {
        let mut bb = Aabb::from_points([&self.a, &self.b]);
        bb = bb.inflate(self.radius);
        bb
    }

    pub fn center(&self) -> Vec3 {
        (self.a + self.b) * 0.5
    }
}

/// Angle in `[0, pi]` between two vectors, robust near 0 and pi.
pub fn angle_between(u: &Vec3, v: &Vec3) -> f64 {
    u.cross(v).norm().atan2(u.dot(v))
}

/// Deterministic orthonormal completion `(t1, t2)` of a unit vector `n` with `t1 x t2 = n`.
pub fn orthonormal_basis(n: &Vec3) -> (Vec3, Vec3) {
    // Duff et al., branchless ONB
    let sign = 1.0_f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let t1 = Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let t2 = Vec3::new(b, sign + n.y * n.y * a, -n.y);
    (t1, t2)
}

/// Rotation of `v` about unit `axis` by `angle` (Rodrigues).
pub fn rotate_about(v: &Vec3, axis: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Closest points between segments `p1q1` and `p2q2`.
pub fn closest_points_segments(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> (Vec3, Vec3) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    const EPS: f64 = 1e-24;
    let (s, t);
    if a <= EPS && e <= EPS {
        return (*p1, *p2);
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-14 * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p1 + d1 * s, p2 + d2 * t)
}

/// Möller–Trumbore. Returns the ray parameter of the hit, if any (both faces count).
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&qvec) * inv)
}

/// Closest points between segment `pq` and triangle `abc`: `(on_segment, on_triangle)`.
pub fn closest_points_segment_triangle(p: &Vec3, q: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, Vec3) {
    let dir = q - p;
    if let Some(t) = ray_triangle(p, &dir, a, b, c) {
        if (0.0..=1.0).contains(&t) {
            let hit = p + dir * t;
            return (hit, hit);
        }
    }
    let mut best = (*p, closest_point_on_triangle(p, a, b, c));
    let mut best_d = (best.0 - best.1).norm_squared();
    let mut consider = |s: Vec3, t: Vec3| {
        let d = (s - t).norm_squared();
        if d < best_d {
            best_d = d;
            best = (s, t);
        }
    };
    consider(*q, closest_point_on_triangle(q, a, b, c));
    for (e0, e1) in [(a, b), (b, c), (c, a)] {
        let (s, t) = closest_points_segments(p, q, e0, e1);
        consider(s, t);
    }
    best
}

/// Separating-axis test between a triangle and an oriented box.
pub fn triangle_box_overlap(tri: [&Vec3; 3], obb: &OrientedBox) -> bool {
    let rt = obb.axes.transpose();
    let v0 = rt * (tri[0] - obb.center);
    let v1 = rt * (tri[1] - obb.center);
    let v2 = rt * (tri[2] - obb.center);
    let h = obb.half;

    for i in 0..3 {
        let lo = v0[i].min(v1[i]).min(v2[i]);
        let hi = v0[i].max(v1[i]).max(v2[i]);
        if lo > h[i] || hi < -h[i] {
            return false;
        }
    }

    let f = [v1 - v0, v2 - v1, v0 - v2];
    for fe in &f {
        for i in 0..3 {
            let mut axis = Vec3::zeros();
            axis[i] = 1.0;
            let ax = axis.cross(fe);
            if ax.norm_squared() < 1e-30 {
                continue;
            }
            let p0 = v0.dot(&ax);
            let p1 = v1.dot(&ax);
            let p2 = v2.dot(&ax);
            let r = h.x * ax.x.abs() + h.y * ax.y.abs() + h.z * ax.z.abs();
            if p0.min(p1).min(p2) > r || p0.max(p1).max(p2) < -r {
                return false;
            }
        }
    }

    let n = f[0].cross(&f[1]);
    let r = h.x * n.x.abs() + h.y * n.y.abs() + h.z * n.z.abs();
    let s = n.dot(&v0);
    s.abs() <= r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::*;

    mod approx_eq {
        pub fn close(a: f64, b: f64, tol: f64) -> bool {
            (a - b).abs() <= tol
        }
    }

    #[test]
    fn onb_is_right_handed() {
        for n in [Vec3::z(), -Vec3::z(), Vec3::x(), Vec3::new(1.0, 2.0, -3.0).normalize()] {
            let (t1, t2) = orthonormal_basis(&n);
            assert!(close(t1.norm(), 1.0, 1e-12));
            assert!(close(t2.norm(), 1.0, 1e-12));
            assert!((t1.cross(&t2) - n).norm() < 1e-12);
        }
    }

    #[test]
    fn closest_point_regions() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        let p = Vec3::new(0.25, 0.25, 3.0);
        assert!((closest_point_on_triangle(&p, &a, &b, &c) - Vec3::new(0.25, 0.25, 0.0)).norm() < 1e-15);
        let p = Vec3::new(-1.0, -1.0, 0.0);
        assert_eq!(closest_point_on_triangle(&p, &a, &b, &c), a);
        let p = Vec3::new(1.0, 1.0, 0.0);
        assert!((closest_point_on_triangle(&p, &a, &b, &c) - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn segment_through_triangle_has_zero_distance() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        let (s, t) = closest_points_segment_triangle(&Vec3::new(0.2, 0.2, -1.0), &Vec3::new(0.2, 0.2, 1.0), &a, &b, &c);
        assert!((s - t).norm() < 1e-15);
        let (s, t) = closest_points_segment_triangle(&Vec3::new(2.0, 0.5, -1.0), &Vec3::new(2.0, 0.5, 1.0), &a, &b, &c);
        assert!(close(
            (s - t).norm(),
            (Vec3::new(2.0, 0.5, 0.0) - Vec3::new(1.0, 0.0, 0.0)).norm(),
            1e-12
        ));
    }

    #[test]
    fn box_triangle_sat() {
        let obb = OrientedBox {
            center: Vec3::zeros(),
            axes: Matrix3::identity(),
            half: Vec3::new(1.0, 1.0, 1.0),
        };
        let far = [
            Vec3::new(5.0, 0.0, 0.0),
            Vec3::new(6.0, 0.0, 0.0),
            Vec3::new(5.0, 1.0, 0.0),
        ];
        assert!(!triangle_box_overlap([&far[0], &far[1], &far[2]], &obb));
        let cutting = [
            Vec3::new(-3.0, -3.0, 0.5),
            Vec3::new(3.0, -3.0, 0.5),
            Vec3::new(0.0, 3.0, 0.5),
        ];
        assert!(triangle_box_overlap([&cutting[0], &cutting[1], &cutting[2]], &obb));
        // near the corner but separated along the (1,1,0) diagonal
        let diag = [
            Vec3::new(1.6, 0.5, -2.0),
            Vec3::new(0.5, 1.6, -2.0),
            Vec3::new(1.05, 1.05, 2.0),
        ];
        assert!(!triangle_box_overlap([&diag[0], &diag[1], &diag[2]], &obb));
    }

    #[test]
    fn ray_hits_triangle() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        let t = ray_triangle(&Vec3::new(0.1, 0.1, 2.0), &-Vec3::z(), &a, &b, &c).unwrap();
        assert!(close(t, 2.0, 1e-15));
        assert!(ray_triangle(&Vec3::new(1.1, 0.1, 2.0), &-Vec3::z(), &a, &b, &c).is_none());
    }
}
