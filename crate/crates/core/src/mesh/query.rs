use super::TriangleMesh;
use crate::geometry::{
    closest_points_segment_triangle, ray_triangle, triangle_box_overlap, Aabb, Capsule, OrientedBox, Vec3,
};

/// Hits closer than this ray parameter are ignored.
pub const RAY_T_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Vec3,
    pub t: f64,
    pub triangle_id: usize,
    pub normal: Vec3,
}

/// Convex collision primitive placed in the object frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexShape {
    Box(OrientedBox),
    Capsule(Capsule),
}

impl ConvexShape {
    pub fn aabb(&self) -> Aabb {
        match self {
            ConvexShape::Box(b) => b.aabb(),
            ConvexShape::Capsule(c) => c.aabb(),
        }
    }

    pub fn center(&self) -> Vec3 {
        match self {
            ConvexShape::Box(b) => b.center,
            ConvexShape::Capsule(c) => c.center(),
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            ConvexShape::Box(b) => b.contains(p),
            ConvexShape::Capsule(c) => {
                let ab = c.b - c.a;
                let t = if ab.norm_squared() > 0.0 {
                    ((p - c.a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (c.a + ab * t - p).norm() <= c.radius
            }
        }
    }
}

/// Closest pair between a segment and the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentProximity {
    pub distance: f64,
    pub on_segment: Vec3,
    pub on_mesh: Vec3,
    pub triangle_id: usize,
}

// Fixed, deliberately irrational-looking directions for parity votes.
const PARITY_DIRS: [[f64; 3]; 3] = [
    [0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
    [-0.2672612419124244, 0.8017837257372732, -0.5345224838248488],
    [0.8164965809277261, -0.4082482904638631, -0.4082482904638631],
];

impl TriangleMesh {
    /// All intersections with `t > 1e-9`, sorted by distance. Coincident hits on shared
    /// edges or vertices are merged so that crossings are counted once.
    pub fn ray_cast(&self, origin: &Vec3, direction: &Vec3) -> Vec<RayHit> {
        let mut hits = Vec::new();
        self.bvh().for_each_on_ray(origin, direction, |id| {
            let [a, b, c] = self.triangle(id);
            if let Some(t) = ray_triangle(origin, direction, &a, &b, &c) {
                if t > RAY_T_MIN {
                    hits.push(RayHit {
                        point: origin + direction * t,
                        t,
                        triangle_id: id,
                        normal: self.normals()[id],
                    });
                }
            }
        });
        hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.triangle_id.cmp(&b.triangle_id)));
        let merge_tol = 1e-12 * self.bbox().diagonal().max(1e-300);
        // Coincident hits (shared edges / vertices) collapse to their net crossing sense.
        let mut out: Vec<RayHit> = Vec::with_capacity(hits.len());
        let mut i = 0;
        while i < hits.len() {
            let mut j = i + 1;
            while j < hits.len() && hits[j].t - hits[i].t <= merge_tol {
                j += 1;
            }
            let group = &hits[i..j];
            let entering = |h: &&RayHit| h.normal.dot(direction) < 0.0;
            let n_in = group.iter().filter(entering).count() as i64;
            let net = 2 * n_in - group.len() as i64;
            if group.len() == 1 {
                out.push(group[0]);
            } else if net > 0 {
                out.extend(group.iter().find(entering).copied());
            } else if net < 0 {
                out.extend(group.iter().find(|h| !entering(h)).copied());
            } else {
                out.extend(group.iter().find(entering).copied());
                out.extend(group.iter().find(|h| !entering(h)).copied());
            }
            i = j;
        }
        out
    }

    /// Ray-parity inside test; majority vote over three fixed directions.
    pub fn contains_point(&self, p: &Vec3) -> bool {
        if !self.bbox().contains(p) {
            return false;
        }
        let votes = PARITY_DIRS
            .iter()
            .filter(|d| self.ray_cast(p, &Vec3::new(d[0], d[1], d[2])).len() % 2 == 1)
            .count();
        votes >= 2
    }

    /// True iff any triangle intersects the primitive or the primitive center is inside.
    pub fn intersects_convex(&self, shape: &ConvexShape) -> bool {
        let bb = shape.aabb();
        if !bb.intersects(self.bbox()) {
            return false;
        }
        let mut hit = false;
        match shape {
            ConvexShape::Box(obb) => {
                self.bvh().for_each_overlapping(&bb, |id| {
                    if !hit {
                        let [a, b, c] = self.triangle(id);
                        hit = triangle_box_overlap([&a, &b, &c], obb);
                    }
                });
            }
            ConvexShape::Capsule(cap) => {
                self.bvh().for_each_overlapping(&bb, |id| {
                    if !hit {
                        let [a, b, c] = self.triangle(id);
                        let (s, t) = closest_points_segment_triangle(&cap.a, &cap.b, &a, &b, &c);
                        hit = (s - t).norm() <= cap.radius;
                    }
                });
            }
        }
        hit || self.contains_point(&shape.center())
    }

    /// Closest mesh point to the segment `ab`, searching only within `max_distance`.
    pub fn closest_to_segment(&self, a: &Vec3, b: &Vec3, max_distance: f64) -> Option<SegmentProximity> {
        let seg = Aabb::from_points([a, b]);
        let mut best: Option<SegmentProximity> = None;
        let cutoff = max_distance;
        self.bvh().min_by(
            |bounds| {
                // lower bound: gap between the two boxes
                let mut d2 = 0.0;
                for i in 0..3 {
                    let g = (bounds.min[i] - seg.max[i]).max(seg.min[i] - bounds.max[i]).max(0.0);
                    d2 += g * g;
                }
                d2.sqrt()
            },
            |id| {
                let [p, q, r] = self.triangle(id);
                let (s, t) = closest_points_segment_triangle(a, b, &p, &q, &r);
                let d = (s - t).norm();
                let better = match &best {
                    None => d <= cutoff,
                    Some(bp) => d < bp.distance || (d == bp.distance && id < bp.triangle_id),
                };
                if better {
                    best = Some(SegmentProximity {
                        distance: d,
                        on_segment: s,
                        on_mesh: t,
                        triangle_id: id,
                    });
                }
                best.map_or(f64::INFINITY, |bp| bp.distance)
            },
            cutoff,
        );
        best
    }
}
