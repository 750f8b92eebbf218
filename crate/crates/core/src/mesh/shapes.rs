//! Procedural watertight test objects (meters, centered on the origin unless noted).

use std::f64::consts::{PI, TAU};

use super::TriangleMesh;
use crate::geometry::Vec3;

/// Icosahedron subdivided `subdivisions` times and projected on a sphere of `radius`.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache = std::collections::HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| v * radius).collect();
    TriangleMesh::new(verts, faces).expect("icosphere is valid")
}

/// Axis-aligned box with the given full extents.
pub fn cuboid(extent: Vec3) -> TriangleMesh {
    let h = extent * 0.5;
    let mut v = Vec::with_capacity(8);
    for i in 0..8 {
        v.push(Vec3::new(
            if i & 1 == 0 { -h.x } else { h.x },
            if i & 2 == 0 { -h.y } else { h.y },
            if i & 4 == 0 { -h.z } else { h.z },
        ));
    }
    let f = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh::new(v, f).expect("cuboid is valid")
}

/// Surface of revolution about +z of a closed profile `(r, z)` that starts and ends on the axis.
pub fn revolve(profile: &[(f64, f64)], segments: usize) -> TriangleMesh {
    assert!(profile.len() >= 3 && segments >= 3);
    assert!(profile[0].0 == 0.0 && profile[profile.len() - 1].0 == 0.0);
    let rings = &profile[1..profile.len() - 1];
    let mut v = vec![Vec3::new(0.0, 0.0, profile[0].1)];
    for &(r, z) in rings {
        for j in 0..segments {
            let a = TAU * j as f64 / segments as f64;
            v.push(Vec3::new(r * a.cos(), r * a.sin(), z));
        }
    }
    v.push(Vec3::new(0.0, 0.0, profile[profile.len() - 1].1));
    let last_pole = (v.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + i * segments + j % segments) as u32;
    let mut f = Vec::new();
    for j in 0..segments {
        f.push([0, ring(0, j + 1), ring(0, j)]);
    }
    for i in 0..rings.len() - 1 {
        for j in 0..segments {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j));
            f.push([a, b, c]);
            f.push([a, c, d]);
        }
    }
    let li = rings.len() - 1;
    for j in 0..segments {
        f.push([ring(li, j), ring(li, j + 1), last_pole]);
    }
    TriangleMesh::new(v, f).expect("revolved profile is valid")
}

/// Straight-walled open cup (mug body without handle); base on z = 0.
pub fn cup(outer_radius: f64, height: f64, wall: f64, segments: usize) -> TriangleMesh {
    let (r, h, w) = (outer_radius, height, wall);
    let profile = [
        (0.0, 0.0),
        (r * 0.5, 0.0),
        (r, 0.0),
        (r, h * 0.5),
        (r, h),
        (r - w, h),
        (r - w, h * 0.5),
        (r - w, w),
        ((r - w) * 0.5, w),
        (0.0, w),
    ];
    revolve(&profile, segments)
}

/// Thin hemispherical-ish bowl; base on z = 0.
pub fn bowl(outer_radius: f64, height: f64, wall: f64, segments: usize) -> TriangleMesh {
    let n = 8;
    let mut profile = vec![(0.0, 0.0)];
    for k in 1..=n {
        let a = (k as f64 / n as f64) * PI / 2.0;
        profile.push((outer_radius * a.sin(), height * (1.0 - a.cos())));
    }
    for k in (1..=n).rev() {
        let a = (k as f64 / n as f64) * PI / 2.0;
        profile.push((
            (outer_radius - wall) * a.sin(),
            wall + (height - wall) * (1.0 - a.cos()),
        ));
    }
    profile.push((0.0, wall));
    revolve(&profile, segments)
}

/// Triangular prism along y with an isosceles cross-section of the given apex angle,
/// apex up, base on z = 0.
pub fn wedge(apex_angle: f64, height: f64, length: f64) -> TriangleMesh {
    let half_base = height * (apex_angle / 2.0).tan();
    let y = length / 2.0;
    let v = vec![
        Vec3::new(-half_base, -y, 0.0),
        Vec3::new(half_base, -y, 0.0),
        Vec3::new(0.0, -y, height),
        Vec3::new(-half_base, y, 0.0),
        Vec3::new(half_base, y, 0.0),
        Vec3::new(0.0, y, height),
    ];
    let f = vec![
        [0, 2, 1],
        [3, 4, 5],
        [0, 1, 4],
        [0, 4, 3],
        [1, 2, 5],
        [1, 5, 4],
        [2, 0, 3],
        [2, 3, 5],
    ];
    TriangleMesh::new(v, f).expect("wedge is valid")
}
