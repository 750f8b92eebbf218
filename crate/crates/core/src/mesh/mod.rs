//! Triangle meshes: loading, mass properties, surface sampling and geometric queries.

mod bvh;
mod io;
mod query;
mod sampling;
pub mod shapes;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};

pub use bvh::Bvh;
pub use io::{load_mesh, write_obj};
pub use query::{ConvexShape, RayHit, SegmentProximity};
pub use sampling::{sample_surface, ContactSample, SurfaceSampleSet, DEFAULT_SAMPLE_COUNT};

/// Triangles below this area are dropped at construction.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// A closed triangle mesh in meters with outward-facing normals.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    bbox: Aabb,
    area: f64,
    volume: f64,
    centroid: Vec3,
    /// Inertia tensor about the centroid for unit density.
    unit_inertia: Matrix3<f64>,
    bvh: Bvh,
}

impl TriangleMesh {
    /// Builds a mesh, dropping zero-area triangles and flipping all windings
    /// when the signed volume comes out negative.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFiniteVertex(i));
        }
        let nv = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= nv)) {
            return Err(Error::DegenerateMesh(format!(
                "triangle {t:?} references a vertex outside 0..{nv}"
            )));
        }
        let mut kept: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|t| tri_area(&vertices, t) > MIN_TRIANGLE_AREA)
            .collect();
        if kept.is_empty() {
            return Err(Error::DegenerateMesh("no triangle with nonzero area".into()));
        }

        let signed_volume: f64 = kept
            .iter()
            .map(|t| {
                let [a, b, c] = corners(&vertices, t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum();
        if signed_volume < 0.0 {
            for t in &mut kept {
                t.swap(1, 2);
            }
        }

        let mut normals = Vec::with_capacity(kept.len());
        let mut areas = Vec::with_capacity(kept.len());
        for t in &kept {
            let [a, b, c] = corners(&vertices, t);
            let cr = (b - a).cross(&(c - a));
            let len = cr.norm();
            normals.push(cr / len);
            areas.push(0.5 * len);
        }
        let area = areas.iter().sum();
        let used: Vec<Vec3> = kept
            .iter()
            .flat_map(|t| t.iter().map(|&i| vertices[i as usize]))
            .collect();
        let bbox = Aabb::from_points(used.iter());
        let (volume, centroid, unit_inertia) = mass_properties(&vertices, &kept);
        let bvh = Bvh::build(&vertices, &kept);

        Ok(Self {
            vertices,
            triangles: kept,
            normals,
            areas,
            bbox,
            area,
            volume,
            centroid,
            unit_inertia,
            bvh,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn triangle_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Center of mass for uniform density.
    pub fn centroid(&self) -> Vec3 {
        self.centroid
    }

    /// Inertia tensor about the centroid for a given uniform density (kg/m³).
    pub fn inertia(&self, density: f64) -> Matrix3<f64> {
        self.unit_inertia * density
    }

    pub fn mass(&self, density: f64) -> f64 {
        self.volume * density
    }

    pub fn triangle(&self, id: usize) -> [Vec3; 3] {
        corners(&self.vertices, &self.triangles[id])
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub(crate) fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Stable content hash over vertex and index data, used to tie run outputs to a mesh.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for v in &self.vertices {
            for c in v.iter() {
                h.update(c.to_le_bytes());
            }
        }
        for t in &self.triangles {
            for i in t {
                h.update(i.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn corners(vertices: &[Vec3], t: &[u32; 3]) -> [Vec3; 3] {
    [
        vertices[t[0] as usize],
        vertices[t[1] as usize],
        vertices[t[2] as usize],
    ]
}

fn tri_area(vertices: &[Vec3], t: &[u32; 3]) -> f64 {
    let [a, b, c] = corners(vertices, t);
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Volume, centroid and unit-density inertia about the centroid
/// (Eberly, "Polyhedral Mass Properties").
fn mass_properties(vertices: &[Vec3], triangles: &[[u32; 3]]) -> (f64, Vec3, Matrix3<f64>) {
    let mut integral = [0.0_f64; 10];
    // subexpressions of the divergence-theorem integrals
    let sub = |w0: f64, w1: f64, w2: f64| {
        let t0 = w0 + w1;
        let f1 = t0 + w2;
        let t1 = w0 * w0;
        let t2 = t1 + w1 * t0;
        let f2 = t2 + w2 * f1;
        let f3 = w0 * t1 + w1 * t2 + w2 * f2;
        let g0 = f2 + w0 * (f1 + w0);
        let g1 = f2 + w1 * (f1 + w1);
        let g2 = f2 + w2 * (f1 + w2);
        (f1, f2, f3, g0, g1, g2)
    };
    // Shift to a local origin for conditioning.
    let origin = vertices[triangles[0][0] as usize];
    for t in triangles {
        let [p0, p1, p2] = corners(vertices, t).map(|p| p - origin);
        let d = (p1 - p0).cross(&(p2 - p0));
        let (f1x, f2x, f3x, g0x, g1x, g2x) = sub(p0.x, p1.x, p2.x);
        let (_f1y, f2y, f3y, g0y, g1y, g2y) = sub(p0.y, p1.y, p2.y);
        let (_f1z, f2z, f3z, g0z, g1z, g2z) = sub(p0.z, p1.z, p2.z);
        integral[0] += d.x * f1x;
        integral[1] += d.x * f2x;
        integral[2] += d.y * f2y;
        integral[3] += d.z * f2z;
        integral[4] += d.x * f3x;
        integral[5] += d.y * f3y;
        integral[6] += d.z * f3z;
        integral[7] += d.x * (p0.y * g0x + p1.y * g1x + p2.y * g2x);
        integral[8] += d.y * (p0.z * g0y + p1.z * g1y + p2.z * g2y);
        integral[9] += d.z * (p0.x * g0z + p1.x * g1z + p2.x * g2z);
    }
    let mult = [
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 24.0,
        1.0 / 24.0,
        1.0 / 60.0,
        1.0 / 60.0,
        1.0 / 60.0,
        1.0 / 120.0,
        1.0 / 120.0,
        1.0 / 120.0,
    ];
    for (v, m) in integral.iter_mut().zip(mult) {
        *v *= m;
    }
    let volume = integral[0];
    let c = Vec3::new(integral[1], integral[2], integral[3]) / volume;
    let ixx = integral[5] + integral[6] - volume * (c.y * c.y + c.z * c.z);
    let iyy = integral[4] + integral[6] - volume * (c.z * c.z + c.x * c.x);
    let izz = integral[4] + integral[5] - volume * (c.x * c.x + c.y * c.y);
    let ixy = -(integral[7] - volume * c.x * c.y);
    let iyz = -(integral[8] - volume * c.y * c.z);
    let ixz = -(integral[9] - volume * c.z * c.x);
    let inertia = Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz);
    (volume, c + origin, inertia)
}

#[cfg(test)]
mod tests {
    use super::shapes;
    use super::*;

    #[test]
    fn unit_cube_area_volume_inertia() {
        let m = shapes::cuboid(Vec3::new(1.0, 1.0, 1.0));
        assert!((m.area() - 6.0).abs() < 1e-12);
        assert!((m.volume() - 1.0).abs() < 1e-12);
        assert!(m.centroid().norm() < 1e-12);
        // solid cube about its center: m a² / 6
        let i = m.inertia(1.0);
        assert!((i[(0, 0)] - 1.0 / 6.0).abs() < 1e-12);
        assert!(i[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn inverted_winding_is_flipped() {
        let m = shapes::cuboid(Vec3::new(0.1, 0.2, 0.3));
        let flipped: Vec<[u32; 3]> = m.triangles().iter().map(|t| [t[0], t[2], t[1]]).collect();
        let m2 = TriangleMesh::new(m.vertices().to_vec(), flipped).unwrap();
        assert!(m2.volume() > 0.0);
        for (t, n) in m2.triangles().iter().zip(m2.normals()) {
            let c = (m2.vertices()[t[0] as usize] + m2.vertices()[t[1] as usize] + m2.vertices()[t[2] as usize]) / 3.0;
            assert!(c.dot(n) > 0.0);
        }
    }

    #[test]
    fn empty_and_degenerate_inputs_fail() {
        assert!(matches!(
            TriangleMesh::new(vec![], vec![]),
            Err(Error::DegenerateMesh(_))
        ));
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(matches!(
            TriangleMesh::new(v, vec![[0, 1, 2]]),
            Err(Error::DegenerateMesh(_))
        ));
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::new(f64::NAN, 0.0, 0.0)];
        assert!(matches!(
            TriangleMesh::new(v, vec![[0, 1, 2]]),
            Err(Error::NonFiniteVertex(2))
        ));
    }

    #[test]
    fn normals_unit_and_bbox_contains_vertices() {
        let m = shapes::icosphere(0.05, 3);
        for n in m.normals() {
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
        for v in m.vertices() {
            assert!(m.bbox().contains(v));
        }
    }
}
