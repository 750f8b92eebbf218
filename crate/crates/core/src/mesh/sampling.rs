use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::geometry::{Aabb, Vec3};

/// Grid resolution: cell edge = bounding-box diagonal / this.
const GRID_DIVISIONS: f64 = 32.0;

/// A point on the object surface with the outward normal of its triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub triangle_id: usize,
}

/// The precomputed contact set with a uniform hash grid over sample positions.
#[derive(Debug, Clone)]
pub struct SurfaceSampleSet {
    samples: Vec<ContactSample>,
    origin: Vec3,
    cell: f64,
    dims: [i64; 3],
    cell_start: Vec<u32>,
    items: Vec<u32>,
}

/// Default size of the contact sample set.
pub const DEFAULT_SAMPLE_COUNT: usize = 4096;

/// Draws `n_samples` points area-weighted over triangles and uniform in barycentric
/// coordinates inside each triangle.
pub fn sample_surface(mesh: &TriangleMesh, n_samples: usize, seed: u64) -> SurfaceSampleSet {
    assert!(n_samples >= 1, "n_samples must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cdf = Vec::with_capacity(mesh.len());
    let mut acc = 0.0;
    for a in mesh.triangle_areas() {
        acc += a;
        cdf.push(acc);
    }
    let total = acc;
    let samples = (0..n_samples)
        .map(|_| {
            let r: f64 = rng.random::<f64>() * total;
            let id = cdf.partition_point(|&c| c <= r).min(mesh.len() - 1);
            let [a, b, c] = mesh.triangle(id);
            let mut u: f64 = rng.random();
            let mut v: f64 = rng.random();
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            ContactSample {
                position: a + (b - a) * u + (c - a) * v,
                normal: mesh.normals()[id],
                triangle_id: id,
            }
        })
        .collect();
    SurfaceSampleSet::from_samples(samples, mesh.bbox().diagonal() / GRID_DIVISIONS)
}

impl SurfaceSampleSet {
    /// Builds the grid index; `cell` is the grid edge length.
    pub fn from_samples(samples: Vec<ContactSample>, cell: f64) -> Self {
        assert!(!samples.is_empty(), "sample set must be nonempty");
        let bb = Aabb::from_points(samples.iter().map(|s| &s.position));
        let cell = if cell > 0.0 { cell } else { 1.0 };
        let ext = bb.extent();
        let dims = [0, 1, 2].map(|i| (ext[i] / cell).floor() as i64 + 1);
        let ncells = (dims[0] * dims[1] * dims[2]) as usize;
        let mut set = Self {
            samples,
            origin: bb.min,
            cell,
            dims,
            cell_start: vec![0; ncells + 1],
            items: Vec::new(),
        };
        let keys: Vec<usize> = set
            .samples
            .iter()
            .map(|s| {
                let c = set.cell_of(&s.position);
                set.linear(c.map(|x| x.clamp(0, i64::MAX)))
            })
            .collect();
        for &k in &keys {
            set.cell_start[k + 1] += 1;
        }
        for i in 0..ncells {
            set.cell_start[i + 1] += set.cell_start[i];
        }
        let mut fill = set.cell_start.clone();
        set.items = vec![0; keys.len()];
        for (i, &k) in keys.iter().enumerate() {
            set.items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        set
    }

    pub fn samples(&self) -> &[ContactSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn cell_of(&self, p: &Vec3) -> [i64; 3] {
        [0, 1, 2].map(|i| {
            let c = ((p[i] - self.origin[i]) / self.cell).floor();
            // keep far-away queries representable
            c.clamp(-1e15, 1e15) as i64
        })
    }

    fn linear(&self, c: [i64; 3]) -> usize {
        let c = [0, 1, 2].map(|i| c[i].min(self.dims[i] - 1));
        (c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])) as usize
    }

    /// Index of the sample nearest to `query`; ties go to the lowest index.
    pub fn nearest_index(&self, query: &Vec3) -> usize {
        let q = self.cell_of(query);
        let mut best = (f64::INFINITY, usize::MAX);
        // Chebyshev distance from q to the grid's index range
        let s_start = (0..3)
            .map(|i| {
                if q[i] < 0 {
                    -q[i]
                } else if q[i] >= self.dims[i] {
                    q[i] - self.dims[i] + 1
                } else {
                    0
                }
            })
            .max()
            .unwrap();
        let s_max = s_start + self.dims.iter().max().unwrap();
        let mut s = s_start;
        while s <= s_max {
            // every cell at shell s is at least (s - 1) * cell away from the query
            if s >= 1 {
                let lb = (s - 1) as f64 * self.cell;
                if lb * lb > best.0 {
                    break;
                }
            }
            self.visit_shell(q, s, |idx| {
                let d = (self.samples[idx].position - query).norm_squared();
                if d < best.0 || (d == best.0 && idx < best.1) {
                    best = (d, idx);
                }
            });
            s += 1;
        }
        best.1
    }

    pub fn nearest(&self, query: &Vec3) -> &ContactSample {
        &self.samples[self.nearest_index(query)]
    }

    fn visit_shell(&self, q: [i64; 3], s: i64, mut f: impl FnMut(usize)) {
        let lo = |i: usize| (q[i] - s).max(0);
        let hi = |i: usize| (q[i] + s).min(self.dims[i] - 1);
        if lo(0) > hi(0) || lo(1) > hi(1) || lo(2) > hi(2) {
            return;
        }
        for z in lo(2)..=hi(2) {
            let z_face = (z - q[2]).abs() == s;
            for y in lo(1)..=hi(1) {
                let yz_face = z_face || (y - q[1]).abs() == s;
                let visit_x = |x: i64, f: &mut dyn FnMut(usize)| {
                    let k = (x + self.dims[0] * (y + self.dims[1] * z)) as usize;
                    for &i in &self.items[self.cell_start[k] as usize..self.cell_start[k + 1] as usize] {
                        f(i as usize);
                    }
                };
                if yz_face {
                    for x in lo(0)..=hi(0) {
                        visit_x(x, &mut f);
                    }
                } else {
                    for x in [q[0] - s, q[0] + s] {
                        if x >= 0 && x < self.dims[0] {
                            visit_x(x, &mut f);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use proptest::prelude::*;

    fn brute_force(set: &SurfaceSampleSet, q: &Vec3) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, s) in set.samples().iter().enumerate() {
            let d = (s.position - q).norm_squared();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    #[test]
    fn samples_lie_on_their_triangle() {
        let mesh = shapes::icosphere(0.05, 2);
        let set = sample_surface(&mesh, 500, 7);
        for s in set.samples() {
            let [a, _, _] = mesh.triangle(s.triangle_id);
            let n = mesh.normals()[s.triangle_id];
            assert!((s.position - a).dot(&n).abs() < 1e-9);
            assert_eq!(s.normal, n);
        }
    }

    #[test]
    fn single_sample_and_determinism() {
        let mesh = shapes::cuboid(Vec3::new(0.1, 0.1, 0.1));
        let one = sample_surface(&mesh, 1, 3);
        assert_eq!(one.len(), 1);
        let p = one.samples()[0].position;
        let on_face = (0..3).any(|i| (p[i].abs() - 0.05).abs() < 1e-12);
        assert!(on_face);
        let a = sample_surface(&mesh, 300, 11);
        let b = sample_surface(&mesh, 300, 11);
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn exact_sample_and_far_queries() {
        let mesh = shapes::icosphere(0.05, 2);
        let set = sample_surface(&mesh, 500, 1);
        for i in [0, 17, 499] {
            let q = set.samples()[i].position;
            assert_eq!(set.nearest_index(&q), i);
        }
        let far = Vec3::new(100.0, -50.0, 3.0);
        assert_eq!(set.nearest_index(&far), brute_force(&set, &far));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let s = |x: f64| ContactSample {
            position: Vec3::new(x, 0.0, 0.0),
            normal: Vec3::z(),
            triangle_id: 0,
        };
        let set = SurfaceSampleSet::from_samples(vec![s(1.0), s(-1.0), s(1.0), s(3.0)], 0.5);
        assert_eq!(set.nearest_index(&Vec3::zeros()), 0);
        assert_eq!(set.nearest_index(&Vec3::new(1.0, 0.0, 0.0)), 0);
    }

    #[test]
    fn face_counts_follow_area() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        // faces grouped by normal axis: areas 0.04*0.02, 0.1*0.02, 0.1*0.04 per pair
        let mesh = shapes::cuboid(Vec3::new(0.1, 0.04, 0.02));
        let n = 20_000;
        let set = sample_surface(&mesh, n, 42);
        let mut counts = [0.0f64; 3];
        for s in set.samples() {
            counts[s.normal.iamax()] += 1.0;
        }
        let areas = [0.04 * 0.02, 0.1 * 0.02, 0.1 * 0.04];
        let total: f64 = areas.iter().sum();
        let chi2: f64 = (0..3)
            .map(|i| {
                let expected = n as f64 * areas[i] / total;
                (counts[i] - expected).powi(2) / expected
            })
            .sum();
        let p = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
        assert!(p > 1e-3, "chi2 {chi2:.2}, p {p:.2e}, counts {counts:?}");
    }

    proptest! {
        #[test]
        fn grid_matches_linear_scan(x in -0.2f64..0.2, y in -0.2f64..0.2, z in -0.2f64..0.2) {
            let mesh = shapes::cup(0.035, 0.09, 0.006, 24);
            let set = sample_surface(&mesh, 500, 5);
            let q = Vec3::new(x, y, z);
            prop_assert_eq!(set.nearest_index(&q), brute_force(&set, &q));
        }
    }
}
