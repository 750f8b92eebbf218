use crate::geometry::{Aabb, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // leaf: first..first+count into `order`; inner: children at `first` and `first + 1`
    first: u32,
    count: u32,
}

/// Median-split bounding volume hierarchy over triangle indices.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(vertices: &[Vec3], triangles: &[[u32; 3]]) -> Self {
        let bounds: Vec<Aabb> = triangles
            .iter()
            .map(|t| Aabb::from_points(t.iter().map(|&i| &vertices[i as usize])))
            .collect();
        let centers: Vec<Vec3> = bounds.iter().map(|b| b.center()).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = vec![Node {
            bounds: Aabb::empty(),
            first: 0,
            count: 0,
        }];
        let mut stack = vec![(0usize, 0usize, order.len())];
        while let Some((node, lo, hi)) = stack.pop() {
            let mut bb = Aabb::empty();
            let mut cb = Aabb::empty();
            for &t in &order[lo..hi] {
                bb = bb.union(&bounds[t as usize]);
                cb.grow(&centers[t as usize]);
            }
            nodes[node].bounds = bb;
            if hi - lo <= LEAF_SIZE {
                nodes[node].first = lo as u32;
                nodes[node].count = (hi - lo) as u32;
                continue;
            }
            let ext = cb.extent();
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            let mid = (lo + hi) / 2;
            order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
                centers[a as usize][axis]
                    .total_cmp(&centers[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
            });
            nodes.push(Node {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
            });
            nodes[node].first = left as u32;
            nodes[node].count = 0;
            stack.push((left + 1, mid, hi));
            stack.push((left, lo, mid));
        }
        Self { nodes, order }
    }

    /// Calls `f` with every triangle whose bounds intersect `query`.
    pub fn for_each_overlapping(&self, query: &Aabb, mut f: impl FnMut(usize)) {
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            if !n.bounds.intersects(query) {
                continue;
            }
            if n.count > 0 {
                for &t in &self.order[n.first as usize..(n.first + n.count) as usize] {
                    f(t as usize);
                }
            } else {
                stack.push(n.first as usize + 1);
                stack.push(n.first as usize);
            }
        }
    }

    /// Calls `f` with every triangle whose bounds the ray may touch.
    pub fn for_each_on_ray(&self, origin: &Vec3, dir: &Vec3, mut f: impl FnMut(usize)) {
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            if !n.bounds.inflate(1e-12).hit_by_ray(origin, dir) {
                continue;
            }
            if n.count > 0 {
                for &t in &self.order[n.first as usize..(n.first + n.count) as usize] {
                    f(t as usize);
                }
            } else {
                stack.push(n.first as usize + 1);
                stack.push(n.first as usize);
            }
        }
    }

    /// Best-first search for the minimum of `dist(tri)` where `lower(bounds)` bounds it from below.
    pub fn min_by(&self, lower: impl Fn(&Aabb) -> f64, mut dist: impl FnMut(usize) -> f64, mut best: f64) -> f64 {
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            if lower(&n.bounds) > best {
                continue;
            }
            if n.count > 0 {
                for &t in &self.order[n.first as usize..(n.first + n.count) as usize] {
                    best = best.min(dist(t as usize));
                }
            } else {
                let a = n.first as usize;
                let b = a + 1;
                let la = lower(&self.nodes[a].bounds);
                let lb = lower(&self.nodes[b].bounds);
                if la <= lb {
                    stack.push(b);
                    stack.push(a);
                } else {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        best
    }
}
