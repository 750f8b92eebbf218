//! Coverage, approach-angle histograms, voxel heatmaps and rank tests over outcome archives.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::geometry::Vec3;
use crate::qd::OutcomeArchive;
use crate::{Error, Result};

/// Default quantization step (m).
pub const DEFAULT_STEP: f64 = 0.01;

pub type Voxel = [i64; 3];

/// `round(x / step)` per axis, ties away from zero.
pub fn quantize(p: &Vec3, step: f64) -> Voxel {
    [0, 1, 2].map(|i| (p[i] / step).round() as i64)
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::Metrics(format!(
            "quantization step must be positive, got {step}"
        )))
    }
}

/// Deduplicated quantized positions of successful grasps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceGraspSet {
    pub step: f64,
    pub voxels: BTreeSet<Voxel>,
}

impl ReferenceGraspSet {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Voxel centers in meters.
    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.voxels
            .iter()
            .map(|v| Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64) * self.step)
    }
}

pub fn build_reference_set<'a>(
    archives: impl IntoIterator<Item = &'a OutcomeArchive>,
    step: f64,
) -> Result<ReferenceGraspSet> {
    check_step(step)?;
    let voxels = archives
        .into_iter()
        .flat_map(|a| a.entries.iter())
        .filter(|e| e.fitness > 0.0)
        .map(|e| quantize(&e.behavior, step))
        .collect();
    Ok(ReferenceGraspSet { step, voxels })
}

/// Step function of coverage against evaluation index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    /// `(eval_index, coverage)` at every index where coverage increases.
    pub points: Vec<(u64, f64)>,
}

impl CoverageCurve {
    /// Coverage after evaluation `eval_index` has been counted.
    pub fn at(&self, eval_index: u64) -> f64 {
        let k = self.points.partition_point(|p| p.0 <= eval_index);
        if k == 0 {
            0.0
        } else {
            self.points[k - 1].1
        }
    }

    pub fn final_value(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.1)
    }
}

pub fn coverage_curve(archive: &OutcomeArchive, reference: &ReferenceGraspSet, step: f64) -> Result<CoverageCurve> {
    check_step(step)?;
    if reference.is_empty() {
        return Err(Error::Metrics("coverage needs a nonempty reference set".into()));
    }
    let total = reference.len() as f64;
    let mut seen = BTreeSet::new();
    let mut entries: Vec<_> = archive.entries.iter().filter(|e| e.fitness > 0.0).collect();
    entries.sort_by_key(|e| e.eval_index);
    let mut points: Vec<(u64, f64)> = Vec::new();
    for e in entries {
        let v = quantize(&e.behavior, step);
        if reference.voxels.contains(&v) && seen.insert(v) {
            let c = seen.len() as f64 / total;
            match points.last_mut() {
                Some(last) if last.0 == e.eval_index => last.1 = c,
                _ => points.push((e.eval_index, c)),
            }
        }
    }
    Ok(CoverageCurve { points })
}

/// Normalized histogram of ν over `[0, π]` for successful grasps.
pub fn nu_histogram(archive: &OutcomeArchive, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::Metrics("histogram needs at least one bin".into()));
    }
    let nus: Vec<f64> = archive
        .entries
        .iter()
        .filter(|e| e.fitness > 0.0)
        .filter_map(|e| e.nu)
        .collect();
    if nus.is_empty() {
        return Err(Error::Metrics("archive carries no approach angles".into()));
    }
    let mut h = vec![0.0; bins];
    for nu in &nus {
        let b = ((nu / PI) * bins as f64).floor() as isize;
        h[b.clamp(0, bins as isize - 1) as usize] += 1.0;
    }
    let n = nus.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    Ok(h)
}

/// Fraction of successful grasps with `ν ≤ limit`.
pub fn nu_mass_below(archive: &OutcomeArchive, limit: f64) -> Result<f64> {
    let nus: Vec<f64> = archive
        .entries
        .iter()
        .filter(|e| e.fitness > 0.0)
        .filter_map(|e| e.nu)
        .collect();
    if nus.is_empty() {
        return Err(Error::Metrics("archive carries no approach angles".into()));
    }
    Ok(nus.iter().filter(|&&v| v <= limit).count() as f64 / nus.len() as f64)
}

/// Highest fitness per voxel.
pub fn voxel_heatmap(archive: &OutcomeArchive, step: f64) -> Result<BTreeMap<Voxel, f64>> {
    check_step(step)?;
    let mut map = BTreeMap::new();
    for e in archive.entries.iter().filter(|e| e.fitness > 0.0) {
        let v = map.entry(quantize(&e.behavior, step)).or_insert(f64::NEG_INFINITY);
        if e.fitness > *v {
            *v = e.fitness;
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Count of pairs with `a > b`, ties counting one half.
    pub u: f64,
    /// One-sided p-value for "a tends to exceed b".
    pub p_greater: f64,
    pub exact: bool,
}

/// Mann–Whitney U test. Exact null distribution when there are no ties, normal
/// approximation with tie and continuity correction otherwise.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Metrics("both samples must be nonempty".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Metrics("samples contain NaN".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let mut u = 0.0;
    for x in a {
        for y in b {
            u += if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            };
        }
    }
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j] == all[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    if tie_term == 0.0 {
        // counts[k] = number of orderings with U = k
        let max_u = n1 * n2;
        let dist = u_distribution(n1, n2);
        let total: f64 = dist.iter().sum();
        let k = u as usize;
        let p = dist[k..=max_u].iter().sum::<f64>() / total;
        return Ok(MannWhitney {
            u,
            p_greater: p,
            exact: true,
        });
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    let n = f1 + f2;
    let mean = f1 * f2 / 2.0;
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        if u > mean {
            0.0
        } else {
            1.0
        }
    } else {
        let z = (u - mean - 0.5) / var.sqrt();
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    };
    Ok(MannWhitney {
        u,
        p_greater: p,
        exact: false,
    })
}

/// Number of rank arrangements giving each U value.
fn u_distribution(n1: usize, n2: usize) -> Vec<f64> {
    // f[i][j][u]: arrangements of i items from sample a and j from b with statistic u
    let max_u = n1 * n2;
    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n2 + 1];
    for row in prev.iter_mut() {
        row[0] = 1.0;
    }
    for _ in 0..n1 {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n2 + 1];
        cur[0][0] = 1.0;
        for j in 1..=n2 {
            for k in 0..=max_u {
                // largest element from a: it beats all j elements of b
                let from_a = if k >= j { prev[j][k - j] } else { 0.0 };
                cur[j][k] = from_a + cur[j - 1][k];
            }
        }
        prev = cur;
    }
    prev[n2].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{Genome, GraspPose, PriorTag};
    use crate::qd::OutcomeEntry;
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn entry(i: u64, b: Vec3, fitness: f64, nu: Option<f64>) -> OutcomeEntry {
        OutcomeEntry {
            eval_index: i,
            pose: GraspPose {
                position: b,
                orientation: UnitQuaternion::identity(),
                synergy_id: 0,
                init_joints: vec![],
            },
            fitness,
            behavior: b,
            nu,
            genome: Genome::new(vec![0.0; 7], PriorTag::Contact),
        }
    }

    fn archive(points: &[(f64, f64, f64)]) -> OutcomeArchive {
        OutcomeArchive {
            entries: points
                .iter()
                .enumerate()
                .map(|(i, &(x, y, z))| entry(i as u64, Vec3::new(x, y, z), 1.0, Some(0.1)))
                .collect(),
        }
    }

    #[test]
    fn dedup_and_rounding() {
        let a = archive(&[(0.014, 0.0, 0.0)]);
        let b = archive(&[(0.006, 0.0, 0.0)]);
        let r = build_reference_set([&a, &b], 0.01).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(quantize(&Vec3::new(0.015, -0.015, 0.0), 0.01), [2, -2, 0]);
        let pos: Vec<Vec3> = r.positions().collect();
        assert!((pos[0].x - 0.01).abs() < 1e-15);
        assert!(build_reference_set([&a], 0.0).is_err());
        assert!(build_reference_set(std::iter::empty::<&OutcomeArchive>(), 0.01)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn coverage_basics() {
        let a = archive(&[(0.0, 0.0, 0.0), (0.05, 0.0, 0.0), (0.001, 0.0, 0.0), (0.1, 0.0, 0.0)]);
        let r = build_reference_set([&a], 0.01).unwrap();
        let c = coverage_curve(&a, &r, 0.01).unwrap();
        assert_eq!(c.final_value(), 1.0);
        assert_eq!(c.at(0), 1.0 / 3.0);
        assert_eq!(c.at(2), 2.0 / 3.0);
        assert_eq!(c.points.len(), 3);
        let empty = OutcomeArchive::default();
        let c = coverage_curve(&empty, &r, 0.01).unwrap();
        assert_eq!(c.at(1000), 0.0);
        assert!(coverage_curve(&a, &ReferenceGraspSet::default(), 0.01).is_err());
    }

    #[test]
    fn histogram_and_heatmap() {
        let mut a = OutcomeArchive::default();
        for i in 0..10 {
            a.entries.push(entry(i, Vec3::zeros(), 1.0 + (i % 2) as f64, Some(0.0)));
        }
        let h = nu_histogram(&a, 12).unwrap();
        assert_eq!(h[0], 1.0);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let m = voxel_heatmap(&a, 0.01).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[&[0, 0, 0]], 2.0);
        let spread = archive(&[(0.0, 0.0, 0.0), (0.02, 0.0, 0.0), (0.021, 0.0, 0.0), (0.5, 0.1, 0.0)]);
        let m = voxel_heatmap(&spread, 0.01).unwrap();
        assert_eq!(m.len(), build_reference_set([&spread], 0.01).unwrap().len());
        let no_nu = OutcomeArchive {
            entries: vec![entry(0, Vec3::zeros(), 1.0, None)],
        };
        assert!(nu_histogram(&no_nu, 4).is_err());
    }

    #[test]
    fn mann_whitney_exact_and_approximate() {
        let a = [5.0, 6.0, 7.0, 8.0, 9.0];
        let b = [0.0, 1.0, 2.0, 3.0, 4.0];
        let t = mann_whitney(&a, &b).unwrap();
        assert!(t.exact);
        assert_eq!(t.u, 25.0);
        assert!((t.p_greater - 1.0 / 252.0).abs() < 1e-12);
        let t = mann_whitney(&b, &a).unwrap();
        assert_eq!(t.p_greater, 1.0);
        // distribution is symmetric and sums to C(n1 + n2, n1)
        let d = u_distribution(4, 6);
        assert_eq!(d.iter().sum::<f64>(), 210.0);
        for k in 0..=24 {
            assert_eq!(d[k], d[24 - k]);
        }
        let t = mann_whitney(&[1.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!(!t.exact && t.p_greater < 0.2);
    }

    proptest! {
        #[test]
        fn reference_set_matches_hash_set(
            pts in proptest::collection::vec((-0.1f64..0.1, -0.1f64..0.1, -0.1f64..0.1), 0..100)
        ) {
            let a = archive(&pts);
            let r = build_reference_set([&a], 0.01).unwrap();
            let brute: HashSet<Voxel> = pts.iter().map(|&(x, y, z)| [
                (x / 0.01).round() as i64, (y / 0.01).round() as i64, (z / 0.01).round() as i64,
            ]).collect();
            prop_assert_eq!(r.voxels.len(), brute.len());
            prop_assert!(r.voxels.iter().all(|v| brute.contains(v)));
        }

        #[test]
        fn coverage_matches_prefix_recomputation(
            pts in proptest::collection::vec((-0.05f64..0.05, -0.05f64..0.05, -0.05f64..0.05, 0u8..3), 1..80),
            extra in proptest::collection::vec((-0.05f64..0.05, -0.05f64..0.05, -0.05f64..0.05), 1..30),
        ) {
            let mut a = OutcomeArchive::default();
            // indices skip around; unsuccessful entries are ignored
            for (i, &(x, y, z, f)) in pts.iter().enumerate() {
                a.entries.push(entry(3 * i as u64, Vec3::new(x, y, z), f as f64, None));
            }
            let other = archive(&extra);
            let r = build_reference_set([&a, &other], 0.01).unwrap();
            let curve = coverage_curve(&a, &r, 0.01).unwrap();
            let mut last = 0.0;
            for idx in 0..(3 * pts.len() as u64 + 2) {
                let prefix: HashSet<Voxel> = a.entries.iter()
                    .filter(|e| e.eval_index <= idx && e.fitness > 0.0)
                    .map(|e| quantize(&e.behavior, 0.01))
                    .collect();
                let brute = prefix.len() as f64 / r.len() as f64;
                prop_assert!((curve.at(idx) - brute).abs() < 1e-15);
                prop_assert!(curve.at(idx) >= last);
                last = curve.at(idx);
            }
            // pre-quantized positions give the same coverage
            let mut q = a.clone();
            for e in &mut q.entries {
                let v = quantize(&e.behavior, 0.01);
                e.behavior = Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64) * 0.01;
            }
            prop_assert_eq!(coverage_curve(&q, &r, 0.01).unwrap().final_value(), curve.final_value());
        }

        #[test]
        fn histogram_ignores_order(nus in proptest::collection::vec(0.0f64..PI, 1..50), seed in 0u64..1000) {
            let mut a = OutcomeArchive::default();
            for (i, &nu) in nus.iter().enumerate() {
                a.entries.push(entry(i as u64, Vec3::zeros(), 1.0, Some(nu)));
            }
            let h1 = nu_histogram(&a, 8).unwrap();
            let k = (seed as usize) % a.entries.len();
            a.entries.rotate_left(k);
            a.entries.reverse();
            prop_assert_eq!(h1, nu_histogram(&a, 8).unwrap());
        }
    }
}
