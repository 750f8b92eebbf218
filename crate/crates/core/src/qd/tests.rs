use std::collections::HashMap;

use super::*;
use crate::gripper::GripperSpec;
use crate::mesh::{sample_surface, shapes, SurfaceSampleSet, TriangleMesh};

struct Fixture {
    mesh: TriangleMesh,
    samples: SurfaceSampleSet,
    spec: GripperSpec,
}

impl Fixture {
    fn sphere() -> Self {
        let mesh = shapes::icosphere(0.035, 3);
        let samples = sample_surface(&mesh, 2000, 0);
        Self {
            mesh,
            samples,
            spec: GripperSpec::preset("panda").unwrap(),
        }
    }

    fn scene(&self) -> Scene<'_> {
        Scene {
            projector: Projector::new(&self.mesh, &self.samples, &self.spec),
            physics: PhysicsParams::default(),
            mode: FitnessMode::Shake,
            mdr: MdrParams::default(),
        }
    }
}

fn small(budget: usize) -> QdConfig {
    QdConfig {
        population: 100,
        offspring: 100,
        budget,
        ..QdConfig::default()
    }
}

fn replay_check(out: &RunOutput) {
    let grid = out.grid.as_ref().unwrap();
    let mut best: HashMap<[i64; 3], f64> = HashMap::new();
    for r in &out.log {
        if let (true, Some(b)) = (r.valid, r.behavior) {
            if let Some(c) = grid.cell_of(&b) {
                let e = best.entry(c).or_insert(f64::NEG_INFINITY);
                *e = e.max(r.fitness);
            }
        }
    }
    assert_eq!(best.len(), grid.len());
    for (c, f) in best {
        assert_eq!(grid.get(&c).unwrap().fitness, f);
    }
    let in_archive: std::collections::HashSet<u64> = out.archive.entries.iter().map(|e| e.eval_index).collect();
    for e in grid.elites() {
        if e.fitness > 0.0 {
            assert!(in_archive.contains(&e.eval_index));
        }
    }
    let successes = out.log.iter().filter(|r| r.success()).count();
    assert_eq!(successes, out.archive.len());
}

#[test]
fn zero_budget_gives_empty_archive() {
    let fx = Fixture::sphere();
    for alg in Algorithm::ALL {
        let out = run(alg, &fx.scene(), PriorTag::Contact, &small(0), 1);
        assert!(out.archive.is_empty());
        assert_eq!(out.evaluations(), 0);
    }
}

#[test]
fn budgets_are_exact_and_grids_replay() {
    let fx = Fixture::sphere();
    for alg in Algorithm::ALL {
        for prior in [PriorTag::Contact, PriorTag::Antipodal] {
            let out = run(alg, &fx.scene(), prior, &small(737), 3);
            assert_eq!(out.evaluations(), 737, "{alg} {prior}");
            for (i, r) in out.log.iter().enumerate() {
                assert_eq!(r.eval_index, i as u64);
            }
            replay_check(&out);
        }
    }
}

#[test]
fn sphere_antipodal_sampling_succeeds() {
    let fx = Fixture::sphere();
    let out = run_random(&fx.scene(), PriorTag::Antipodal, &small(300), 5);
    assert!(out.archive.len() > 30, "{} successes", out.archive.len());
}

#[test]
fn runs_are_deterministic_across_worker_counts() {
    let fx = Fixture::sphere();
    let scene = fx.scene();
    for alg in Algorithm::ALL {
        let go = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run(alg, &scene, PriorTag::Approach, &small(400), 11))
        };
        let a = go(1);
        let b = go(4);
        assert_eq!(a.archive, b.archive, "{alg}");
        assert_eq!(a.log, b.log);
        assert_eq!(a.grid, b.grid);
    }
}

#[test]
fn mutation_without_probability_copies_parent() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let parent = Genome::new(vec![0.1, -0.4, 0.9, 1.0, -1.0, 0.0, 0.3], PriorTag::Contact);
    for _ in 0..100 {
        assert_eq!(mutate(&parent, 0.0, 0.1, &mut rng), parent);
        let child = mutate(&parent, 1.0, 0.5, &mut rng);
        assert!(child.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn emitters_restart_in_dead_regions() {
    // long fat fingers with a 1 mm gap always run into the ball
    let mut fx = Fixture::sphere();
    fx.spec.max_aperture = 0.001;
    fx.spec.finger_length = 0.2;
    fx.spec.finger_radii = vec![0.02, 0.02];
    let out = run_cma_mae(&fx.scene(), PriorTag::Approach, &small(400), 2);
    assert!(out.log.iter().all(|r| !r.valid));
    assert!(out.restarts > 0);
}

#[test]
fn seeds_are_mixed() {
    assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    assert_eq!(derive_seed(7, 9), derive_seed(7, 9));
}
