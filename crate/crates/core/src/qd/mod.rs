//! Search loops: random sampling, MAP-Elites variants and CMA-MAE.

mod cma;
mod grid;

pub use cma::CmaEs;
pub use grid::{BehaviorGrid, Elite, InsertOutcome, ThresholdArchive};

use nalgebra::DVector;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluator::{evaluate, evaluate_mdr, EvaluationResult, MdrParams, PhysicsParams};
use crate::geometry::{Aabb, Vec3};
use crate::projection::{genome_len, Genome, GraspPose, PriorTag, Projector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "ME_rand")]
    MeRand,
    #[serde(rename = "ME_scs")]
    MeScs,
    #[serde(rename = "CMA_MAE")]
    CmaMae,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::Random, Self::MeRand, Self::MeScs, Self::CmaMae];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Random => "random",
            Algorithm::MeRand => "ME_rand",
            Algorithm::MeScs => "ME_scs",
            Algorithm::CmaMae => "CMA_MAE",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected random, ME_rand, ME_scs or CMA_MAE)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QdConfig {
    /// Initial random population μ.
    pub population: usize,
    /// Offspring per generation λ.
    pub offspring: usize,
    pub novelty_k: usize,
    /// Evaluation budget N_e.
    pub budget: usize,
    pub ind_pb: f64,
    pub sigma: f64,
    pub emitter_batch: usize,
    pub emitters: usize,
    pub emitter_sigma: f64,
    pub f_min: f64,
    pub alpha: f64,
    /// Behavior grid cell edge (m).
    pub cell_size: f64,
}

impl Default for QdConfig {
    fn default() -> Self {
        Self {
            population: 500,
            offspring: 500,
            novelty_k: 15,
            budget: 100_000,
            ind_pb: 0.3,
            sigma: 0.1,
            emitter_batch: 36,
            emitters: 15,
            emitter_sigma: 0.5,
            f_min: -1.0,
            alpha: 0.01,
            cell_size: 0.01,
        }
    }
}

impl QdConfig {
    /// Returns the offending key and a message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive = |k: &'static str, v: usize| {
            if v == 0 {
                Err((k, "must be at least 1".to_string()))
            } else {
                Ok(())
            }
        };
        positive("population", self.population)?;
        positive("offspring", self.offspring)?;
        positive("novelty_k", self.novelty_k)?;
        positive("emitters", self.emitters)?;
        if self.emitter_batch < 2 {
            return Err(("emitter_batch", "must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.ind_pb) {
            return Err(("ind_pb", "must lie in [0, 1]".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(("sigma", "must be finite and >= 0".into()));
        }
        if !(self.emitter_sigma > 0.0 && self.emitter_sigma.is_finite()) {
            return Err(("emitter_sigma", "must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(("alpha", "must lie in (0, 1]".into()));
        }
        if !self.f_min.is_finite() {
            return Err(("f_min", "must be finite".into()));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(("cell_size", "must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    Shake,
    Mdr,
}

/// Everything needed to turn a genome into an evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub projector: Projector<'a>,
    pub physics: PhysicsParams,
    pub mode: FitnessMode,
    pub mdr: MdrParams,
}

/// One evaluated genome, as written to the evaluation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub eval_index: u64,
    pub genome: Genome,
    pub valid: bool,
    pub fitness: f64,
    /// Absent when the projection was rejected.
    pub behavior: Option<Vec3>,
    pub nu: Option<f64>,
    #[serde(skip)]
    pub pose: Option<GraspPose>,
}

impl EvalRecord {
    pub fn success(&self) -> bool {
        self.valid && self.fitness > 0.0
    }
}

/// Mixes a run seed with an evaluation index (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        ^ index
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Scene<'_> {
    pub fn genome_len(&self, prior: PriorTag) -> usize {
        genome_len(prior, self.projector.spec)
    }

    /// Behavior bounds: object box grown by the palm reach.
    pub fn behavior_bounds(&self) -> Aabb {
        self.projector.mesh.bbox().inflate(self.projector.spec.d_max())
    }

    pub fn evaluate(&self, genome: &Genome, eval_index: u64, seed: u64) -> EvalRecord {
        let mut rec = EvalRecord {
            eval_index,
            genome: genome.clone(),
            valid: false,
            fitness: 0.0,
            behavior: None,
            nu: None,
            pose: None,
        };
        let Ok(proj) = self.projector.project(genome) else {
            return rec;
        };
        let p = &self.projector;
        let res: EvaluationResult = match self.mode {
            FitnessMode::Shake => evaluate(&proj.pose, p.mesh, p.spec, &self.physics),
            FitnessMode::Mdr => evaluate_mdr(
                &proj.pose,
                p.mesh,
                p.spec,
                &self.physics,
                &self.mdr,
                derive_seed(seed, eval_index),
            ),
        };
        rec.valid = res.valid;
        rec.fitness = res.fitness;
        rec.behavior = Some(res.behavior);
        rec.nu = proj.nu;
        rec.pose = Some(proj.pose);
        rec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    pub eval_index: u64,
    pub pose: GraspPose,
    pub fitness: f64,
    pub behavior: Vec3,
    pub nu: Option<f64>,
    pub genome: Genome,
}

/// Grow-only record of every successful grasp.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeArchive {
    pub entries: Vec<OutcomeEntry>,
}

impl OutcomeArchive {
    pub fn push(&mut self, rec: &EvalRecord) {
        if let (true, Some(pose), Some(b)) = (rec.success(), &rec.pose, rec.behavior) {
            self.entries.push(OutcomeEntry {
                eval_index: rec.eval_index,
                pose: pose.clone(),
                fitness: rec.fitness,
                behavior: b,
                nu: rec.nu,
                genome: rec.genome.clone(),
            });
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub grid: Option<BehaviorGrid>,
    pub archive: OutcomeArchive,
    pub log: Vec<EvalRecord>,
    pub restarts: u64,
}

impl RunOutput {
    pub fn evaluations(&self) -> usize {
        self.log.len()
    }
}

/// Shared bookkeeping: budget, log, outcome archive and optional grid.
struct Book<'s, 'a> {
    scene: &'s Scene<'a>,
    prior: PriorTag,
    seed: u64,
    budget: usize,
    log: Vec<EvalRecord>,
    archive: OutcomeArchive,
}

impl<'s, 'a> Book<'s, 'a> {
    fn remaining(&self) -> usize {
        self.budget - self.log.len()
    }

    /// Evaluates a batch in parallel; results come back in input order.
    fn evaluate(&mut self, genomes: Vec<Genome>) -> Vec<EvalRecord> {
        let start = self.log.len() as u64;
        let scene = self.scene;
        let seed = self.seed;
        let recs: Vec<EvalRecord> = genomes
            .into_par_iter()
            .enumerate()
            .map(|(i, g)| scene.evaluate(&g, start + i as u64, seed))
            .collect();
        for r in &recs {
            self.archive.push(r);
        }
        self.log.extend(recs.iter().cloned());
        recs
    }

    fn random_genome(&self, rng: &mut impl Rng) -> Genome {
        let n = self.scene.genome_len(self.prior);
        Genome::new((0..n).map(|_| rng.random_range(-1.0..=1.0)).collect(), self.prior)
    }

    fn finish(self, grid: Option<BehaviorGrid>, restarts: u64) -> RunOutput {
        RunOutput {
            grid,
            archive: self.archive,
            log: self.log,
            restarts,
        }
    }
}

fn insert_all(grid: &mut BehaviorGrid, recs: &[EvalRecord]) {
    for r in recs {
        if let (true, Some(b)) = (r.valid, r.behavior) {
            grid.insert(&r.genome, r.fitness, b, r.eval_index);
        }
    }
}

/// Uniform sampling of the genome space.
pub fn run_random(scene: &Scene, prior: PriorTag, config: &QdConfig, seed: u64) -> RunOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut book = Book {
        scene,
        prior,
        seed,
        budget: config.budget,
        log: Vec::with_capacity(config.budget),
        archive: OutcomeArchive::default(),
    };
    let mut grid = BehaviorGrid::new(scene.behavior_bounds(), config.cell_size);
    while book.remaining() > 0 {
        let n = book.remaining().min(config.offspring.max(1));
        let batch: Vec<Genome> = (0..n).map(|_| book.random_genome(&mut rng)).collect();
        let recs = book.evaluate(batch);
        insert_all(&mut grid, &recs);
    }
    book.finish(Some(grid), 0)
}

/// Per-gene Gaussian mutation with probability `ind_pb`, clamped to `[-1, 1]`.
pub fn mutate(parent: &Genome, ind_pb: f64, sigma: f64, rng: &mut impl Rng) -> Genome {
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let values = parent
        .values
        .iter()
        .map(|&v| {
            if rng.random::<f64>() < ind_pb {
                (v + noise.sample(rng)).clamp(-1.0, 1.0)
            } else {
                v
            }
        })
        .collect();
    Genome {
        values,
        prior: parent.prior,
    }
}

/// Mean distance to the `k` nearest other elites in behavior space.
fn novelty_scores(elites: &[Elite], k: usize) -> Vec<f64> {
    elites
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut d: Vec<f64> = elites
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, o)| (o.behavior - e.behavior).norm())
                .collect();
            if d.is_empty() {
                return 0.0;
            }
            let k = k.min(d.len());
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[..k].iter().sum::<f64>() / k as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapElitesVariant {
    Random,
    SuccessConditioned,
}

/// MAP-Elites with uniform (`Random`) or success-conditioned parent selection.
pub fn run_map_elites(
    variant: MapElitesVariant,
    scene: &Scene,
    prior: PriorTag,
    config: &QdConfig,
    seed: u64,
) -> RunOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut book = Book {
        scene,
        prior,
        seed,
        budget: config.budget,
        log: Vec::with_capacity(config.budget),
        archive: OutcomeArchive::default(),
    };
    let mut grid = BehaviorGrid::new(scene.behavior_bounds(), config.cell_size);
    let n0 = config.population.min(book.remaining());
    let init: Vec<Genome> = (0..n0).map(|_| book.random_genome(&mut rng)).collect();
    let recs = book.evaluate(init);
    insert_all(&mut grid, &recs);

    while book.remaining() > 0 {
        let n = book.remaining().min(config.offspring);
        let elites = grid.elites();
        let successes: Vec<&Elite> = elites.iter().filter(|e| e.fitness > 0.0).collect();
        let parents: Vec<Option<Genome>> = if elites.is_empty() {
            vec![None; n]
        } else if variant == MapElitesVariant::Random || !successes.is_empty() {
            let pool: Vec<&Elite> = match variant {
                MapElitesVariant::Random => elites.iter().collect(),
                MapElitesVariant::SuccessConditioned => successes,
            };
            (0..n)
                .map(|_| Some(pool.choose(&mut rng).expect("nonempty pool").genome.clone()))
                .collect()
        } else {
            // no success yet: binary tournaments on novelty
            let nov = novelty_scores(elites, config.novelty_k);
            (0..n)
                .map(|_| {
                    let a = rng.random_range(0..elites.len());
                    let b = rng.random_range(0..elites.len());
                    let w = if nov[b] > nov[a] { b } else { a };
                    Some(elites[w].genome.clone())
                })
                .collect()
        };
        let batch: Vec<Genome> = parents
            .into_iter()
            .map(|p| match p {
                Some(p) => mutate(&p, config.ind_pb, config.sigma, &mut rng),
                None => book.random_genome(&mut rng),
            })
            .collect();
        let recs = book.evaluate(batch);
        insert_all(&mut grid, &recs);
    }
    book.finish(Some(grid), 0)
}

/// CMA-MAE: CMA-ES emitters ranked by improvement over annealed cell thresholds.
pub fn run_cma_mae(scene: &Scene, prior: PriorTag, config: &QdConfig, seed: u64) -> RunOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut book = Book {
        scene,
        prior,
        seed,
        budget: config.budget,
        log: Vec::with_capacity(config.budget),
        archive: OutcomeArchive::default(),
    };
    let bounds = scene.behavior_bounds();
    let mut grid = BehaviorGrid::new(bounds, config.cell_size);
    let mut thresholds = ThresholdArchive::new(bounds, config.cell_size, config.f_min, config.alpha);
    let n = scene.genome_len(prior);
    let start = |rng: &mut ChaCha8Rng, grid: &BehaviorGrid| {
        let mean = match grid.elites().choose(rng) {
            Some(e) => DVector::from_vec(e.genome.values.clone()),
            None => DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0)),
        };
        CmaEs::new(mean, config.emitter_sigma, config.emitter_batch)
    };
    let mut emitters: Vec<CmaEs> = (0..config.emitters).map(|_| start(&mut rng, &grid)).collect();
    let mut restarts = 0u64;
    'outer: loop {
        for e in 0..emitters.len() {
            if book.remaining() == 0 {
                break 'outer;
            }
            let count = book.remaining().min(config.emitter_batch);
            let xs = emitters[e].ask(&mut rng, count, -1.0, 1.0);
            let batch: Vec<Genome> = xs.iter().map(|x| Genome::new(x.as_slice().to_vec(), prior)).collect();
            let recs = book.evaluate(batch);
            let mut scored: Vec<(f64, usize)> = Vec::with_capacity(recs.len());
            let mut improved = false;
            for (i, r) in recs.iter().enumerate() {
                let gain = match (r.valid, r.behavior) {
                    (true, Some(b)) => {
                        grid.insert(&r.genome, r.fitness, b, r.eval_index);
                        thresholds.offer(r.fitness, &b)
                    }
                    _ => None,
                };
                improved |= gain.is_some_and(|g| g > 0.0);
                scored.push((gain.unwrap_or(f64::NEG_INFINITY), i));
            }
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let ranked: Vec<DVector<f64>> = scored.iter().map(|&(_, i)| xs[i].clone()).collect();
            if count == config.emitter_batch {
                emitters[e].tell(&ranked);
            }
            if !improved || emitters[e].converged() {
                emitters[e] = start(&mut rng, &grid);
                restarts += 1;
            }
        }
    }
    book.finish(Some(grid), restarts)
}

/// Dispatches on the algorithm.
pub fn run(algorithm: Algorithm, scene: &Scene, prior: PriorTag, config: &QdConfig, seed: u64) -> RunOutput {
    match algorithm {
        Algorithm::Random => run_random(scene, prior, config, seed),
        Algorithm::MeRand => run_map_elites(MapElitesVariant::Random, scene, prior, config, seed),
        Algorithm::MeScs => run_map_elites(MapElitesVariant::SuccessConditioned, scene, prior, config, seed),
        Algorithm::CmaMae => run_cma_mae(scene, prior, config, seed),
    }
}

#[cfg(test)]
mod tests;
