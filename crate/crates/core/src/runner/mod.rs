//! Experiment orchestration: config, run directories, comparisons.

pub mod artifacts;
mod config;

pub use config::{apply_override, GripperChoice, MeshSection, PresetRef, RunConfig, RunSection, OUTPUT_ROOT_ENV};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gripper::GripperSpec;
use crate::mesh::{load_mesh, sample_surface, TriangleMesh};
use crate::metrics::{self, build_reference_set, coverage_curve, CoverageCurve, ReferenceGraspSet};
use crate::projection::Projector;
use crate::qd::{self, BehaviorGrid, OutcomeArchive, RunOutput, Scene};
use crate::{Error, Result};
use artifacts::*;

pub const METADATA_FILE: &str = "metadata.json";
pub const EVAL_LOG_FILE: &str = "eval_log.ndjson";
pub const OUTCOME_FILE: &str = "outcome_archive.ndjson";
pub const GRID_FILE: &str = "grid.json";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const NU_HISTOGRAM_FILE: &str = "nu_histogram.csv";
pub const VOXELS_FILE: &str = "voxels.json";

pub fn seed_dir(run_dir: &Path, seed: u64) -> PathBuf {
    run_dir.join(format!("seed-{seed}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub evaluations: usize,
    pub valid: usize,
    pub successes: usize,
    pub grid_elites: usize,
    pub restarts: u64,
    /// Coverage relative to the union of this run's seeds.
    pub final_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub code_version: String,
    pub config: RunConfig,
    pub gripper: GripperSpec,
    pub mesh_hash: String,
    pub genome_len: usize,
    pub seeds: Vec<SeedSummary>,
}

pub fn read_metadata(run_dir: &Path) -> Result<RunMetadata> {
    read_json(&run_dir.join(METADATA_FILE), METADATA_SCHEMA)
}

fn load_scene_inputs(config: &RunConfig) -> Result<(TriangleMesh, GripperSpec)> {
    let spec = config.gripper.resolve()?;
    let mesh = load_mesh(&config.mesh.path, config.mesh.scale)?;
    Ok((mesh, spec))
}

/// Runs every seed of `config`, writes the run directory and returns its path.
/// Refuses to write into an existing nonempty directory.
pub fn run_experiment(config: &RunConfig) -> Result<PathBuf> {
    config.validate()?;
    let (mesh, spec) = load_scene_inputs(config)?;
    let dir = config.output_dir();
    if dir.read_dir().is_ok_and(|mut d| d.next().is_some()) {
        return Err(Error::io(
            &dir,
            std::io::Error::new(std::io::ErrorKind::AlreadyExists, "run directory is not empty"),
        ));
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let samples = sample_surface(&mesh, config.mesh.samples, config.mesh.sample_seed);
    let scene = Scene {
        projector: Projector::new(&mesh, &samples, &spec),
        physics: config.physics,
        mode: config.run.fitness,
        mdr: config.mdr,
    };
    let prior = config.run.prior;
    let mut outputs: Vec<(u64, RunOutput)> = Vec::new();
    for &seed in &config.run.seeds {
        log::info!(
            "seed {seed}: {} {} budget {}",
            prior,
            config.run.algorithm,
            config.qd.budget
        );
        let mut out = qd::run(config.run.algorithm, &scene, prior, &config.qd, seed);
        if out.grid.is_none() {
            out.grid = Some(replay_grid(&scene, &out, config.qd.cell_size));
        }
        let sd = seed_dir(&dir, seed);
        std::fs::create_dir_all(&sd).map_err(|e| Error::io(&sd, e))?;
        write_eval_log(&sd.join(EVAL_LOG_FILE), &out.log, prior)?;
        write_outcome_archive(&sd.join(OUTCOME_FILE), &out.archive, prior)?;
        write_json(
            &sd.join(GRID_FILE),
            GRID_SCHEMA,
            &GridFile {
                grid: out.grid.clone().expect("grid set above"),
            },
        )?;
        outputs.push((seed, out));
    }

    let reference = build_reference_set(outputs.iter().map(|(_, o)| &o.archive), config.run.step)?;
    let mut seeds = Vec::new();
    for (seed, out) in &outputs {
        let m = write_seed_metrics(&seed_dir(&dir, *seed), &out.archive, &reference, config)?;
        seeds.push(SeedSummary {
            seed: *seed,
            evaluations: out.evaluations(),
            valid: out.log.iter().filter(|r| r.valid).count(),
            successes: out.archive.len(),
            grid_elites: out.grid.as_ref().map_or(0, BehaviorGrid::len),
            restarts: out.restarts,
            final_coverage: m.final_value(),
        });
    }
    let meta = RunMetadata {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        gripper: spec.clone(),
        mesh_hash: mesh.content_hash(),
        genome_len: scene.genome_len(prior),
        seeds,
    };
    write_json(&dir.join(METADATA_FILE), METADATA_SCHEMA, &meta)?;
    Ok(dir)
}

/// Grid for algorithms that do not keep one: every valid evaluation offered in log order.
fn replay_grid(scene: &Scene, out: &RunOutput, cell: f64) -> BehaviorGrid {
    let mut grid = BehaviorGrid::new(scene.behavior_bounds(), cell);
    for r in out.log.iter().filter(|r| r.valid) {
        if let Some(b) = r.behavior {
            grid.insert(&r.genome, r.fitness, b, r.eval_index);
        }
    }
    grid
}

fn write_seed_metrics(
    dir: &Path,
    archive: &OutcomeArchive,
    reference: &ReferenceGraspSet,
    config: &RunConfig,
) -> Result<CoverageCurve> {
    let step = config.run.step;
    let curve = if reference.is_empty() {
        CoverageCurve::default()
    } else {
        coverage_curve(archive, reference, step)?
    };
    write_coverage_csv(&dir.join(COVERAGE_FILE), &curve)?;
    let hist = metrics::nu_histogram(archive, config.run.nu_bins).unwrap_or_default();
    write_nu_histogram_csv(&dir.join(NU_HISTOGRAM_FILE), &hist)?;
    let heat = metrics::voxel_heatmap(archive, step)?;
    write_json(
        &dir.join(VOXELS_FILE),
        VOXELS_SCHEMA,
        &VoxelFile {
            step,
            voxels: heat.into_iter().collect(),
        },
    )?;
    Ok(curve)
}

/// A run directory with its outcome archives loaded.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub metadata: RunMetadata,
    pub archives: Vec<(u64, OutcomeArchive)>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let metadata = read_metadata(dir)?;
    let archives = metadata
        .seeds
        .iter()
        .map(|s| Ok((s.seed, read_outcome_archive(&seed_dir(dir, s.seed).join(OUTCOME_FILE))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        metadata,
        archives,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run: String,
    pub dir: PathBuf,
    /// `(seed, final coverage)`
    pub per_seed: Vec<(u64, f64)>,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub step: f64,
    pub reference_size: usize,
    pub rows: Vec<ComparisonRow>,
    /// Per run, per seed coverage curves, aligned with `rows`.
    pub curves: Vec<Vec<(u64, CoverageCurve)>>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Coverage of every run relative to the union of all their successful grasps.
pub fn compare_runs(dirs: &[PathBuf], step: f64) -> Result<ComparisonReport> {
    if dirs.is_empty() {
        return Err(Error::Incompatible("no runs given".into()));
    }
    let runs = dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
    compare_loaded(&runs, step)
}

pub fn compare_loaded(runs: &[LoadedRun], step: f64) -> Result<ComparisonReport> {
    let first = &runs[0].metadata;
    for r in &runs[1..] {
        if r.metadata.mesh_hash != first.mesh_hash {
            return Err(Error::Incompatible(format!(
                "{} and {} were run on different meshes",
                runs[0].dir.display(),
                r.dir.display()
            )));
        }
        if r.metadata.gripper != first.gripper {
            return Err(Error::Incompatible(format!(
                "{} and {} use different grippers",
                runs[0].dir.display(),
                r.dir.display()
            )));
        }
    }
    let reference = build_reference_set(runs.iter().flat_map(|r| r.archives.iter().map(|(_, a)| a)), step)?;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for r in runs {
        let mut per_seed = Vec::new();
        let mut run_curves = Vec::new();
        for (seed, a) in &r.archives {
            let c = if reference.is_empty() {
                CoverageCurve::default()
            } else {
                coverage_curve(a, &reference, step)?
            };
            per_seed.push((*seed, c.final_value()));
            run_curves.push((*seed, c));
        }
        let finals: Vec<f64> = per_seed.iter().map(|p| p.1).collect();
        rows.push(ComparisonRow {
            run: r
                .metadata
                .config
                .run
                .name
                .clone()
                .unwrap_or_else(|| r.metadata.config.default_name()),
            dir: r.dir.clone(),
            per_seed,
            median: median(&finals),
        });
        curves.push(run_curves);
    }
    Ok(ComparisonReport {
        step,
        reference_size: reference.len(),
        rows,
        curves,
    })
}

#[cfg(test)]
mod tests;
