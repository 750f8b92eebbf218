use std::path::PathBuf;

use nalgebra::{Quaternion, UnitQuaternion};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qdcore::evaluator::{self, PhysicsParams};
use qdcore::geometry::Vec3;
use qdcore::gripper::{GripperFamily, GripperSpec};
use qdcore::mesh::{self, sample_surface, shapes, TriangleMesh, DEFAULT_SAMPLE_COUNT};
use qdcore::metrics;
use qdcore::projection::{genome_len, Genome, GraspPose, PriorTag, Projector};
use qdcore::qd::{self, Algorithm, FitnessMode, QdConfig, Scene};
use qdcore::runner::{self, RunConfig};

fn to_py(e: qdcore::Error) -> PyErr {
    match e {
        qdcore::Error::Config { .. } | qdcore::Error::Incompatible(_) => PyValueError::new_err(e.to_string()),
        qdcore::Error::Io { .. } | qdcore::Error::Schema { .. } | qdcore::Error::Record { .. } => {
            PyIOError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

/// Triangle mesh in meters.
#[pyclass(name = "Mesh", frozen)]
struct PyMesh {
    inner: TriangleMesh,
}

#[pymethods]
impl PyMesh {
    #[staticmethod]
    #[pyo3(signature = (path, scale = 1.0))]
    fn load(path: PathBuf, scale: f64) -> PyResult<Self> {
        mesh::load_mesh(path, scale).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (radius, subdivisions = 3))]
    fn sphere(radius: f64, subdivisions: u32) -> Self {
        Self {
            inner: shapes::icosphere(radius, subdivisions),
        }
    }

    #[staticmethod]
    #[pyo3(name = "box")]
    fn cuboid(x: f64, y: f64, z: f64) -> Self {
        Self {
            inner: shapes::cuboid(Vec3::new(x, y, z)),
        }
    }

    /// Open-top cylinder with a flat bottom.
    #[staticmethod]
    #[pyo3(signature = (outer_radius, height, wall, segments = 32))]
    fn cup(outer_radius: f64, height: f64, wall: f64, segments: usize) -> Self {
        Self {
            inner: shapes::cup(outer_radius, height, wall, segments),
        }
    }

    fn save_obj(&self, path: PathBuf) -> PyResult<()> {
        mesh::write_obj(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn n_triangles(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn area(&self) -> f64 {
        self.inner.area()
    }

    #[getter]
    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    #[getter]
    fn bbox(&self) -> ([f64; 3], [f64; 3]) {
        let b = self.inner.bbox();
        (b.min.into(), b.max.into())
    }

    #[getter]
    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    /// Area-weighted surface samples as `(position, normal)` pairs.
    #[pyo3(signature = (n, seed = 0))]
    fn sample_surface(&self, n: usize, seed: u64) -> PyResult<Vec<([f64; 3], [f64; 3])>> {
        if n == 0 {
            return Err(PyValueError::new_err("n must be at least 1"));
        }
        Ok(sample_surface(&self.inner, n, seed)
            .samples()
            .iter()
            .map(|s| (s.position.into(), s.normal.into()))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Mesh(triangles={}, area={:.5})", self.inner.len(), self.inner.area())
    }
}

#[pyclass(name = "Gripper", frozen)]
struct PyGripper {
    inner: GripperSpec,
}

#[pymethods]
impl PyGripper {
    /// One of `panda`, `barrett3`, `allegro4`, `shadow5`.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        GripperSpec::preset(name)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn n_fingers(&self) -> usize {
        self.inner.n_fingers
    }

    #[getter]
    fn synergy_count(&self) -> usize {
        self.inner.synergy_count()
    }

    #[getter]
    fn max_aperture(&self) -> f64 {
        self.inner.max_aperture
    }

    fn genome_len(&self, prior: &str) -> PyResult<usize> {
        Ok(genome_len(parse(prior)?, &self.inner))
    }

    fn __repr__(&self) -> String {
        format!("Gripper({})", self.inner.name)
    }
}

fn pose_dict<'py>(py: Python<'py>, pose: &GraspPose) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let q = pose.orientation.quaternion();
    d.set_item("position", <[f64; 3]>::from(pose.position))?;
    d.set_item("quaternion", [q.i, q.j, q.k, q.w])?;
    d.set_item("synergy_id", pose.synergy_id)?;
    d.set_item("init_joints", pose.init_joints.clone())?;
    Ok(d)
}

/// Shake fitness of a grasp pose. `quaternion` is `[x, y, z, w]`.
#[pyfunction]
#[pyo3(signature = (mesh, gripper, position, quaternion, synergy_id = 0, init_joints = Vec::new(), friction = 0.5))]
#[allow(clippy::too_many_arguments)]
fn evaluate<'py>(
    py: Python<'py>,
    mesh: &PyMesh,
    gripper: &PyGripper,
    position: [f64; 3],
    quaternion: [f64; 4],
    synergy_id: usize,
    init_joints: Vec<f64>,
    friction: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let [x, y, z, w] = quaternion;
    let q = Quaternion::new(w, x, y, z);
    if q.norm() < 1e-12 {
        return Err(PyValueError::new_err("quaternion has zero norm"));
    }
    let pose = GraspPose {
        position: Vec3::from(position),
        orientation: UnitQuaternion::from_quaternion(q),
        synergy_id,
        init_joints,
    };
    let params = PhysicsParams {
        friction,
        ..PhysicsParams::default()
    };
    params
        .validate()
        .map_err(|(k, m)| PyValueError::new_err(format!("{k}: {m}")))?;
    let r = py.detach(|| evaluator::evaluate(&pose, &mesh.inner, &gripper.inner, &params));
    let d = PyDict::new(py);
    d.set_item("valid", r.valid)?;
    d.set_item("fitness", r.fitness)?;
    d.set_item("behavior", <[f64; 3]>::from(r.behavior))?;
    let contacts: Vec<([f64; 3], [f64; 3], usize)> = r
        .contacts
        .iter()
        .map(|c| (c.point.into(), c.normal.into(), c.finger_id))
        .collect();
    d.set_item("contacts", contacts)?;
    Ok(d)
}

/// Decodes a normalized genome; returns None for rejected antipodal candidates.
#[pyfunction]
#[pyo3(signature = (mesh, gripper, prior, genome, samples = DEFAULT_SAMPLE_COUNT, sample_seed = 0))]
fn project<'py>(
    py: Python<'py>,
    mesh: &PyMesh,
    gripper: &PyGripper,
    prior: &str,
    genome: Vec<f64>,
    samples: usize,
    sample_seed: u64,
) -> PyResult<Option<Bound<'py, PyDict>>> {
    let prior: PriorTag = parse(prior)?;
    let n = genome_len(prior, &gripper.inner);
    if genome.len() != n {
        return Err(PyValueError::new_err(format!(
            "genome must have {n} genes, got {}",
            genome.len()
        )));
    }
    let sset = sample_surface(&mesh.inner, samples.max(1), sample_seed);
    let projector = Projector::new(&mesh.inner, &sset, &gripper.inner);
    match projector.project(&Genome::new(genome, prior)) {
        Ok(p) => {
            let d = pose_dict(py, &p.pose)?;
            d.set_item("nu", p.nu)?;
            Ok(Some(d))
        }
        Err(_) => Ok(None),
    }
}

/// Runs one search and returns its successful grasps.
#[pyfunction]
#[pyo3(signature = (mesh, gripper, prior, algorithm, budget, seed = 0, samples = DEFAULT_SAMPLE_COUNT))]
#[allow(clippy::too_many_arguments)]
fn search<'py>(
    py: Python<'py>,
    mesh: &PyMesh,
    gripper: &PyGripper,
    prior: &str,
    algorithm: &str,
    budget: usize,
    seed: u64,
    samples: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let prior: PriorTag = parse(prior)?;
    let algorithm: Algorithm = parse(algorithm)?;
    if prior == PriorTag::Antipodal && gripper.inner.family != GripperFamily::ParallelJaw {
        return Err(PyValueError::new_err(
            "the antipodal prior needs a parallel-jaw gripper",
        ));
    }
    let config = QdConfig {
        budget,
        ..QdConfig::default()
    };
    let sset = sample_surface(&mesh.inner, samples.max(1), 0);
    let out = py.detach(|| {
        let scene = Scene {
            projector: Projector::new(&mesh.inner, &sset, &gripper.inner),
            physics: PhysicsParams::default(),
            mode: FitnessMode::Shake,
            mdr: Default::default(),
        };
        qd::run(algorithm, &scene, prior, &config, seed)
    });
    out.archive
        .entries
        .iter()
        .map(|e| {
            let d = pose_dict(py, &e.pose)?;
            d.set_item("eval_index", e.eval_index)?;
            d.set_item("fitness", e.fitness)?;
            d.set_item("nu", e.nu)?;
            d.set_item("genome", e.genome.values.clone())?;
            Ok(d)
        })
        .collect()
}

/// Runs a TOML experiment config and returns the run directory.
#[pyfunction]
#[pyo3(signature = (config_path, overrides = Vec::new()))]
fn run_experiment(py: Python<'_>, config_path: PathBuf, overrides: Vec<String>) -> PyResult<PathBuf> {
    let cfg = RunConfig::load(&config_path, &overrides).map_err(to_py)?;
    py.detach(|| runner::run_experiment(&cfg)).map_err(to_py)
}

/// `[(run, median, [(seed, coverage), ...]), ...]`
#[pyfunction]
#[pyo3(signature = (run_dirs, step = metrics::DEFAULT_STEP))]
fn compare_runs(run_dirs: Vec<PathBuf>, step: f64) -> PyResult<Vec<(String, f64, Vec<(u64, f64)>)>> {
    let report = runner::compare_runs(&run_dirs, step).map_err(to_py)?;
    Ok(report.rows.into_iter().map(|r| (r.run, r.median, r.per_seed)).collect())
}

/// One-sided Mann-Whitney test that `a` tends to exceed `b`: `(U, p)`.
#[pyfunction]
fn mann_whitney(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = metrics::mann_whitney(&a, &b).map_err(to_py)?;
    Ok((r.u, r.p_greater))
}

#[pymodule]
fn qdgrasp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyGripper>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare_runs, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
