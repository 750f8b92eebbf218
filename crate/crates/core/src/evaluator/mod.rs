//! Quasi-static grasp evaluation: overlap rejection, closure and shake resistance.

mod wrench;

pub use wrench::{
    bounded_cone_contains, cone_contains, contact_generators, force_closure, generators_per_contact, nnls,
    wrench_resists, ContactModel, ContactPoint, FEASIBILITY_TOLERANCE,
};

use nalgebra::{DVector, Matrix3, Rotation3, Unit, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::gripper::{close_fingers, GripperFamily, GripperFrame, GripperSpec};
use crate::mesh::TriangleMesh;
use crate::projection::GraspPose;

/// Number of shakes in the fitness pattern.
pub const N_SHAKES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsParams {
    pub friction: f64,
    /// kg/m³
    pub density: f64,
    /// m/s²
    pub gravity: f64,
    /// Linear shake acceleration along world x (m/s²).
    pub shake_translation: f64,
    /// Angular shake acceleration about world z through the gripper origin (rad/s²).
    pub shake_rotation: f64,
    pub friction_edges: usize,
    /// Torsional friction radius of a soft fingertip (m).
    pub torsional_friction: f64,
    /// Normal force one finger can apply (N); infinite means unbounded.
    pub max_finger_force: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            friction: 0.5,
            density: 500.0,
            gravity: 9.81,
            shake_translation: 2.0,
            shake_rotation: 3.0,
            friction_edges: 8,
            torsional_friction: 0.005,
            max_finger_force: 10.0,
        }
    }
}

impl PhysicsParams {
    /// Returns the offending key and a message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive = [
            ("friction", self.friction),
            ("density", self.density),
            ("max_finger_force", self.max_finger_force),
        ];
        for (k, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err((k, format!("must be positive, got {v}")));
            }
        }
        if !self.friction.is_finite() || !self.density.is_finite() {
            return Err(("friction", "friction and density must be finite".into()));
        }
        let nonneg = [
            ("gravity", self.gravity),
            ("shake_translation", self.shake_translation),
            ("shake_rotation", self.shake_rotation),
            ("torsional_friction", self.torsional_friction),
        ];
        for (k, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err((k, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.friction_edges < 4 {
            return Err((
                "friction_edges",
                format!("must be at least 4, got {}", self.friction_edges),
            ));
        }
        Ok(())
    }

    fn contact_model(&self) -> ContactModel {
        ContactModel {
            friction: self.friction,
            edges: self.friction_edges,
            torsion: self.torsional_friction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspContact {
    pub point: Vec3,
    pub normal: Vec3,
    pub finger_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub valid: bool,
    pub fitness: f64,
    /// Gripper origin in the object frame.
    pub behavior: Vec3,
    pub nu_angle: Option<f64>,
    pub contacts: Vec<GraspContact>,
}

impl EvaluationResult {
    pub fn invalid(behavior: Vec3) -> Self {
        Self {
            valid: false,
            fitness: 0.0,
            behavior,
            nu_angle: None,
            contacts: Vec::new(),
        }
    }

    pub fn success(&self) -> bool {
        self.valid && self.fitness > 0.0
    }
}

/// Directions of gravity and of the two shake axes, in object coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
struct WorldAxes {
    down: Vec3,
    shake_dir: Vec3,
    spin_axis: Vec3,
}

impl WorldAxes {
    const NOMINAL: WorldAxes = WorldAxes {
        down: Vec3::new(0.0, 0.0, -1.0),
        shake_dir: Vec3::new(1.0, 0.0, 0.0),
        spin_axis: Vec3::new(0.0, 0.0, 1.0),
    };

    fn rotated(&self, r: &Rotation3<f64>) -> Self {
        Self {
            down: r * self.down,
            shake_dir: r * self.shake_dir,
            spin_axis: r * self.spin_axis,
        }
    }
}

/// Shake-resistance fitness of one grasp, in `{0, 1, 2}`.
pub fn evaluate(
    grasp: &GraspPose,
    mesh: &TriangleMesh,
    spec: &GripperSpec,
    params: &PhysicsParams,
) -> EvaluationResult {
    evaluate_frame(&grasp.frame(), grasp, mesh, spec, params, &WorldAxes::NOMINAL)
}

fn evaluate_frame(
    frame: &GripperFrame,
    grasp: &GraspPose,
    mesh: &TriangleMesh,
    spec: &GripperSpec,
    params: &PhysicsParams,
    axes: &WorldAxes,
) -> EvaluationResult {
    let mut result = EvaluationResult::invalid(frame.origin);
    if grasp.synergy_id >= spec.synergy_count() || grasp.init_joints.len() != spec.k_free_joints() {
        return result;
    }
    let quick = spec.swept_bounds(frame, &grasp.init_joints);
    if !quick.intersects(mesh.bbox()) {
        return result;
    }
    if spec
        .open_shapes(frame, &grasp.init_joints)
        .iter()
        .any(|s| mesh.intersects_convex(s))
    {
        return result;
    }
    let Ok(state) = close_fingers(spec, frame, grasp.synergy_id, &grasp.init_joints, mesh) else {
        return result;
    };
    let needed = match spec.family {
        GripperFamily::ParallelJaw => 2,
        GripperFamily::RadialNFinger => 2.min(spec.synergies[grasp.synergy_id].len()),
    };
    if state.contact_count() < needed {
        return result;
    }
    result.valid = true;
    result.contacts = state
        .contact_list()
        .into_iter()
        .map(|(point, normal, finger_id)| GraspContact {
            point,
            normal,
            finger_id,
        })
        .collect();
    result.fitness = f64::from(shake_count(&result.contacts, frame, mesh, params, axes));
    result
}

/// Number of consecutive shakes resisted.
fn shake_count(
    contacts: &[GraspContact],
    frame: &GripperFrame,
    mesh: &TriangleMesh,
    params: &PhysicsParams,
    axes: &WorldAxes,
) -> u32 {
    let com = mesh.centroid();
    let mass = mesh.mass(params.density);
    let inertia: Matrix3<f64> = mesh.inertia(params.density);
    let scale = 0.5 * mesh.bbox().diagonal();
    let model = params.contact_model();
    let points: Vec<ContactPoint> = contacts
        .iter()
        .map(|c| ContactPoint {
            point: c.point,
            normal: c.normal,
        })
        .collect();
    let gens = contact_generators(&points, &model, &com, scale);
    if !force_closure(&gens) {
        return 0;
    }
    let per = generators_per_contact(&model);
    let holds = |force: Vec3, torque: Vec3| {
        // contacts must supply the opposite of the external load
        let t = torque / scale;
        let target = DVector::from_column_slice(&[-force.x, -force.y, -force.z, -t.x, -t.y, -t.z]);
        bounded_cone_contains(&gens, per, params.max_finger_force, &target)
    };
    let weight = axes.down * (mass * params.gravity);
    let mut count = 0;
    // shake 1: gripper accelerates back and forth along the shake direction
    let linear = [1.0, -1.0].iter().all(|s| {
        let a = axes.shake_dir * (s * params.shake_translation);
        holds(weight - a * mass, Vec3::zeros())
    });
    if !linear {
        return count;
    }
    count += 1;
    // shake 2: gripper spins about the vertical through its origin
    let spin = [1.0, -1.0].iter().all(|s| {
        let alpha = axes.spin_axis * (s * params.shake_rotation);
        let pseudo = -alpha.cross(&(com - frame.origin)) * mass;
        holds(weight + pseudo, -(inertia * alpha))
    });
    if spin {
        count += 1;
    }
    count
}

/// Domain-randomization settings for the robustness fitness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdrParams {
    pub trials: usize,
    /// Object position noise, std per axis (m).
    pub sigma_position: f64,
    /// Object orientation noise, std of the rotation angle (rad).
    pub sigma_orientation: f64,
    pub sigma_friction: f64,
}

impl Default for MdrParams {
    fn default() -> Self {
        Self {
            trials: 100,
            sigma_position: 0.005,
            sigma_orientation: 30f64.to_radians(),
            sigma_friction: 0.1,
        }
    }
}

impl MdrParams {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.trials == 0 {
            return Err(("trials", "must be at least 1".into()));
        }
        let sigmas = [
            ("sigma_position", self.sigma_position),
            ("sigma_orientation", self.sigma_orientation),
            ("sigma_friction", self.sigma_friction),
        ];
        for (k, v) in sigmas {
            if !(v.is_finite() && v >= 0.0) {
                return Err((k, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Highest attainable robustness fitness.
    pub fn max_fitness(&self) -> f64 {
        f64::from(N_SHAKES) * self.trials as f64
    }

    /// Estimated transfer ratio for a fitness value.
    pub fn eta(&self, fitness: f64) -> f64 {
        fitness / self.max_fitness()
    }
}

/// Sum of shake counts over randomized object poses and friction values.
///
/// The object is displaced about its centroid; equivalently the gripper is moved by the
/// inverse displacement and gravity and shake axes are rotated into the object frame.
pub fn evaluate_mdr(
    grasp: &GraspPose,
    mesh: &TriangleMesh,
    spec: &GripperSpec,
    params: &PhysicsParams,
    mdr: &MdrParams,
    seed: u64,
) -> EvaluationResult {
    let nominal = evaluate(grasp, mesh, spec, params);
    if !nominal.valid {
        return nominal;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos_noise = Normal::new(0.0, mdr.sigma_position.max(0.0)).expect("finite std");
    let ang_noise = Normal::new(0.0, mdr.sigma_orientation.max(0.0)).expect("finite std");
    let mu_noise = Normal::new(0.0, mdr.sigma_friction.max(0.0)).expect("finite std");
    let base = grasp.frame();
    let c = mesh.centroid();
    let mut total = 0.0;
    for _ in 0..mdr.trials {
        let axis = Vec3::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        let angle: f64 = ang_noise.sample(&mut rng);
        let shift = Vec3::new(
            pos_noise.sample(&mut rng),
            pos_noise.sample(&mut rng),
            pos_noise.sample(&mut rng),
        );
        let mu = (params.friction + mu_noise.sample(&mut rng)).max(1e-3);
        let rot = Unit::try_new(axis, 1e-12)
            .map(|a| Rotation3::from_axis_angle(&a, angle))
            .unwrap_or_else(Rotation3::identity);
        let inv = rot.inverse();
        let r = inv.matrix() * base.rotation();
        let frame = GripperFrame::from_rotation(inv * (base.origin - c - shift) + c, &r);
        let trial = GraspPose {
            position: frame.origin,
            orientation: UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r)),
            ..grasp.clone()
        };
        let p = PhysicsParams {
            friction: mu,
            ..*params
        };
        let res = evaluate_frame(&frame, &trial, mesh, spec, &p, &WorldAxes::NOMINAL.rotated(&inv));
        total += res.fitness;
    }
    EvaluationResult {
        fitness: total,
        ..nominal
    }
}

#[cfg(test)]
mod tests;
