//! Genome decoding: `θ ∈ [-1,1]^n` to a grasp pose for each parameterization.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, PI, TAU};

use nalgebra::{Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::geometry::{angle_between, orthonormal_basis, rotate_about, Aabb, Vec3};
use crate::gripper::{palm_frame_from_approach, GripperFamily, GripperFrame, GripperSpec};
use crate::mesh::{SurfaceSampleSet, TriangleMesh};

/// Default approach-cone half aperture.
pub const APPROACH_CONE: f64 = FRAC_PI_4;
/// Default antipodality tolerance.
pub const ANTIPODAL_TOLERANCE: f64 = FRAC_PI_6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorTag {
    Contact,
    Approach,
    Antipodal,
    Direct,
}

impl PriorTag {
    pub const ALL: [PriorTag; 4] = [Self::Contact, Self::Approach, Self::Antipodal, Self::Direct];

    pub fn base_len(self) -> usize {
        match self {
            PriorTag::Contact | PriorTag::Approach => 7,
            PriorTag::Antipodal => 4,
            PriorTag::Direct => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PriorTag::Contact => "contact",
            PriorTag::Approach => "approach",
            PriorTag::Antipodal => "antipodal",
            PriorTag::Direct => "direct",
        }
    }

    /// Whether the ν angle is a decoded quantity for this prior.
    pub fn records_nu(self) -> bool {
        matches!(self, PriorTag::Contact | PriorTag::Approach)
    }
}

impl std::fmt::Display for PriorTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PriorTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown prior `{s}` (expected contact, approach, antipodal or direct)"))
    }
}

/// Full genome length for a prior and gripper.
pub fn genome_len(prior: PriorTag, spec: &GripperSpec) -> usize {
    prior.base_len() + usize::from(spec.synergy_count() > 1) + spec.k_free_joints()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub values: Vec<f64>,
    pub prior: PriorTag,
}

impl Genome {
    /// Clamps every gene into `[-1, 1]`.
    pub fn new(values: Vec<f64>, prior: PriorTag) -> Self {
        let values = values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        Self { values, prior }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub synergy_id: usize,
    pub init_joints: Vec<f64>,
}

impl GraspPose {
    pub fn frame(&self) -> GripperFrame {
        GripperFrame::from_pose(self.position, &self.orientation)
    }

    pub fn from_frame(frame: &GripperFrame, synergy_id: usize, init_joints: Vec<f64>) -> Self {
        Self {
            position: frame.origin,
            orientation: frame.quaternion(),
            synergy_id,
            init_joints,
        }
    }
}

/// A decoded grasp together with its diagnostic approach angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub pose: GraspPose,
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// The ray from the first contact left the object without a further hit.
    NoSecondContact,
    /// The two contact normals are not antipodal enough.
    NotAntipodal,
}

/// Affine map of a gene in `[-1, 1]` onto `[lo, hi]`.
pub fn denormalize(g: f64, lo: f64, hi: f64) -> f64 {
    lo + (g.clamp(-1.0, 1.0) + 1.0) * 0.5 * (hi - lo)
}

fn angle_gene(g: f64) -> f64 {
    denormalize(g, 0.0, TAU) % TAU
}

fn point_in_box(genes: &[f64], bbox: &Aabb) -> Vec3 {
    Vec3::new(
        denormalize(genes[0], bbox.min.x, bbox.max.x),
        denormalize(genes[1], bbox.min.y, bbox.max.y),
        denormalize(genes[2], bbox.min.z, bbox.max.z),
    )
}

/// Decodes the trailing synergy gene (if `m > 1`) and the free-joint genes.
pub fn decode_tail(tail: &[f64], spec: &GripperSpec) -> (usize, Vec<f64>) {
    let m = spec.synergy_count();
    let (synergy_id, joints) = if m > 1 {
        let g = tail[0].clamp(-1.0, 1.0);
        let bin = ((g + 1.0) * 0.5 * m as f64).floor() as usize;
        (bin.min(m - 1), &tail[1..])
    } else {
        (0, tail)
    };
    let init = spec
        .free_joints
        .iter()
        .zip(joints)
        .map(|(r, &g)| denormalize(g, r.min, r.max))
        .collect();
    (synergy_id, init)
}

/// Approach and contact parameterization. `nu_limit` is the cone half aperture.
pub fn project_approach(
    genome: &Genome,
    samples: &SurfaceSampleSet,
    bbox: &Aabb,
    spec: &GripperSpec,
    nu_limit: f64,
) -> Projected {
    let g = &genome.values;
    let finder = point_in_box(&g[0..3], bbox);
    let reference = samples.nearest(&finder);
    let d = denormalize(g[3], 0.0, spec.d_max());
    let nu = denormalize(g[4], 0.0, nu_limit);
    let xi = angle_gene(g[5]);
    let omega = angle_gene(g[6]);
    let frame = palm_frame_from_approach(&reference.position, &reference.normal, d, nu, xi, omega);
    let (synergy_id, init) = decode_tail(&g[7..], spec);
    Projected {
        pose: GraspPose::from_frame(&frame, synergy_id, init),
        nu: Some(nu),
    }
}

/// Both contacts of an antipodal candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntipodalPair {
    pub p1: Vec3,
    pub n1: Vec3,
    pub p2: Vec3,
    pub n2: Vec3,
}

impl AntipodalPair {
    pub fn angle(&self) -> f64 {
        angle_between(&self.n1, &-self.n2)
    }
}

/// Finds the opposite contact for the sample nearest to `finder`.
pub fn antipodal_pair(
    finder: &Vec3,
    samples: &SurfaceSampleSet,
    mesh: &TriangleMesh,
    tolerance: f64,
) -> Result<AntipodalPair, Rejection> {
    let first = samples.nearest(finder);
    let u = -first.normal;
    let hits = mesh.ray_cast(&first.position, &u);
    // hits of the triangle the ray starts on are not a second contact
    let last = hits
        .iter()
        .rev()
        .find(|h| h.triangle_id != first.triangle_id)
        .ok_or(Rejection::NoSecondContact)?;
    let pair = AntipodalPair {
        p1: first.position,
        n1: first.normal,
        p2: last.point,
        n2: last.normal,
    };
    if pair.angle() > tolerance {
        return Err(Rejection::NotAntipodal);
    }
    Ok(pair)
}

/// Antipodal parameterization for the parallel jaw.
pub fn project_antipodal(
    genome: &Genome,
    samples: &SurfaceSampleSet,
    mesh: &TriangleMesh,
    spec: &GripperSpec,
    tolerance: f64,
) -> Result<Projected, Rejection> {
    let g = &genome.values;
    let pair = antipodal_pair(&point_in_box(&g[0..3], mesh.bbox()), samples, mesh, tolerance)?;
    let x = -pair.n1;
    let (t1, _) = orthonormal_basis(&x);
    let y = rotate_about(&t1, &x, angle_gene(g[3]));
    let z = x.cross(&y);
    let mid = (pair.p1 + pair.p2) * 0.5;
    // pinch point sits between the finger tips, not at the palm
    let frame = GripperFrame {
        origin: mid - y * spec.grasp_depth(),
        x,
        y,
        z,
    };
    let (synergy_id, init) = decode_tail(&g[4..], spec);
    Ok(Projected {
        pose: GraspPose::from_frame(&frame, synergy_id, init),
        nu: None,
    })
}

/// Outer radius of the direct encoding's position ball.
pub fn direct_radius(mesh: &TriangleMesh, spec: &GripperSpec) -> f64 {
    1.5 * (mesh.bbox().diagonal() / 2.0 + spec.d_max())
}

/// Intrinsic Z-Y-X rotation.
pub fn euler_zyx(yaw: f64, pitch: f64, roll: f64) -> Rotation3<f64> {
    Rotation3::from_euler_angles(roll, pitch, yaw)
}

/// Prior-free spherical-coordinate plus Euler-angle encoding around the bbox center.
pub fn project_direct(genome: &Genome, mesh: &TriangleMesh, spec: &GripperSpec) -> Projected {
    let g = &genome.values;
    let rho = denormalize(g[0], 0.0, direct_radius(mesh, spec));
    let polar = denormalize(g[1], 0.0, PI);
    let azimuth = angle_gene(g[2]);
    let offset = Vec3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()) * rho;
    let rot = euler_zyx(angle_gene(g[3]), angle_gene(g[4]), angle_gene(g[5]));
    let (synergy_id, init) = decode_tail(&g[6..], spec);
    Projected {
        pose: GraspPose {
            position: mesh.bbox().center() + offset,
            orientation: UnitQuaternion::from_rotation_matrix(&rot),
            synergy_id,
            init_joints: init,
        },
        nu: None,
    }
}

/// Scene data shared by every projection of one run.
#[derive(Debug, Clone, Copy)]
pub struct Projector<'a> {
    pub mesh: &'a TriangleMesh,
    pub samples: &'a SurfaceSampleSet,
    pub spec: &'a GripperSpec,
    pub approach_cone: f64,
    pub antipodal_tolerance: f64,
}

impl<'a> Projector<'a> {
    pub fn new(mesh: &'a TriangleMesh, samples: &'a SurfaceSampleSet, spec: &'a GripperSpec) -> Self {
        Self {
            mesh,
            samples,
            spec,
            approach_cone: APPROACH_CONE,
            antipodal_tolerance: ANTIPODAL_TOLERANCE,
        }
    }

    pub fn project(&self, genome: &Genome) -> Result<Projected, Rejection> {
        debug_assert_eq!(genome.values.len(), genome_len(genome.prior, self.spec));
        match genome.prior {
            PriorTag::Approach => Ok(project_approach(
                genome,
                self.samples,
                self.mesh.bbox(),
                self.spec,
                self.approach_cone,
            )),
            PriorTag::Contact => Ok(project_approach(genome, self.samples, self.mesh.bbox(), self.spec, PI)),
            PriorTag::Antipodal => {
                project_antipodal(genome, self.samples, self.mesh, self.spec, self.antipodal_tolerance)
            }
            PriorTag::Direct => Ok(project_direct(genome, self.mesh, self.spec)),
        }
    }
}

/// The antipodal encoding only makes sense for a two-jaw gripper.
pub fn prior_supported(prior: PriorTag, spec: &GripperSpec) -> bool {
    prior != PriorTag::Antipodal || spec.family == GripperFamily::ParallelJaw
}
