//! Parametric grippers: frames, collision primitives, synergies and closure kinematics.
//!
//! Two families are modeled. A parallel jaw translates two capsule fingers along
//! `±x_g`. A radial gripper carries `n` two-link planar fingers mounted on a circle
//! around the gripping axis `y_g`; each finger curls toward the axis. Finger 0 of a
//! radial gripper is the thumb and sits opposite the others.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{orthonormal_basis, rotate_about, Aabb, Capsule, OrientedBox, Vec3};
use crate::mesh::{ConvexShape, TriangleMesh};

/// Translation step of a closing parallel finger (m).
pub const TRANSLATION_STEP: f64 = 1e-3;
/// Rotation step of a closing radial finger (rad).
pub const ROTATION_STEP: f64 = 0.5 * PI / 180.0;
/// Contact instants are refined until the finger surface moves less than this (m).
pub const REFINE_TOLERANCE: f64 = 1e-5;

/// Gripper pose: `x_g`, `z_g` span the palm plane, `y_g` is the gripping direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperFrame {
    pub origin: Vec3,
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl GripperFrame {
    /// Columns are `x_g`, `y_g`, `z_g`.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.x, self.y, self.z])
    }

    pub fn from_rotation(origin: Vec3, r: &Matrix3<f64>) -> Self {
        Self {
            origin,
            x: r.column(0).into_owned(),
            y: r.column(1).into_owned(),
            z: r.column(2).into_owned(),
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation()))
    }

    pub fn from_pose(origin: Vec3, q: &UnitQuaternion<f64>) -> Self {
        Self::from_rotation(origin, q.to_rotation_matrix().matrix())
    }

    /// Point given in gripper coordinates.
    pub fn point(&self, local: Vec3) -> Vec3 {
        self.origin + self.x * local.x + self.y * local.y + self.z * local.z
    }

    /// Largest deviation from a right-handed orthonormal basis.
    pub fn orthonormality_error(&self) -> f64 {
        let r = self.rotation();
        let e = (r.transpose() * r - Matrix3::identity()).abs().max();
        e.max((self.x.cross(&self.y) - self.z).abs().max())
    }
}

/// Places the palm for an approach-cone grasp.
///
/// The gripping axis satisfies `angle(surface_normal, -y_g) = nu`; `xi` turns the tilt
/// around the normal, `omega` rolls the gripper about `y_g`, and the origin sits at
/// distance `d` from `ref_point` back along the gripping axis.
pub fn palm_frame_from_approach(
    ref_point: &Vec3,
    surface_normal: &Vec3,
    d: f64,
    nu: f64,
    xi: f64,
    omega: f64,
) -> GripperFrame {
    let n = surface_normal.normalize();
    let (t1, t2) = orthonormal_basis(&n);
    let (sx, cx) = xi.sin_cos();
    let radial = t1 * cx + t2 * sx;
    let (sn, cn) = nu.sin_cos();
    let back = n * cn + radial * sn;
    let y = -back;
    // tangent of the cone circle: orthogonal to both n and radial, hence to y
    let x0 = t2 * cx - t1 * sx;
    let x = rotate_about(&x0, &y, omega);
    let z = x.cross(&y);
    GripperFrame {
        origin: ref_point + back * d,
        x,
        y,
        z,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperFamily {
    ParallelJaw,
    RadialNFinger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRange {
    pub min: f64,
    pub max: f64,
}

/// Immutable gripper description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperSpec {
    pub name: String,
    pub family: GripperFamily,
    pub n_fingers: usize,
    /// Parallel jaw: inner gap when open. Radial: diameter of the finger mount circle.
    pub max_aperture: f64,
    pub finger_length: f64,
    /// Full palm box extents along `x_g`, `y_g`, `z_g`; the box lies behind the palm plane.
    pub palm_box: [f64; 3],
    /// One capsule radius per finger.
    pub finger_radii: Vec<f64>,
    /// Finger subsets closed together; length is the synergy count `m`.
    pub synergies: Vec<Vec<usize>>,
    /// Angle ranges of the free initial joints (length `k`).
    pub free_joints: Vec<JointRange>,
    /// Finger driven by each free joint (radial only).
    #[serde(default)]
    pub free_joint_fingers: Vec<usize>,
    /// Mount azimuth of each radial finger, measured from `x_g` toward `z_g` (rad).
    #[serde(default)]
    pub finger_azimuths: Vec<f64>,
    /// Proximal joint angle when open / fully closed (rad, positive curls inward).
    #[serde(default)]
    pub open_angle: f64,
    #[serde(default)]
    pub close_angle: f64,
    /// Distal joint angle per unit proximal travel.
    #[serde(default)]
    pub distal_coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GripperError {
    #[error("invalid gripper spec: {0}")]
    InvalidSpec(String),
    #[error("unknown gripper preset `{0}`")]
    UnknownPreset(String),
}

/// Preset names bundled with the crate.
pub const PRESETS: [&str; 4] = ["panda", "barrett3", "allegro4", "shadow5"];

impl GripperSpec {
    /// Approximate public dimensions; these are configurable defaults, not ground truth.
    pub fn preset(name: &str) -> Result<Self, GripperError> {
        let deg = PI / 180.0;
        let radial = |name: &str, azimuths: Vec<f64>, synergies: Vec<Vec<usize>>| GripperSpec {
            name: name.to_string(),
            family: GripperFamily::RadialNFinger,
            n_fingers: azimuths.len(),
            max_aperture: 0.08,
            finger_length: 0.1,
            palm_box: [0.1, 0.04, 0.1],
            finger_radii: vec![0.009; azimuths.len()],
            synergies,
            free_joints: vec![],
            free_joint_fingers: vec![],
            finger_azimuths: azimuths,
            open_angle: -20.0 * deg,
            close_angle: 110.0 * deg,
            distal_coupling: 0.6,
        };
        let spec = match name {
            "panda" => GripperSpec {
                name: name.to_string(),
                family: GripperFamily::ParallelJaw,
                n_fingers: 2,
                max_aperture: 0.08,
                finger_length: 0.055,
                palm_box: [0.2, 0.06, 0.06],
                finger_radii: vec![0.008; 2],
                synergies: vec![vec![0, 1]],
                free_joints: vec![],
                free_joint_fingers: vec![],
                finger_azimuths: vec![],
                open_angle: 0.0,
                close_angle: 0.0,
                distal_coupling: 0.0,
            },
            "barrett3" => {
                let mut s = radial("barrett3", vec![PI, -30.0 * deg, 30.0 * deg], vec![vec![0, 1, 2]]);
                s.free_joints = vec![
                    JointRange {
                        min: -FRAC_PI_2,
                        max: FRAC_PI_2,
                    },
                    JointRange {
                        min: -FRAC_PI_2,
                        max: FRAC_PI_2,
                    },
                ];
                s.free_joint_fingers = vec![1, 2];
                s
            }
            "allegro4" => radial(
                "allegro4",
                vec![PI, -30.0 * deg, 0.0, 30.0 * deg],
                vec![vec![0, 1], vec![0, 2], vec![0, 1, 2], vec![0, 1, 2, 3]],
            ),
            "shadow5" => radial(
                "shadow5",
                vec![PI, -36.0 * deg, -12.0 * deg, 12.0 * deg, 36.0 * deg],
                vec![vec![0, 1], vec![0, 2], vec![0, 1, 2], vec![0, 1, 2, 3, 4]],
            ),
            other => return Err(GripperError::UnknownPreset(other.to_string())),
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GripperError> {
        let bad = |m: String| Err(GripperError::InvalidSpec(m));
        if self.n_fingers < 2 {
            return bad(format!("n_fingers must be >= 2, got {}", self.n_fingers));
        }
        let positive = [self.max_aperture, self.finger_length];
        if positive
            .iter()
            .chain(self.palm_box.iter())
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return bad("aperture, finger length and palm box must be positive".into());
        }
        if self.finger_radii.len() != self.n_fingers || self.finger_radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("need one positive capsule radius per finger".into());
        }
        if self.synergies.is_empty() {
            return bad("synergy table is empty".into());
        }
        for s in &self.synergies {
            if s.is_empty() || s.iter().any(|&f| f >= self.n_fingers) {
                return bad(format!("synergy {s:?} is empty or out of finger range"));
            }
        }
        if self.free_joints.iter().any(|j| !(j.min <= j.max)) {
            return bad("free joint range with min > max".into());
        }
        match self.family {
            GripperFamily::ParallelJaw => {
                if self.n_fingers != 2 || self.synergies.len() != 1 || !self.free_joints.is_empty() {
                    return bad("parallel_jaw requires 2 fingers, one synergy and no free joints".into());
                }
                let mut all = self.synergies[0].clone();
                all.sort_unstable();
                if all != [0, 1] {
                    return bad("parallel_jaw synergy must close both fingers".into());
                }
            }
            GripperFamily::RadialNFinger => {
                if self.finger_azimuths.len() != self.n_fingers {
                    return bad("radial gripper needs one azimuth per finger".into());
                }
                if self.free_joint_fingers.len() != self.free_joints.len()
                    || self.free_joint_fingers.iter().any(|&f| f >= self.n_fingers)
                {
                    return bad("each free joint must name a valid finger".into());
                }
                if !(self.close_angle > self.open_angle) {
                    return bad("close_angle must exceed open_angle".into());
                }
            }
        }
        Ok(())
    }

    /// Number of synergies `m`.
    pub fn synergy_count(&self) -> usize {
        self.synergies.len()
    }

    /// Number of free initial joints `k`.
    pub fn k_free_joints(&self) -> usize {
        self.free_joints.len()
    }

    /// Upper bound on the palm-to-contact distance used by the approach encodings.
    pub fn d_max(&self) -> f64 {
        self.max_aperture / 2.0 + 0.5 * self.finger_length
    }

    /// Depth along `y_g` of the point between the fingers where a pinch is centered.
    pub fn grasp_depth(&self) -> f64 {
        0.75 * self.finger_length
    }

    pub fn palm(&self, frame: &GripperFrame) -> OrientedBox {
        let [bx, by, bz] = self.palm_box;
        OrientedBox {
            center: frame.origin - frame.y * (by / 2.0),
            axes: frame.rotation(),
            half: Vec3::new(bx / 2.0, by / 2.0, bz / 2.0),
        }
    }

    /// Finger travel limit (m for the parallel jaw, rad for radial fingers).
    fn travel_limit(&self) -> f64 {
        match self.family {
            GripperFamily::ParallelJaw => self.max_aperture / 2.0,
            GripperFamily::RadialNFinger => self.close_angle - self.open_angle,
        }
    }

    fn travel_step(&self) -> f64 {
        match self.family {
            GripperFamily::ParallelJaw => TRANSLATION_STEP,
            GripperFamily::RadialNFinger => ROTATION_STEP,
        }
    }

    /// Upper bound on how far any finger surface point moves per unit of travel.
    fn motion_bound(&self) -> f64 {
        match self.family {
            GripperFamily::ParallelJaw => 1.0,
            GripperFamily::RadialNFinger => {
                let l = self.finger_length / 2.0;
                l + l * (1.0 + self.distal_coupling.abs())
            }
        }
    }

    fn yaw(&self, finger: usize, init_joints: &[f64]) -> f64 {
        self.free_joint_fingers
            .iter()
            .zip(init_joints)
            .filter(|(f, _)| **f == finger)
            .map(|(_, a)| *a)
            .sum()
    }

    /// Collision capsules of one finger after `travel` along its closing motion.
    pub fn finger_capsules(
        &self,
        frame: &GripperFrame,
        finger: usize,
        travel: f64,
        init_joints: &[f64],
    ) -> Vec<Capsule> {
        let r = self.finger_radii[finger];
        match self.family {
            GripperFamily::ParallelJaw => {
                let side = if finger == 0 { 1.0 } else { -1.0 };
                let offset = side * (self.max_aperture / 2.0 - travel + r);
                let a = frame.point(Vec3::new(offset, 0.0, 0.0));
                let b = frame.point(Vec3::new(offset, self.finger_length - r, 0.0));
                vec![Capsule { a, b, radius: r }]
            }
            GripperFamily::RadialNFinger => {
                let phi = self.finger_azimuths[finger];
                let mount_dir = frame.x * phi.cos() + frame.z * phi.sin();
                let mount = frame.origin + mount_dir * (self.max_aperture / 2.0);
                let yawed = phi + self.yaw(finger, init_joints);
                let inward = -(frame.x * yawed.cos() + frame.z * yawed.sin());
                let q1 = self.open_angle + travel;
                let q2 = q1 + self.distal_coupling * travel;
                let l = self.finger_length / 2.0;
                let u1 = frame.y * q1.cos() + inward * q1.sin();
                let u2 = frame.y * q2.cos() + inward * q2.sin();
                let knuckle = mount + u1 * l;
                vec![
                    Capsule {
                        a: mount,
                        b: knuckle,
                        radius: r,
                    },
                    Capsule {
                        a: knuckle,
                        b: knuckle + u2 * l,
                        radius: r,
                    },
                ]
            }
        }
    }

    /// Palm box plus every finger capsule at the open pose.
    pub fn open_shapes(&self, frame: &GripperFrame, init_joints: &[f64]) -> Vec<ConvexShape> {
        let mut shapes = vec![ConvexShape::Box(self.palm(frame))];
        for f in 0..self.n_fingers {
            shapes.extend(
                self.finger_capsules(frame, f, 0.0, init_joints)
                    .into_iter()
                    .map(ConvexShape::Capsule),
            );
        }
        shapes
    }

    /// Bounding box of everything the gripper occupies while closing.
    pub fn swept_bounds(&self, frame: &GripperFrame, init_joints: &[f64]) -> Aabb {
        let mut bb = self.palm(frame).aabb();
        let lim = self.travel_limit();
        for f in 0..self.n_fingers {
            for k in 0..=8 {
                let t = lim * k as f64 / 8.0;
                for c in self.finger_capsules(frame, f, t, init_joints) {
                    bb = bb.union(&c.aabb());
                }
            }
        }
        bb.inflate(self.motion_bound() * lim / 16.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerContact {
    pub point: Vec3,
    /// Outward object normal at the contact (points toward the finger).
    pub normal: Vec3,
}

/// Result of a closure.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerState {
    /// Closure parameter per finger, 1.0 = fully closed.
    pub closure: Vec<f64>,
    pub contacts: Vec<Option<FingerContact>>,
}

impl FingerState {
    pub fn contact_count(&self) -> usize {
        self.contacts.iter().filter(|c| c.is_some()).count()
    }

    /// `(point, normal, finger_id)` for every contacting finger.
    pub fn contact_list(&self) -> Vec<(Vec3, Vec3, usize)> {
        self.contacts
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (c.point, c.normal, i)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ClosureError {
    #[error("finger {0} penetrates the object before closing")]
    InitialPenetration(usize),
    #[error("synergy index {0} out of range")]
    BadSynergy(usize),
    #[error("expected {expected} initial joints, got {got}")]
    BadJoints { expected: usize, got: usize },
}

/// Signed clearance of a finger (distance to the mesh minus capsule radius), looking at
/// most `horizon` beyond contact. Returns `None` when nothing is that close.
fn clearance(mesh: &TriangleMesh, capsules: &[Capsule], horizon: f64) -> Option<(f64, FingerContact)> {
    let mut best: Option<(f64, FingerContact)> = None;
    for c in capsules {
        if let Some(p) = mesh.closest_to_segment(&c.a, &c.b, c.radius + horizon) {
            let gap = p.distance - c.radius;
            if best.as_ref().is_none_or(|(g, _)| gap < *g) {
                let dir = p.on_segment - p.on_mesh;
                let normal = if p.distance > 1e-12 {
                    dir / p.distance
                } else {
                    mesh.normals()[p.triangle_id]
                };
                best = Some((
                    gap,
                    FingerContact {
                        point: p.on_mesh,
                        normal,
                    },
                ));
            }
        }
    }
    best
}

/// Closes the fingers of `synergy_id` until each touches the mesh or hits its limit.
///
/// Fingers advance on a fixed step grid; steps that are provably collision-free
/// (clearance larger than the motion bound) are skipped, which yields the same first
/// contact step as naive stepping. The contact instant is then bisected down to
/// [`REFINE_TOLERANCE`].
pub fn close_fingers(
    spec: &GripperSpec,
    frame: &GripperFrame,
    synergy_id: usize,
    init_joints: &[f64],
    mesh: &TriangleMesh,
) -> Result<FingerState, ClosureError> {
    let synergy = spec
        .synergies
        .get(synergy_id)
        .ok_or(ClosureError::BadSynergy(synergy_id))?;
    if init_joints.len() != spec.k_free_joints() {
        return Err(ClosureError::BadJoints {
            expected: spec.k_free_joints(),
            got: init_joints.len(),
        });
    }
    let limit = spec.travel_limit();
    let step = spec.travel_step();
    let bound = spec.motion_bound();
    let n_steps = (limit / step).ceil() as usize;
    let at = |k: usize| (k as f64 * step).min(limit);

    let mut state = FingerState {
        closure: vec![0.0; spec.n_fingers],
        contacts: vec![None; spec.n_fingers],
    };
    for f in 0..spec.n_fingers {
        let caps = spec.finger_capsules(frame, f, 0.0, init_joints);
        if let Some((gap, _)) = clearance(mesh, &caps, 0.0) {
            if gap <= 0.0 {
                return Err(ClosureError::InitialPenetration(f));
            }
        }
    }

    for &f in synergy {
        let mut k = 0usize;
        let mut contact_step = None;
        loop {
            let t = at(k);
            let caps = spec.finger_capsules(frame, f, t, init_joints);
            let horizon = bound * (limit - t) + 1e-12;
            match clearance(mesh, &caps, horizon) {
                None => break,
                Some((gap, _)) if gap <= 0.0 => {
                    contact_step = Some(k);
                    break;
                }
                Some((gap, _)) => {
                    if k >= n_steps {
                        break;
                    }
                    let skip = ((gap / (bound * step)).ceil() as usize).max(1);
                    k = (k + skip).min(n_steps);
                }
            }
        }
        let Some(k) = contact_step else {
            state.closure[f] = 1.0;
            continue;
        };
        // the previous grid step is provably free
        let mut lo = at(k.saturating_sub(1));
        let mut hi = at(k);
        while (hi - lo) * bound > REFINE_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            let caps = spec.finger_capsules(frame, f, mid, init_joints);
            match clearance(mesh, &caps, 0.0) {
                Some((gap, _)) if gap <= 0.0 => hi = mid,
                _ => lo = mid,
            }
        }
        let caps = spec.finger_capsules(frame, f, hi, init_joints);
        let (_, contact) = clearance(mesh, &caps, REFINE_TOLERANCE).expect("contact persists at the refined instant");
        state.closure[f] = hi / limit;
        state.contacts[f] = Some(contact);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_between;
    use crate::mesh::shapes;
    use proptest::prelude::*;

    fn top_frame(height: f64) -> GripperFrame {
        GripperFrame {
            origin: Vec3::new(0.0, 0.0, height),
            x: Vec3::x(),
            y: -Vec3::z(),
            z: Vec3::y(),
        }
    }

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            let s = GripperSpec::preset(name).unwrap();
            s.validate().unwrap();
        }
        assert!(GripperSpec::preset("robotiq").is_err());
        let p = GripperSpec::preset("panda").unwrap();
        assert_eq!(p.synergy_count(), 1);
        assert_eq!(p.k_free_joints(), 0);
        assert_eq!(GripperSpec::preset("barrett3").unwrap().k_free_joints(), 2);
        assert_eq!(GripperSpec::preset("allegro4").unwrap().synergy_count(), 4);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut p = GripperSpec::preset("panda").unwrap();
        p.synergies = vec![vec![0, 1], vec![0]];
        assert!(p.validate().is_err());
        let mut a = GripperSpec::preset("allegro4").unwrap();
        a.synergies.push(vec![]);
        assert!(a.validate().is_err());
        let mut a = GripperSpec::preset("allegro4").unwrap();
        a.synergies.push(vec![7]);
        assert!(a.validate().is_err());
    }

    #[test]
    fn apex_of_cone_aligns_with_normal() {
        let n = Vec3::new(0.3, -0.2, 0.9).normalize();
        for xi in [0.0, 1.0, 4.0] {
            let f = palm_frame_from_approach(&Vec3::zeros(), &n, 0.02, 0.0, xi, 0.0);
            assert!((f.y + n).norm() < 1e-12);
            assert!((f.origin - n * 0.02).norm() < 1e-12);
        }
    }

    #[test]
    fn cone_angle_is_exact_for_all_revolutions() {
        let n = Vec3::new(-0.5, 0.1, 0.2).normalize();
        for k in 0..8 {
            let xi = k as f64 * PI / 4.0;
            let f = palm_frame_from_approach(&Vec3::zeros(), &n, 0.01, PI / 4.0, xi, 0.3);
            assert!((angle_between(&n, &-f.y) - PI / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn half_turn_roll_negates_x() {
        let n = Vec3::z();
        let a = palm_frame_from_approach(&Vec3::zeros(), &n, 0.0, 0.4, 1.0, 0.0);
        let b = palm_frame_from_approach(&Vec3::zeros(), &n, 0.0, 0.4, 1.0, PI);
        assert!((a.y - b.y).norm() < 1e-12);
        assert!((a.x + b.x).norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn frames_are_right_handed_orthonormal(
            nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0,
            d in 0.0f64..0.1, nu in 0.0f64..PI, xi in 0.0f64..(2.0 * PI), omega in 0.0f64..(2.0 * PI),
        ) {
            let n = Vec3::new(nx, ny, nz);
            prop_assume!(n.norm() > 1e-3);
            let f = palm_frame_from_approach(&Vec3::new(0.1, 0.2, 0.3), &n.normalize(), d, nu, xi, omega);
            prop_assert!(f.orthonormality_error() < 1e-9);
            prop_assert!((angle_between(&n, &-f.y) - nu).abs() < 1e-9);
        }
    }

    #[test]
    fn parallel_jaws_on_slab_stop_at_its_width() {
        let panda = GripperSpec::preset("panda").unwrap();
        let slab = shapes::cuboid(Vec3::new(0.04, 0.1, 0.1));
        let state = close_fingers(&panda, &top_frame(0.07), 0, &[], &slab).unwrap();
        assert_eq!(state.contact_count(), 2);
        let c0 = state.contacts[0].unwrap();
        let c1 = state.contacts[1].unwrap();
        assert!((c0.point.x - 0.02).abs() < 1e-4 && (c1.point.x + 0.02).abs() < 1e-4);
        // inner finger surfaces after closure
        let r = panda.finger_radii[0];
        let x0 = panda.max_aperture / 2.0 - state.closure[0] * panda.max_aperture / 2.0;
        let x1 = panda.max_aperture / 2.0 - state.closure[1] * panda.max_aperture / 2.0;
        assert!((x0 + x1 - 0.04).abs() < 1e-3);
        assert!(x0 + r > 0.0);
        assert!((c0.normal - Vec3::x()).norm() < 1e-6);
    }

    #[test]
    fn object_outside_sweep_gives_no_contact() {
        let panda = GripperSpec::preset("panda").unwrap();
        let sphere = shapes::icosphere(0.02, 2);
        let frame = top_frame(0.3);
        let state = close_fingers(&panda, &frame, 0, &[], &sphere).unwrap();
        assert_eq!(state.contact_count(), 0);
        assert!(state.closure.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn synergy_masks_fingers() {
        let allegro = GripperSpec::preset("allegro4").unwrap();
        let sphere = shapes::icosphere(0.035, 3);
        let frame = top_frame(0.035 + 0.01);
        let state = close_fingers(&allegro, &frame, 0, &[], &sphere).unwrap();
        for f in [2, 3] {
            assert_eq!(state.closure[f], 0.0);
            assert!(state.contacts[f].is_none());
        }
        assert!(state.closure[0] > 0.0 && state.closure[1] > 0.0);
        for c in state.contacts.iter().flatten() {
            let on_surface = (c.point.norm() - 0.035).abs();
            assert!(on_surface < 2e-3);
        }
    }

    #[test]
    fn initial_penetration_is_reported() {
        let panda = GripperSpec::preset("panda").unwrap();
        let slab = shapes::cuboid(Vec3::new(0.1, 0.1, 0.1));
        let err = close_fingers(&panda, &top_frame(0.06), 0, &[], &slab).unwrap_err();
        assert!(matches!(err, ClosureError::InitialPenetration(_)));
    }

    #[test]
    fn step_skipping_matches_naive_stepping() {
        // naive fixed-step sweep for the parallel jaw, finger 0
        let panda = GripperSpec::preset("panda").unwrap();
        let sphere = shapes::icosphere(0.03, 3);
        for h in [0.03, 0.04, 0.05, 0.06] {
            let frame = GripperFrame {
                origin: Vec3::new(0.004, 0.003, h),
                ..top_frame(h)
            };
            let state = close_fingers(&panda, &frame, 0, &[], &sphere).unwrap();
            let limit = panda.max_aperture / 2.0;
            let mut naive = None;
            let n = (limit / TRANSLATION_STEP).ceil() as usize;
            for k in 0..=n {
                let t = (k as f64 * TRANSLATION_STEP).min(limit);
                let c = panda.finger_capsules(&frame, 0, t, &[])[0];
                let d = sphere.closest_to_segment(&c.a, &c.b, 1.0).unwrap().distance;
                if d <= c.radius {
                    naive = Some(k);
                    break;
                }
            }
            match naive {
                None => assert!(state.contacts[0].is_none()),
                Some(k) => {
                    let t = state.closure[0] * limit;
                    assert!(t <= k as f64 * TRANSLATION_STEP + 1e-12);
                    assert!(t >= (k as f64 - 1.0) * TRANSLATION_STEP - 1e-12);
                }
            }
        }
    }
}
