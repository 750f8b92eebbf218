use super::*;
use crate::geometry::angle_between;
use crate::mesh::shapes;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn top_down(origin: Vec3) -> GraspPose {
    let frame = GripperFrame {
        origin,
        x: Vec3::x(),
        y: -Vec3::z(),
        z: Vec3::y(),
    };
    GraspPose::from_frame(&frame, 0, vec![])
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n < 1.0 {
            return v / n;
        }
    }
}

/// Exact cone membership by enumeration: `t` is in the cone iff it is a nonnegative
/// combination of some 6 linearly independent generators.
fn enumeration_oracle(g: &DMatrix<f64>, t: &DVector<f64>) -> bool {
    let k = g.ncols();
    let mut idx = [0usize, 1, 2, 3, 4, 5];
    loop {
        let sub = g.select_columns(&idx);
        if let Some(lu) = sub.clone().lu().solve(t) {
            let check = (&sub * &lu - t).norm() <= 1e-9 * t.norm();
            if check && sub.determinant().abs() > 1e-12 && lu.iter().all(|&v| v >= -1e-9) {
                return true;
            }
        }
        // next combination in lexicographic order
        let mut i = 5;
        loop {
            if idx[i] < k - 6 + i {
                idx[i] += 1;
                for j in i + 1..6 {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return false;
            }
            i -= 1;
        }
    }
}

#[test]
fn diametric_sphere_pinch_holds_both_shakes() {
    let mesh = shapes::icosphere(0.035, 3);
    let panda = GripperSpec::preset("panda").unwrap();
    let res = evaluate(
        &top_down(Vec3::new(0.0, 0.0, 0.04)),
        &mesh,
        &panda,
        &PhysicsParams::default(),
    );
    assert!(res.valid);
    assert_eq!(res.fitness, 2.0);
    assert_eq!(res.contacts.len(), 2);
    let (a, b) = (res.contacts[0].normal, res.contacts[1].normal);
    assert!(angle_between(&a, &-b) < 0.2);
}

#[test]
fn palm_inside_object_is_invalid() {
    let mesh = shapes::cuboid(Vec3::new(0.3, 0.3, 0.3));
    let panda = GripperSpec::preset("panda").unwrap();
    let res = evaluate(
        &top_down(Vec3::new(0.0, 0.0, 0.01)),
        &mesh,
        &panda,
        &PhysicsParams::default(),
    );
    assert!(!res.valid);
    assert_eq!(res.fitness, 0.0);
}

#[test]
fn single_finger_on_plate_edge_is_invalid() {
    // thin plate whose edge sits between the right finger and the gripper axis
    let plate = shapes::cuboid(Vec3::new(0.1, 0.1, 0.004));
    let panda = GripperSpec::preset("panda").unwrap();
    let frame = GripperFrame {
        origin: Vec3::new(0.07, 0.0, 0.0),
        x: Vec3::x(),
        y: -Vec3::y(),
        z: -Vec3::z(),
    };
    let pose = GraspPose::from_frame(&frame, 0, vec![]);
    let res = evaluate(&pose, &plate, &panda, &PhysicsParams::default());
    assert!(!res.valid);
}

#[test]
fn tangential_graze_is_not_a_grasp() {
    let r = 0.04;
    let mesh = shapes::icosphere(r, 3);
    let panda = GripperSpec::preset("panda").unwrap();
    // right finger barely touches the sphere's side; the left finger sweeps through air
    let finger_axis = panda.max_aperture / 2.0 + panda.finger_radii[0];
    let x = -(r + panda.finger_radii[0] + 0.001) + finger_axis;
    let res = evaluate(
        &top_down(Vec3::new(x, 0.0, 0.045)),
        &mesh,
        &panda,
        &PhysicsParams::default(),
    );
    assert!(!res.valid || res.fitness == 0.0);
}

#[test]
fn squeeze_and_unilateral_examples() {
    let pair = [
        ContactPoint {
            point: Vec3::x(),
            normal: Vec3::x(),
        },
        ContactPoint {
            point: -Vec3::x(),
            normal: -Vec3::x(),
        },
    ];
    // equal and opposite pushes: any squeeze along the axis is internal
    assert!(wrench_resists(&pair, &[0.0; 6], 0.5, 8));
    let model = ContactModel {
        friction: 0.5,
        edges: 8,
        torsion: 0.0,
    };
    let g = contact_generators(&pair, &model, &Vec3::zeros(), 1.0);
    let squeeze = -g.column_sum();
    assert!(cone_contains(&g, &squeeze));
    // frictionless single contact cannot pull
    let one = [pair[0]];
    assert!(!wrench_resists(&one, &[-1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1e-12, 4));
    assert!(wrench_resists(&one, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1e-12, 4));
}

#[test]
fn nnls_agrees_with_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut agree = 0;
    let mut feasible = 0;
    let n = 300;
    for _ in 0..n {
        let contacts: Vec<ContactPoint> = (0..3)
            .map(|_| {
                let p = random_unit(&mut rng);
                ContactPoint { point: p, normal: p }
            })
            .collect();
        let w: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let got = wrench_resists(&contacts, &w, 0.5, 6);
        let model = ContactModel {
            friction: 0.5,
            edges: 6,
            torsion: 0.0,
        };
        let g = contact_generators(&contacts, &model, &Vec3::zeros(), 1.0);
        let t = -DVector::from_row_slice(&w);
        let oracle = enumeration_oracle(&g, &t);
        feasible += usize::from(oracle);
        agree += usize::from(got == oracle);
    }
    assert!(
        feasible > n / 20 && feasible < n - n / 20,
        "degenerate sample: {feasible}"
    );
    assert!(agree as f64 >= 0.99 * n as f64, "agreement {agree}/{n}");
}

#[test]
fn cone_decisions_ignore_generator_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let contacts: Vec<ContactPoint> = (0..3)
            .map(|_| {
                let p = random_unit(&mut rng);
                ContactPoint { point: p, normal: p }
            })
            .collect();
        let model = ContactModel {
            friction: 0.4,
            edges: 6,
            torsion: 0.01,
        };
        let g = contact_generators(&contacts, &model, &Vec3::zeros(), 1.0);
        let mut scaled = g.clone();
        for j in 0..g.ncols() {
            scaled.column_mut(j).scale_mut(rng.random_range(0.01..100.0));
        }
        let t = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        assert_eq!(cone_contains(&g, &t), cone_contains(&scaled, &t));
    }
}

#[test]
fn nnls_solves_a_small_system_exactly() {
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let b = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
    let (x, r) = nnls(&a, &b);
    assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12 && r < 1e-12);
    let b = DVector::from_row_slice(&[-1.0, 2.0, 1.0]);
    let (x, _) = nnls(&a, &b);
    assert_eq!(x[0], 0.0);
    assert!((x[1] - 1.5).abs() < 1e-12);
}

#[test]
fn full_fitness_implies_force_closure_margin() {
    let mesh = shapes::icosphere(0.035, 3);
    let panda = GripperSpec::preset("panda").unwrap();
    let params = PhysicsParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for _ in 0..200 {
        let o = Vec3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), 0.04);
        let res = evaluate(&top_down(o), &mesh, &panda, &params);
        if res.fitness != 2.0 {
            continue;
        }
        checked += 1;
        let pts: Vec<ContactPoint> = res
            .contacts
            .iter()
            .map(|c| ContactPoint {
                point: c.point,
                normal: c.normal,
            })
            .collect();
        let g = contact_generators(&pts, &params.contact_model(), &mesh.centroid(), 0.04);
        for _ in 0..20 {
            let w = DVector::from_fn(6, |_, _| rng.random_range(-1e-3..1e-3));
            assert!(cone_contains(&g, &w));
        }
    }
    assert!(checked > 20);
}

#[test]
fn mdr_without_noise_multiplies_nominal_fitness() {
    let mesh = shapes::icosphere(0.04, 3);
    let panda = GripperSpec::preset("panda").unwrap();
    let params = PhysicsParams::default();
    let pose = top_down(Vec3::new(0.003, -0.002, 0.045));
    let nominal = evaluate(&pose, &mesh, &panda, &params);
    let mdr = MdrParams {
        trials: 7,
        sigma_position: 0.0,
        sigma_orientation: 0.0,
        sigma_friction: 0.0,
    };
    let res = evaluate_mdr(&pose, &mesh, &panda, &params, &mdr, 1);
    assert!((res.fitness - 7.0 * nominal.fitness).abs() < 1e-12);
}

#[test]
fn robust_pinch_reaches_mdr_maximum() {
    let mesh = shapes::icosphere(0.035, 3);
    let panda = GripperSpec::preset("panda").unwrap();
    let params = PhysicsParams::default();
    assert_eq!(MdrParams::default().max_fitness(), 200.0);
    // round fingertips let an off-center ball slip, so keep the position noise small
    let mdr = MdrParams {
        sigma_position: 0.001,
        ..MdrParams::default()
    };
    assert_eq!(mdr.max_fitness(), 200.0);
    let res = evaluate_mdr(&top_down(Vec3::new(0.0, 0.0, 0.04)), &mesh, &panda, &params, &mdr, 5);
    assert_eq!(res.fitness, 200.0);
    assert_eq!(mdr.eta(res.fitness), 1.0);
    let again = evaluate_mdr(&top_down(Vec3::new(0.0, 0.0, 0.04)), &mesh, &panda, &params, &mdr, 5);
    assert_eq!(res, again);
}

#[test]
fn bowl_rim_is_more_fragile_than_side_pinch() {
    let bowl = shapes::bowl(0.035, 0.04, 0.004, 48);
    let panda = GripperSpec::preset("panda").unwrap();
    let params = PhysicsParams::default();
    let mdr = MdrParams::default();
    // pinch the rim wall from above
    let rim = top_down(Vec3::new(0.033, 0.0, 0.087));
    // pinch the whole bowl across its width, fingers near the rim height
    let side = top_down(Vec3::new(0.0, 0.0, 0.04 + 0.035));
    let f_rim = evaluate(&rim, &bowl, &panda, &params);
    let f_side = evaluate(&side, &bowl, &panda, &params);
    assert!(f_rim.fitness > 0.0 && f_side.fitness > 0.0, "{f_rim:?} {f_side:?}");
    let e_rim = mdr.eta(evaluate_mdr(&rim, &bowl, &panda, &params, &mdr, 2).fitness);
    let e_side = mdr.eta(evaluate_mdr(&side, &bowl, &panda, &params, &mdr, 2).fitness);
    assert!(e_rim < e_side, "rim {e_rim} side {e_side}");
}
