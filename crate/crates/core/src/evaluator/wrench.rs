//! Contact wrench cones and nonnegative least squares feasibility.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{orthonormal_basis, Vec3};

/// Relative residual below which a target counts as reachable.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;

/// One contact, `normal` pointing out of the object toward the finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    pub point: Vec3,
    pub normal: Vec3,
}

/// Describes how contact forces are discretized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactModel {
    pub friction: f64,
    pub edges: usize,
    /// Torsional friction radius (m); zero gives plain point contacts with friction.
    pub torsion: f64,
}

/// Generator wrenches as 6-row columns `(f, τ / length_scale)`, torques about `center`.
///
/// Each contact contributes `edges` friction cone edges and, when `torsion > 0`, two
/// pure normal pushes carrying `±torsion` spin about the normal. Every column has a
/// unit normal-force component, so column sums per contact measure the normal load.
pub fn contact_generators(
    contacts: &[ContactPoint],
    model: &ContactModel,
    center: &Vec3,
    length_scale: f64,
) -> DMatrix<f64> {
    let per = generators_per_contact(model);
    let mut g = DMatrix::zeros(6, per * contacts.len());
    let mut col = 0;
    for c in contacts {
        let n = c.normal.normalize();
        let push = -n;
        let (t1, t2) = orthonormal_basis(&n);
        let r = c.point - center;
        let mut put = |f: Vec3, spin: Vec3| {
            let tau = (r.cross(&f) + spin) / length_scale;
            for i in 0..3 {
                g[(i, col)] = f[i];
                g[(i + 3, col)] = tau[i];
            }
            col += 1;
        };
        for k in 0..model.edges {
            let a = std::f64::consts::TAU * k as f64 / model.edges as f64;
            put(push + (t1 * a.cos() + t2 * a.sin()) * model.friction, Vec3::zeros());
        }
        if model.torsion > 0.0 {
            put(push, push * model.torsion);
            put(push, -push * model.torsion);
        }
    }
    g
}

pub fn generators_per_contact(model: &ContactModel) -> usize {
    model.edges + if model.torsion > 0.0 { 2 } else { 0 }
}

/// Lawson–Hanson active-set solution of `min ‖A x − b‖` subject to `x ≥ 0`.
/// Returns the minimizer and the residual norm.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let (m, n) = a.shape();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    let tol = 10.0 * f64::EPSILON * scale * (m.max(n) as f64) * b.norm().max(1e-300);
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let resid = b - a * &x;
        let w = a.transpose() * &resid;
        let pick = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(j) = pick else { break };
        passive[j] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let s = least_squares_on(a, b, &idx);
            if idx.iter().zip(s.iter()).all(|(_, &v)| v > 0.0) || inner > 3 * n {
                x.fill(0.0);
                for (&k, &v) in idx.iter().zip(s.iter()) {
                    x[k] = v.max(0.0);
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&k, &v) in idx.iter().zip(s.iter()) {
                if v <= 0.0 {
                    alpha = alpha.min(x[k] / (x[k] - v));
                }
            }
            for (&k, &v) in idx.iter().zip(s.iter()) {
                x[k] += alpha * (v - x[k]);
                if x[k] <= 1e-14 * scale {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    let r = (b - a * &x).norm();
    (x, r)
}

fn least_squares_on(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    if idx.is_empty() {
        return DVector::zeros(0);
    }
    let sub = a.select_columns(idx);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, smax * 1e-12).unwrap_or_else(|_| DVector::zeros(idx.len()))
}

/// True iff `target` is a nonnegative combination of the columns of `gens`.
pub fn cone_contains(gens: &DMatrix<f64>, target: &DVector<f64>) -> bool {
    let norm = target.norm();
    if norm == 0.0 {
        return true;
    }
    if gens.ncols() == 0 {
        return false;
    }
    let (_, r) = nnls(gens, target);
    r <= FEASIBILITY_TOLERANCE * norm
}

/// Like [`cone_contains`] with at most `max_load` normal force per contact.
pub fn bounded_cone_contains(gens: &DMatrix<f64>, per_contact: usize, max_load: f64, target: &DVector<f64>) -> bool {
    if !max_load.is_finite() {
        return cone_contains(gens, target);
    }
    let k = gens.ncols();
    let nc = k / per_contact.max(1);
    let rows = 6 + nc;
    let mut a = DMatrix::zeros(rows, k + nc);
    a.view_mut((0, 0), (6, k)).copy_from(gens);
    for c in 0..nc {
        for j in 0..per_contact {
            a[(6 + c, c * per_contact + j)] = 1.0;
        }
        a[(6 + c, k + c)] = 1.0;
    }
    let mut b = DVector::zeros(rows);
    b.rows_mut(0, 6).copy_from(target);
    for c in 0..nc {
        b[6 + c] = max_load;
    }
    let (_, r) = nnls(&a, &b);
    r <= FEASIBILITY_TOLERANCE * b.norm()
}

/// Contacts can resist external wrench `w` (forces in N, torques in N·m about `center`).
pub fn wrench_resists(contacts: &[ContactPoint], wrench: &[f64; 6], friction: f64, edge_count: usize) -> bool {
    let model = ContactModel {
        friction,
        edges: edge_count,
        torsion: 0.0,
    };
    let center = Vec3::zeros();
    let g = contact_generators(contacts, &model, &center, 1.0);
    let target = -DVector::from_row_slice(wrench);
    cone_contains(&g, &target)
}

/// Force closure: the generators span all wrenches and some strictly positive
/// combination of them cancels out.
pub fn force_closure(gens: &DMatrix<f64>) -> bool {
    if gens.ncols() < 7 {
        return false;
    }
    let sv = gens.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if sv.iter().filter(|&&s| s > 1e-9 * smax).count() < 6 {
        return false;
    }
    let squeeze = -gens.column_sum() / gens.ncols() as f64;
    cone_contains(gens, &squeeze)
}
