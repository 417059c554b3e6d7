use nalgebra::{Point2, Vector2};

use super::space::{values_at, DgFunction, DgSpace};
use crate::coeffs::{DiffusionField, FaceCoefficients};
use crate::error::{Error, Result};
use crate::hybrid::SkeletonFunction;

/// Traces of a broken function on one face at the face quadrature points.
///
/// Index 0 refers to the left element. On boundary faces the right-hand
/// entries are empty and both means reduce to the one-sided trace.
#[derive(Debug, Clone)]
pub struct FaceTraces {
    pub points: Vec<Point2<f64>>,
    /// Quadrature weights including the face length.
    pub weights: Vec<f64>,
    pub values: [Vec<f64>; 2],
    pub gradients: [Vec<Vector2<f64>>; 2],
    /// `v_1 n_1 + v_2 n_2`, or `v n` on the boundary.
    pub jump: Vec<Vector2<f64>>,
    /// `omega_1 v_1 + omega_2 v_2`
    pub mean: Vec<f64>,
    /// `omega_2 v_1 + omega_1 v_2`
    pub conj_mean: Vec<f64>,
}

fn side_values(space: &DgSpace, u: &DgFunction, f: usize, left: bool) -> (Vec<f64>, Vec<Vector2<f64>>) {
    let face = space.skeleton().face(f);
    let side = if left { face.left } else { face.right.expect("interior face") };
    let table = space.face_table(&side);
    let (gx, gy) = space.physical_gradients(side.element, table);
    let c = u.block(side.element);
    let vals = values_at(&table.values, c);
    let dx = values_at(&gx, c);
    let dy = values_at(&gy, c);
    (vals, dx.into_iter().zip(dy).map(|(x, y)| Vector2::new(x, y)).collect())
}

pub fn face_traces(space: &DgSpace, u: &DgFunction, f: usize, coeffs: &FaceCoefficients) -> FaceTraces {
    let face = space.skeleton().face(f);
    let (points, weights) = space.face_points(f);
    let n = face.normal;
    let (v1, g1) = side_values(space, u, f, true);
    if face.is_interior() {
        let (v2, g2) = side_values(space, u, f, false);
        let jump = v1.iter().zip(&v2).map(|(a, b)| n * (a - b)).collect();
        let mean = v1.iter().zip(&v2).map(|(a, b)| coeffs.weighted_mean(*a, *b)).collect();
        let conj_mean = v1.iter().zip(&v2).map(|(a, b)| coeffs.conj_mean(*a, *b)).collect();
        FaceTraces {
            points,
            weights,
            values: [v1, v2],
            gradients: [g1, g2],
            jump,
            mean,
            conj_mean,
        }
    } else {
        FaceTraces {
            points,
            weights,
            jump: v1.iter().map(|a| n * *a).collect(),
            mean: v1.clone(),
            conj_mean: v1.clone(),
            values: [v1, Vec::new()],
            gradients: [g1, Vec::new()],
        }
    }
}

/// Evaluates both sides of the discrete integration-by-parts identity
///
/// `sum_E <b . n_E, phi - phi_hat>_{dE}
///    = sum_F <{b}^conj, [phi]>_F + sum_{F interior} <[b], {phi}_omega - phi_hat>_F`
///
/// with `b = (bx, by)` a broken vector field. The two sides are computed
/// by separate loops (element boundaries versus faces).
pub fn identity_relation_check(
    space: &DgSpace,
    bx: &DgFunction,
    by: &DgFunction,
    phi: &DgFunction,
    phi_hat: &SkeletonFunction,
    omega: &[FaceCoefficients],
) -> Result<(f64, f64)> {
    let sk = space.skeleton();
    for &f in sk.boundary_faces() {
        if phi_hat.face(f).iter().any(|&c| c != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "the trace function must vanish on boundary face {f}"
            )));
        }
    }
    let edge_rule = space.edge_rule();

    // element-by-element loop over element boundaries
    let mut lhs = 0.0;
    for e in 0..space.num_elements() {
        for f in sk.element_faces(e) {
            let face = sk.face(f);
            let side = *face.sides().find(|s| s.element == e).unwrap();
            let table = space.face_table(&side);
            let n_e = face.normal_from(e);
            let bxv = values_at(&table.values, bx.block(e));
            let byv = values_at(&table.values, by.block(e));
            let pv = values_at(&table.values, phi.block(e));
            for (q, p) in edge_rule.points.iter().enumerate() {
                let w = edge_rule.weights[q] * face.length;
                let bn = bxv[q] * n_e.x + byv[q] * n_e.y;
                lhs += w * bn * (pv[q] - phi_hat.eval(f, p[0]));
            }
        }
    }

    // face loop with jumps and weighted means
    let mut rhs = 0.0;
    for f in 0..sk.num_faces() {
        let c = &omega[f];
        let tb_x = face_traces(space, bx, f, c);
        let tb_y = face_traces(space, by, f, c);
        let tp = face_traces(space, phi, f, c);
        for q in 0..tp.weights.len() {
            let w = tp.weights[q];
            let conj_b = Vector2::new(tb_x.conj_mean[q], tb_y.conj_mean[q]);
            rhs += w * conj_b.dot(&tp.jump[q]);
            if sk.face(f).is_interior() {
                let jump_b = tb_x.jump[q].x + tb_y.jump[q].y;
                let s = edge_rule.points[q][0];
                rhs += w * jump_b * (tp.mean[q] - phi_hat.eval(f, s));
            }
        }
    }
    Ok((lhs, rhs))
}

/// The consistency term `-sum_F <{kappa grad u}^conj . n, [v]>` evaluated two
/// ways: with the conjugate weighted mean, and as the arithmetic mean plus
/// the `gamma` correction `sum_F <gamma_n [kappa grad u . n], [v] . n>`.
pub fn consistency_decomposition(
    space: &DgSpace,
    diffusion: &DiffusionField,
    coeffs: &[FaceCoefficients],
    u: &DgFunction,
    v: &DgFunction,
) -> Result<(f64, f64)> {
    let kappas = diffusion.element_tensors(space.mesh())?;
    let sk = space.skeleton();
    let (mut conj_form, mut split_form) = (0.0, 0.0);
    for f in 0..sk.num_faces() {
        let face = sk.face(f);
        let c = &coeffs[f];
        let tu = face_traces(space, u, f, c);
        let tv = face_traces(space, v, f, c);
        let n = face.normal;
        let k1 = &kappas[face.left.element];
        for q in 0..tu.weights.len() {
            let w = tu.weights[q];
            let q1 = k1.apply(&tu.gradients[0][q]).dot(&n);
            let jv = tv.jump[q].dot(&n);
            match face.right {
                None => {
                    conj_form -= w * q1 * jv;
                    split_form -= w * q1 * jv;
                }
                Some(r) => {
                    let q2 = kappas[r.element].apply(&tu.gradients[1][q]).dot(&n);
                    conj_form -= w * c.conj_mean(q1, q2) * jv;
                    split_form += w * (-0.5 * (q1 + q2) + c.gamma_n * (q1 - q2)) * jv;
                }
            }
        }
    }
    Ok((conj_form, split_form))
}

/// One-sided reconstructed normal fluxes `sigma_hat . n_left` at the face
/// quadrature points of an interior face, computed from the left and right
/// elements' data respectively.
///
/// Left: `-q_1 + tau_1 (u_1 - u_hat)`; right: `-q_2 - tau_2 (u_2 - u_hat)`
/// where `q_i = kappa_i grad u_i . n_left` and `u_hat` is the reconstructed
/// trace. Their difference measures flux conservation.
pub fn side_fluxes(
    space: &DgSpace,
    diffusion: &DiffusionField,
    coeffs: &[FaceCoefficients],
    u: &DgFunction,
    f: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let kappas = diffusion.element_tensors(space.mesh())?;
    let face = space.skeleton().face(f);
    let Some(r) = face.right else {
        return Err(Error::InvalidArgument(format!("face {f} is a boundary face")));
    };
    let c = &coeffs[f];
    let t = face_traces(space, u, f, c);
    let n = face.normal;
    let mut left = Vec::with_capacity(t.weights.len());
    let mut right = Vec::with_capacity(t.weights.len());
    for q in 0..t.weights.len() {
        let q1 = kappas[face.left.element].apply(&t.gradients[0][q]).dot(&n);
        let q2 = kappas[r.element].apply(&t.gradients[1][q]).dot(&n);
        let (u1, u2) = (t.values[0][q], t.values[1][q]);
        let u_hat = c.weighted_mean(u1, u2) - c.rho1 * (q1 - q2);
        left.push(-q1 + c.tau[0] * (u1 - u_hat));
        right.push(-q2 - c.tau[1] * (u2 - u_hat));
    }
    Ok((left, right))
}
