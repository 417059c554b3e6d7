//! Error norms, elementwise `L2` projection and convergence rates.

use std::sync::Arc;

use nalgebra::{Point2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{DiffusionField, FaceCoefficients};
use crate::error::{Error, Result};
use crate::forms::{values_at, DgFunction, DgSpace, PointFn};
use crate::mesh::{BoundaryKind, SubdomainId};

pub type GradFn = Arc<dyn Fn(&Point2<f64>, SubdomainId) -> Vector2<f64> + Send + Sync>;

/// Exact solution: value and gradient, both evaluated with the subdomain
/// id of the element the point belongs to.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: PointFn,
    pub gradient: GradFn,
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExactSolution { .. }")
    }
}

/// Error norms of `u - u_h`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    pub h: f64,
    pub dofs: usize,
    pub err_l2: f64,
    /// `||kappa^{1/2} grad_h e||`
    pub err_grad: f64,
    /// `|e|_{0,h}`: `rho0`-weighted jumps over interior and Dirichlet faces.
    pub err_jump: f64,
    /// `(err_grad^2 + err_jump^2)^{1/2}`
    pub err_energy: f64,
    /// `|e|_{1,h}`: `(sum_E h_E ||kappa^{1/2} grad e||^2_{dE})^{1/2}`
    pub err_trace: f64,
    /// `(err_energy^2 + err_trace^2)^{1/2}`
    pub err_augmented: f64,
}

/// Elementwise `L2` projection onto the broken space. The orthonormal basis
/// makes the element mass matrix `2|E| I`, so each coefficient is a single
/// moment.
pub fn l2_project<F>(space: &DgSpace, f: &F) -> DgFunction
where
    F: Fn(&Point2<f64>, SubdomainId) -> f64 + Sync + ?Sized,
{
    let n = space.n_loc();
    let tris = space.mesh().triangles();
    let coeffs: Vec<f64> = (0..space.num_elements())
        .into_par_iter()
        .flat_map_iter(|e| {
            let (pts, w) = space.volume_points(e);
            let t = &space.volume_table().values;
            let fv: Vec<f64> = pts.iter().zip(&w).map(|(p, wq)| wq * f(p, tris[e].subdomain)).collect();
            let mass = 2.0 * space.mesh().area(e);
            (0..n).map(move |i| fv.iter().enumerate().map(|(q, v)| v * t[(i, q)]).sum::<f64>() / mass)
        })
        .collect();
    DgFunction::from_vec(space, coeffs).expect("projection has the space dimension")
}

/// Computes all error norms of `u - u_h`.
///
/// `coeffs` supplies the `rho0` weights of the jump seminorm; pass the
/// stabilization-weighted table so that errors of different schemes are
/// measured in the same norm.
pub fn compute_errors(
    space: &DgSpace,
    u_h: &DgFunction,
    exact: &ExactSolution,
    diffusion: &DiffusionField,
    coeffs: &[FaceCoefficients],
) -> Result<ErrorReport> {
    if coeffs.len() != space.skeleton().num_faces() {
        return Err(Error::InvalidArgument("coefficient table does not match the skeleton".into()));
    }
    let kappas = diffusion.element_tensors(space.mesh())?;
    let tris = space.mesh().triangles();
    let sk = space.skeleton();

    // per element: (l2^2, grad^2, trace^2)
    let per_element: Vec<(f64, f64, f64)> = (0..space.num_elements())
        .into_par_iter()
        .map(|e| {
            let sub = tris[e].subdomain;
            let kappa = &kappas[e];
            let c = u_h.block(e);
            let (pts, w) = space.volume_points(e);
            let table = space.volume_table();
            let (gx, gy) = space.physical_gradients(e, table);
            let vals = values_at(&table.values, c);
            let dx = values_at(&gx, c);
            let dy = values_at(&gy, c);
            let (mut l2, mut grad) = (0.0, 0.0);
            for (q, p) in pts.iter().enumerate() {
                let err = (exact.value)(p, sub) - vals[q];
                let ge = (exact.gradient)(p, sub) - Vector2::new(dx[q], dy[q]);
                l2 += w[q] * err * err;
                grad += w[q] * kappa.inner(&ge, &ge);
            }
            let mut trace = 0.0;
            for f in sk.element_faces(e) {
                let face = sk.face(f);
                let side = *face.sides().find(|s| s.element == e).unwrap();
                let ft = space.face_table(&side);
                let (fgx, fgy) = space.physical_gradients(e, ft);
                let fdx = values_at(&fgx, c);
                let fdy = values_at(&fgy, c);
                let (fpts, fw) = space.face_points(f);
                for (q, p) in fpts.iter().enumerate() {
                    let ge = (exact.gradient)(p, sub) - Vector2::new(fdx[q], fdy[q]);
                    trace += fw[q] * kappa.inner(&ge, &ge);
                }
            }
            (l2, grad, space.mesh().diameter(e) * trace)
        })
        .collect();

    let jumps: Vec<f64> = (0..sk.num_faces())
        .into_par_iter()
        .map(|f| {
            let face = sk.face(f);
            if face.boundary == Some(BoundaryKind::Neumann) {
                return 0.0;
            }
            let (pts, w) = space.face_points(f);
            let side_err = |side: &crate::mesh::FaceSide| -> Vec<f64> {
                let vals = values_at(&space.face_table(side).values, u_h.block(side.element));
                let sub = tris[side.element].subdomain;
                pts.iter().zip(vals).map(|(p, v)| (exact.value)(p, sub) - v).collect()
            };
            let e1 = side_err(&face.left);
            let jump: Vec<f64> = match &face.right {
                Some(r) => e1.iter().zip(side_err(r)).map(|(a, b)| a - b).collect(),
                None => e1,
            };
            coeffs[f].rho0 * jump.iter().zip(&w).map(|(j, wq)| wq * j * j).sum::<f64>()
        })
        .collect();

    let (l2, grad, trace) = per_element
        .iter()
        .fold((0.0, 0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1, acc.2 + v.2));
    let jump: f64 = jumps.iter().sum();
    Ok(ErrorReport {
        h: space.mesh().h_max(),
        dofs: space.ndof(),
        err_l2: l2.sqrt(),
        err_grad: grad.sqrt(),
        err_jump: jump.sqrt(),
        err_energy: (grad + jump).sqrt(),
        err_trace: trace.sqrt(),
        err_augmented: (grad + jump + trace).sqrt(),
    })
}

/// Estimated convergence rate `log(e_c / e_f) / log(h_c / h_f)`; `None`
/// when an error is not positive or the mesh sizes are not decreasing.
pub fn ecr(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> Option<f64> {
    if !(e_coarse > 0.0 && e_fine > 0.0 && h_coarse > h_fine && h_fine > 0.0) {
        return None;
    }
    Some((e_coarse / e_fine).ln() / (h_coarse / h_fine).ln())
}

/// Rates between every consecutive pair of `(h, error)` samples.
pub fn ecr_sequence(samples: &[(f64, f64)]) -> Vec<Option<f64>> {
    samples.windows(2).map(|w| ecr(w[0].1, w[1].1, w[0].0, w[1].0)).collect()
}

/// Maximum of `|u|` over the volume quadrature points and element vertices.
pub fn max_norm(space: &DgSpace, u: &DgFunction) -> f64 {
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    (0..space.num_elements())
        .map(|e| {
            let t = values_at(&space.volume_table().values, u.block(e));
            let vq = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            corners.iter().fold(vq, |m, xi| m.max(space.eval(u, e, *xi).0.abs()))
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{face_coefficients, PenaltySpec, Scheme, Tensor2};
    use crate::mesh::{generate_structured, BoundingBox, DiagonalSplit, Partition};
    use approx::assert_relative_eq;

    fn setup(n: usize, k: usize) -> (DgSpace, DiffusionField, Vec<FaceCoefficients>) {
        let mesh = generate_structured(n, &BoundingBox::unit_square(), DiagonalSplit::Alternate, Partition::None).unwrap();
        let space = DgSpace::new(mesh, k).unwrap();
        let field = DiffusionField::uniform(Tensor2::new(2.0, 0.5, 1.0).unwrap());
        let c = face_coefficients(space.mesh(), space.skeleton(), &field, &PenaltySpec::new(Scheme::Uip, k)).unwrap();
        (space, field, c)
    }

    fn quadratic() -> ExactSolution {
        ExactSolution {
            value: Arc::new(|p, _| 1.0 + p.x - 2.0 * p.y + 0.5 * p.x * p.y + p.y * p.y),
            gradient: Arc::new(|p, _| Vector2::new(1.0 + 0.5 * p.y, -2.0 + 0.5 * p.x + 2.0 * p.y)),
        }
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let (space, field, c) = setup(3, 2);
        let exact = quadratic();
        let u = l2_project(&space, exact.value.as_ref());
        let r = compute_errors(&space, &u, &exact, &field, &c).unwrap();
        for v in [r.err_l2, r.err_grad, r.err_jump, r.err_energy, r.err_trace, r.err_augmented] {
            assert!(v <= 1e-11, "{r:?}");
        }
    }

    #[test]
    fn projection_preserves_means() {
        let (space, _, _) = setup(2, 1);
        let f = |p: &Point2<f64>, _| (3.0 * p.x).sin() * p.y.exp();
        let u = l2_project(&space, &f);
        for e in 0..space.num_elements() {
            let (pts, w) = space.volume_points(e);
            let exact_mean: f64 = pts.iter().zip(&w).map(|(p, wq)| wq * f(p, 0)).sum();
            // the constant basis function is sqrt(2)
            assert_relative_eq!(u.block(e)[0] * 2f64.sqrt() * space.mesh().area(e), exact_mean, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_error_and_norm_parts() {
        let (space, field, c) = setup(2, 1);
        let zero = ExactSolution {
            value: Arc::new(|_, _| 0.0),
            gradient: Arc::new(|_, _| Vector2::zeros()),
        };
        let r = compute_errors(&space, &DgFunction::zeros(&space), &zero, &field, &c).unwrap();
        assert_eq!(r.err_energy, 0.0);
        let r = compute_errors(&space, &DgFunction::zeros(&space), &quadratic(), &field, &c).unwrap();
        assert_relative_eq!(r.err_energy.powi(2), r.err_grad.powi(2) + r.err_jump.powi(2), max_relative = 1e-12);
    }

    #[test]
    fn rates() {
        assert_relative_eq!(ecr(0.1, 0.025, 0.2, 0.1).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(ecr(0.278, 0.192, 5.1e-2, 2.5e-2).unwrap(), 0.5198, epsilon = 1e-3);
        assert_eq!(ecr(0.3, 0.3, 0.2, 0.1), Some(0.0));
        assert_eq!(ecr(0.0, 0.1, 0.2, 0.1), None);
        assert_eq!(ecr_sequence(&[(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625)]), vec![Some(2.0), Some(2.0)]);
    }
}
