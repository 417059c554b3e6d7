//! Hybridized interior penalty formulation with a single-valued trace
//! unknown on the skeleton, static condensation of the element unknowns,
//! local recovery, and reconstruction of the numerical traces from any
//! broken function.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::coeffs::FaceCoefficients;
use crate::error::{Error, Result};
use crate::forms::{values_at, DgFunction, DgSpace, Problem};
use crate::linalg::{solve, BlockBuilder, SolveReport, SolverOptions, SparseMatrix};
use crate::mesh::BoundaryKind;
use crate::refelem::edge_legendre;

/// Piecewise `P_k` function on the skeleton in the orthonormal Legendre
/// basis of each face, parametrized along the face direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFunction {
    k: usize,
    coeffs: Vec<f64>,
}

impl SkeletonFunction {
    pub fn zeros(k: usize, num_faces: usize) -> Self {
        Self {
            k,
            coeffs: vec![0.0; num_faces * (k + 1)],
        }
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn face_dofs(&self) -> usize {
        self.k + 1
    }

    pub fn num_faces(&self) -> usize {
        self.coeffs.len() / (self.k + 1)
    }

    pub fn face(&self, f: usize) -> &[f64] {
        let m = self.k + 1;
        &self.coeffs[f * m..(f + 1) * m]
    }

    pub fn face_mut(&mut self, f: usize) -> &mut [f64] {
        let m = self.k + 1;
        &mut self.coeffs[f * m..(f + 1) * m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    /// Value on face `f` at parameter `s` in `[0, 1]`.
    pub fn eval(&self, f: usize, s: f64) -> f64 {
        edge_legendre(self.k, s).iter().zip(self.face(f)).map(|(p, c)| p * c).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Legendre basis on the face quadrature points, `(k+1) x nq`.
fn edge_table(space: &DgSpace) -> DMatrix<f64> {
    let k = space.degree();
    let pts = &space.edge_rule().points;
    let mut t = DMatrix::zeros(k + 1, pts.len());
    for (q, p) in pts.iter().enumerate() {
        for (m, v) in edge_legendre(k, p[0]).into_iter().enumerate() {
            t[(m, q)] = v;
        }
    }
    t
}

/// `L2` projection of nodal face data onto the Legendre basis.
fn project_face(edge: &DMatrix<f64>, weights: &[f64], values: &[f64]) -> Vec<f64> {
    (0..edge.nrows())
        .map(|m| (0..values.len()).map(|q| weights[q] * edge[(m, q)] * values[q]).sum())
        .collect()
}

/// Element-local blocks kept for recovery and residual checks.
#[derive(Debug, Clone)]
struct LocalSystem {
    faces: [usize; 3],
    a_ee: DMatrix<f64>,
    /// `[A_EF_0 | A_EF_1 | A_EF_2]`
    a_ef: DMatrix<f64>,
    b_e: DVector<f64>,
    /// `A_EE^{-1} A_EF`
    x: DMatrix<f64>,
    /// `A_EE^{-1} b_E`
    y: DVector<f64>,
}

/// Skeleton system after static condensation.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Block index of each face's unknowns, `None` for Dirichlet faces.
    pub face_index: Vec<Option<usize>>,
    /// Dirichlet moments on Dirichlet faces, zero elsewhere.
    pub dirichlet: SkeletonFunction,
    locals: Vec<LocalSystem>,
    k: usize,
}

impl CondensedSystem {
    pub fn num_unknown_faces(&self) -> usize {
        self.face_index.iter().flatten().count()
    }

    /// Full skeleton function from the solution vector of the condensed
    /// system.
    pub fn skeleton_function(&self, x: &[f64]) -> SkeletonFunction {
        let m = self.k + 1;
        let mut out = self.dirichlet.clone();
        for (f, idx) in self.face_index.iter().enumerate() {
            if let Some(i) = idx {
                out.face_mut(f).copy_from_slice(&x[i * m..(i + 1) * m]);
            }
        }
        out
    }

    fn local_traces(&self, e: usize, lambda: &SkeletonFunction) -> DVector<f64> {
        let m = self.k + 1;
        let mut l = DVector::zeros(3 * m);
        for (j, &f) in self.locals[e].faces.iter().enumerate() {
            l.rows_mut(j * m, m).copy_from_slice(lambda.face(f));
        }
        l
    }

    /// Largest element-equation residual `|A_EE u_E + A_EF lambda - b_E|_inf`,
    /// relative to `|b_E|_inf` (or absolute when `b = 0`).
    pub fn local_residual(&self, u: &DgFunction, lambda: &SkeletonFunction) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (e, loc) in self.locals.iter().enumerate() {
            let ue = DVector::from_column_slice(u.block(e));
            let r = &loc.a_ee * ue + &loc.a_ef * self.local_traces(e, lambda) - &loc.b_e;
            worst = worst.max(r.amax());
            scale = scale.max(loc.b_e.amax()).max((&loc.a_ee * DVector::from_column_slice(u.block(e))).amax());
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }
}

/// Assembles and condenses the hybrid system.
///
/// Element equations, for test functions `v` on `E`:
/// `(kappa grad u, grad v) + sum_F [ -<kappa grad u . n, v> + tau <u - u_hat, v>
///  - eps <kappa grad v . n, u - u_hat> ] = (f, v)`;
/// face equations express flux conservation `sum_E <sigma_hat . n_E, mu> = 0`
/// (or `= <g_N, mu>` on Neumann faces) with
/// `sigma_hat . n_E = -kappa grad u . n_E + tau (u - u_hat)`.
/// The one-sided `tau` values are read from `coeffs[f].tau`.
pub fn assemble_hip(space: &DgSpace, problem: &Problem, eps: f64, coeffs: &[FaceCoefficients]) -> Result<CondensedSystem> {
    let sk = space.skeleton();
    if coeffs.len() != sk.num_faces() {
        return Err(Error::InvalidArgument("coefficient table does not match the skeleton".into()));
    }
    let k = space.degree();
    let m = k + 1;
    let n = space.n_loc();
    let kappas = problem.diffusion.element_tensors(space.mesh())?;
    let tris = space.mesh().triangles();
    let psi = edge_table(space);
    let edge_w = &space.edge_rule().weights;

    // unknown numbering and Dirichlet moments
    let mut face_index = vec![None; sk.num_faces()];
    let mut next = 0;
    let mut dirichlet = SkeletonFunction::zeros(k, sk.num_faces());
    for (f, face) in sk.faces().iter().enumerate() {
        if face.boundary == Some(BoundaryKind::Dirichlet) {
            let (pts, _) = space.face_points(f);
            let sub = tris[face.left.element].subdomain;
            let g: Vec<f64> = pts.iter().map(|p| (problem.bc.dirichlet)(p, sub)).collect();
            dirichlet.face_mut(f).copy_from_slice(&project_face(&psi, edge_w, &g));
        } else {
            face_index[f] = Some(next);
            next += 1;
        }
    }

    let locals: Vec<LocalSystem> = (0..space.num_elements())
        .into_par_iter()
        .map(|e| -> Result<LocalSystem> {
            let kappa = &kappas[e];
            let mut a_ee = crate::forms::volume_block_pub(space, kappa, e);
            let mut a_ef = DMatrix::zeros(n, 3 * m);
            let faces = sk.element_faces(e);
            for (j, &f) in faces.iter().enumerate() {
                let face = sk.face(f);
                let side = *face.sides().find(|s| s.element == e).unwrap();
                let tau = if side.element == face.left.element { coeffs[f].tau[0] } else { coeffs[f].tau[1] };
                let table = space.face_table(&side);
                let (gx, gy) = space.physical_gradients(e, table);
                let kn = kappa.apply(&face.normal_from(e));
                let q = gx * kn.x + gy * kn.y;
                let phi = &table.values;
                let w: Vec<f64> = edge_w.iter().map(|wq| wq * face.length).collect();
                for i in 0..n {
                    for jj in 0..n {
                        let mut s = 0.0;
                        for (qq, wq) in w.iter().enumerate() {
                            s += wq
                                * (-q[(jj, qq)] * phi[(i, qq)] + tau * phi[(jj, qq)] * phi[(i, qq)]
                                    - eps * q[(i, qq)] * phi[(jj, qq)]);
                        }
                        a_ee[(i, jj)] += s;
                    }
                    for mm in 0..m {
                        let mut s = 0.0;
                        for (qq, wq) in w.iter().enumerate() {
                            s += wq * psi[(mm, qq)] * (-tau * phi[(i, qq)] + eps * q[(i, qq)]);
                        }
                        a_ef[(i, j * m + mm)] = s;
                    }
                }
            }
            let (pts, w) = space.volume_points(e);
            let t = &space.volume_table().values;
            let fv: Vec<f64> = pts.iter().zip(&w).map(|(p, wq)| wq * (problem.source)(p, tris[e].subdomain)).collect();
            let b_e = DVector::from_fn(n, |i, _| fv.iter().enumerate().map(|(q, v)| v * t[(i, q)]).sum());

            let lu = a_ee.clone().lu();
            let diag = lu.u().diagonal();
            let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
            let ratio = lo / hi;
            if !(ratio > 1e-13) {
                return Err(Error::SingularLocalBlock { element: e, pivot_ratio: ratio });
            }
            let x = lu.solve(&a_ef).expect("nonsingular");
            let y = lu.solve(&b_e).expect("nonsingular");
            Ok(LocalSystem { faces, a_ee, a_ef, b_e, x, y })
        })
        .collect::<Result<Vec<_>>>()?;

    // skeleton pattern: faces sharing an element
    let mut pattern: Vec<Vec<usize>> = vec![Vec::new(); next];
    for loc in &locals {
        for &fa in &loc.faces {
            if let Some(ia) = face_index[fa] {
                pattern[ia].extend(loc.faces.iter().filter_map(|&fb| face_index[fb]));
            }
        }
    }
    let mut builder = BlockBuilder::new(m, pattern);
    let mut rhs = vec![0.0; next * m];

    let contributions: Vec<Vec<(usize, usize, DMatrix<f64>, DVector<f64>)>> = locals
        .par_iter()
        .enumerate()
        .map(|(e, loc)| {
            let kappa = &kappas[e];
            let mut out = Vec::new();
            // A_FE rows and A_FF diagonal blocks for every face of e
            let mut a_fe = DMatrix::zeros(3 * m, n);
            let mut a_ff = Vec::with_capacity(3);
            let mut b_f = DVector::zeros(3 * m);
            for (j, &f) in loc.faces.iter().enumerate() {
                let face = sk.face(f);
                let side = *face.sides().find(|s| s.element == e).unwrap();
                let tau = if side.element == face.left.element { coeffs[f].tau[0] } else { coeffs[f].tau[1] };
                let table = space.face_table(&side);
                let (gx, gy) = space.physical_gradients(e, table);
                let kn = kappa.apply(&face.normal_from(e));
                let q = gx * kn.x + gy * kn.y;
                let phi = &table.values;
                let w: Vec<f64> = edge_w.iter().map(|wq| wq * face.length).collect();
                for l in 0..m {
                    for jj in 0..n {
                        a_fe[(j * m + l, jj)] =
                            w.iter().enumerate().map(|(qq, wq)| wq * psi[(l, qq)] * (q[(jj, qq)] - tau * phi[(jj, qq)])).sum();
                    }
                }
                let mut ff = DMatrix::zeros(m, m);
                for l in 0..m {
                    for mm in 0..m {
                        ff[(l, mm)] = tau * w.iter().enumerate().map(|(qq, wq)| wq * psi[(l, qq)] * psi[(mm, qq)]).sum::<f64>();
                    }
                }
                a_ff.push(ff);
                if face.boundary == Some(BoundaryKind::Neumann) {
                    let (pts, _) = space.face_points(f);
                    let sub = tris[e].subdomain;
                    for l in 0..m {
                        b_f[j * m + l] = -pts
                            .iter()
                            .enumerate()
                            .map(|(qq, p)| w[qq] * psi[(l, qq)] * (problem.bc.neumann)(p, &face.normal, sub))
                            .sum::<f64>();
                    }
                }
            }
            // known Dirichlet traces enter the element right-hand side
            let mut y_eff = loc.y.clone();
            for (j, &f) in loc.faces.iter().enumerate() {
                if face_index[f].is_none() {
                    let g = DVector::from_column_slice(dirichlet.face(f));
                    y_eff -= loc.x.columns(j * m, m) * g;
                }
            }
            let fe_x = &a_fe * &loc.x;
            let fe_y = &a_fe * y_eff;
            for (a, &fa) in loc.faces.iter().enumerate() {
                let Some(ia) = face_index[fa] else { continue };
                let g = b_f.rows(a * m, m) - fe_y.rows(a * m, m);
                for (b, &fb) in loc.faces.iter().enumerate() {
                    let Some(ib) = face_index[fb] else { continue };
                    let mut blk = -fe_x.view((a * m, b * m), (m, m)).clone_owned();
                    if a == b {
                        blk += &a_ff[a];
                    }
                    out.push((ia, ib, blk, if b == a { g.clone_owned() } else { DVector::zeros(0) }));
                }
            }
            out
        })
        .collect();
    for list in contributions {
        for (ia, ib, blk, g) in list {
            builder.add_block(ia, ib, &blk);
            if !g.is_empty() {
                for l in 0..m {
                    rhs[ia * m + l] += g[l];
                }
            }
        }
    }

    Ok(CondensedSystem {
        matrix: builder.finish(),
        rhs,
        face_index,
        dirichlet,
        locals,
        k,
    })
}

/// Element unknowns from the skeleton traces: `u_E = A_EE^{-1}(b_E - A_EF lambda)`.
pub fn recover_element_solution(space: &DgSpace, condensed: &CondensedSystem, lambda: &SkeletonFunction) -> DgFunction {
    let coeffs: Vec<f64> = (0..space.num_elements())
        .into_par_iter()
        .flat_map_iter(|e| {
            let loc = &condensed.locals[e];
            let u = &loc.y - &loc.x * condensed.local_traces(e, lambda);
            u.iter().copied().collect::<Vec<_>>()
        })
        .collect();
    DgFunction::from_vec(space, coeffs).expect("recovered vector has the space dimension")
}

/// Solves the hybrid system and recovers the element unknowns.
pub fn solve_hip(
    space: &DgSpace,
    problem: &Problem,
    eps: f64,
    coeffs: &[FaceCoefficients],
    opts: &SolverOptions,
) -> Result<(DgFunction, SkeletonFunction, SolveReport)> {
    let condensed = assemble_hip(space, problem, eps, coeffs)?;
    let mut opts = opts.clone();
    opts.block_size = space.degree() + 1;
    let (x, report) = solve(&condensed.matrix, &condensed.rhs, &opts)?;
    let lambda = condensed.skeleton_function(&x);
    let u = recover_element_solution(space, &condensed, &lambda);
    Ok((u, lambda, report))
}

/// Numerical traces reconstructed from a broken function.
#[derive(Debug, Clone)]
pub struct Traces {
    /// `u_hat`, projected onto `P_k(F)`.
    pub u_hat: SkeletonFunction,
    /// `sigma_hat . n_left` at the face quadrature points of each face.
    pub flux: Vec<Vec<f64>>,
}

/// Reconstructs `u_hat = {u}_omega - rho1 [kappa grad u] . n` and
/// `sigma_hat . n = -{kappa grad u}^conj . n + rho0 [u] . n` on interior
/// faces. Dirichlet faces use `u_hat = g_D`, `sigma_hat . n = -kappa grad u . n + tau (u - g_D)`;
/// Neumann faces use the prescribed flux.
pub fn reconstruct_traces(
    space: &DgSpace,
    problem: &Problem,
    coeffs: &[FaceCoefficients],
    u: &DgFunction,
) -> Result<Traces> {
    let sk = space.skeleton();
    let kappas = problem.diffusion.element_tensors(space.mesh())?;
    let tris = space.mesh().triangles();
    let k = space.degree();
    let psi = edge_table(space);
    let edge_w = &space.edge_rule().weights;
    let mut u_hat = SkeletonFunction::zeros(k, sk.num_faces());
    let mut flux = Vec::with_capacity(sk.num_faces());
    for (f, face) in sk.faces().iter().enumerate() {
        let c = &coeffs[f];
        let (pts, _) = space.face_points(f);
        let side_data = |side: &crate::mesh::FaceSide| {
            let table = space.face_table(side);
            let (gx, gy) = space.physical_gradients(side.element, table);
            let kn = kappas[side.element].apply(&face.normal);
            let vals = values_at(&table.values, u.block(side.element));
            let dx = values_at(&gx, u.block(side.element));
            let dy = values_at(&gy, u.block(side.element));
            let q: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a * kn.x + b * kn.y).collect();
            (vals, q)
        };
        let (u1, q1) = side_data(&face.left);
        let sub = tris[face.left.element].subdomain;
        let (hat, sig): (Vec<f64>, Vec<f64>) = match (&face.right, face.boundary) {
            (Some(r), _) => {
                let (u2, q2) = side_data(r);
                (0..u1.len())
                    .map(|i| {
                        (
                            c.weighted_mean(u1[i], u2[i]) - c.rho1 * (q1[i] - q2[i]),
                            -c.conj_mean(q1[i], q2[i]) + c.rho0 * (u1[i] - u2[i]),
                        )
                    })
                    .unzip()
            }
            (None, Some(BoundaryKind::Neumann)) => (0..u1.len())
                .map(|i| {
                    let g = (problem.bc.neumann)(&pts[i], &face.normal, sub);
                    (u1[i] - (g + q1[i]) / c.tau[0], g)
                })
                .unzip(),
            (None, _) => (0..u1.len())
                .map(|i| {
                    let g = (problem.bc.dirichlet)(&pts[i], sub);
                    (g, -q1[i] + c.tau[0] * (u1[i] - g))
                })
                .unzip(),
        };
        u_hat.face_mut(f).copy_from_slice(&project_face(&psi, edge_w, &hat));
        flux.push(sig);
    }
    Ok(Traces { u_hat, flux })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{face_coefficients, DiffusionField, PenaltySpec, Scheme, Tensor2};
    use crate::forms::BoundaryData;
    use crate::mesh::{generate_structured, BoundingBox, DiagonalSplit, Partition};
    use std::sync::Arc;

    fn setup(n: usize, k: usize, split: DiagonalSplit) -> (DgSpace, Vec<FaceCoefficients>, DiffusionField) {
        let mesh = generate_structured(n, &BoundingBox::unit_square(), split, Partition::None).unwrap();
        let space = DgSpace::new(mesh, k).unwrap();
        let field = DiffusionField::uniform(Tensor2::new(1.5, 0.3, 0.8).unwrap());
        let c = face_coefficients(space.mesh(), space.skeleton(), &field, &PenaltySpec::new(Scheme::Uip, k)).unwrap();
        (space, c, field)
    }

    #[test]
    fn two_triangles_give_one_face_block() {
        let (space, c, field) = setup(1, 1, DiagonalSplit::Right);
        let problem = Problem::new(field, Arc::new(|_, _| 1.0), BoundaryData::homogeneous());
        let cond = assemble_hip(&space, &problem, 1.0, &c).unwrap();
        assert_eq!(cond.matrix.nrows(), 2);
        assert_eq!(cond.num_unknown_faces(), 1);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let (space, c, field) = setup(3, 2, DiagonalSplit::Alternate);
        let problem = Problem::new(field, Arc::new(|_, _| 0.0), BoundaryData::homogeneous());
        for eps in [-1.0, 0.0, 1.0] {
            let (u, lambda, _) = solve_hip(&space, &problem, eps, &c, &SolverOptions::default()).unwrap();
            assert_eq!(u.max_abs(), 0.0);
            assert_eq!(lambda.max_abs(), 0.0);
        }
    }

    #[test]
    fn symmetric_variant_condenses_to_symmetric_matrix() {
        let (space, c, field) = setup(4, 2, DiagonalSplit::Alternate);
        let problem = Problem::new(field, Arc::new(|_, _| 1.0), BoundaryData::homogeneous());
        let cond = assemble_hip(&space, &problem, 1.0, &c).unwrap();
        assert!(cond.matrix.asymmetry() <= 1e-12);
    }

    #[test]
    fn recovery_satisfies_local_equations() {
        let (space, c, field) = setup(4, 2, DiagonalSplit::Alternate);
        let problem = Problem::new(
            field,
            Arc::new(|p, _| (p.x * 3.0).sin() + p.y),
            BoundaryData::dirichlet(Arc::new(|p, _| p.x * p.y)),
        );
        let cond = assemble_hip(&space, &problem, -1.0, &c).unwrap();
        let (x, _) = solve(&cond.matrix, &cond.rhs, &SolverOptions::default()).unwrap();
        let lambda = cond.skeleton_function(&x);
        let u = recover_element_solution(&space, &cond, &lambda);
        assert!(cond.local_residual(&u, &lambda) <= 1e-11);
    }

    #[test]
    fn singular_local_block_names_element() {
        let (space, _, field) = setup(2, 1, DiagonalSplit::Alternate);
        let mut c = face_coefficients(space.mesh(), space.skeleton(), &field, &PenaltySpec::new(Scheme::Uip, 1)).unwrap();
        // no stabilization at all: the local Neumann-type block has the constants in its kernel
        for coef in c.iter_mut() {
            coef.tau = [0.0, 0.0];
        }
        let problem = Problem::new(field, Arc::new(|_, _| 1.0), BoundaryData::homogeneous());
        match assemble_hip(&space, &problem, 1.0, &c) {
            Err(Error::SingularLocalBlock { element, .. }) => assert_eq!(element, 0),
            other => panic!("expected singular block error, got {other:?}"),
        }
    }

    #[test]
    fn reconstruction_of_smooth_function() {
        let (space, c, field) = setup(3, 2, DiagonalSplit::Alternate);
        let problem = Problem::new(field.clone(), Arc::new(|_, _| 0.0), BoundaryData::dirichlet(Arc::new(|p, _| 1.0 + p.x - p.y)));
        let u = crate::errors::l2_project(&space, &|p: &nalgebra::Point2<f64>, _: u32| 1.0 + p.x - p.y);
        let tr = reconstruct_traces(&space, &problem, &c, &u).unwrap();
        let kappa = field.tensor(0).unwrap();
        for (f, face) in space.skeleton().faces().iter().enumerate() {
            let expected_flux = -kappa.apply(&nalgebra::Vector2::new(1.0, -1.0)).dot(&face.normal);
            for s in &tr.flux[f] {
                assert!((s - expected_flux).abs() < 1e-11);
            }
            for (q, p) in space.edge_rule().points.iter().enumerate() {
                let x = face.point(space.mesh(), p[0]);
                assert!((tr.u_hat.eval(f, p[0]) - (1.0 + x.x - x.y)).abs() < 1e-11, "face {f} q {q}");
            }
        }
    }
}
