use nalgebra::{DMatrix, Vector2};
use rayon::prelude::*;

use super::space::DgSpace;
use super::{Problem, SchemeSpec};
use crate::coeffs::{face_coefficients, FaceCoefficients, Tensor2};
use crate::error::{Error, Result};
use crate::linalg::{BlockBuilder, SparseMatrix};
use crate::mesh::BoundaryKind;

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Unknowns per element.
    pub block_size: usize,
}

/// The bilinear form split into its building blocks:
/// `A = volume + consistency + eps * consistency^T + penalty - eps * flux_penalty`.
#[derive(Debug, Clone)]
pub struct FormParts {
    pub volume: SparseMatrix,
    pub consistency: SparseMatrix,
    pub penalty: SparseMatrix,
    pub flux_penalty: SparseMatrix,
}

impl FormParts {
    pub fn combine(&self, eps: f64) -> Result<SparseMatrix> {
        self.volume
            .add_scaled(1.0, &self.consistency)?
            .add_scaled(eps, &self.consistency.transpose())?
            .add_scaled(1.0, &self.penalty)?
            .add_scaled(-eps, &self.flux_penalty)
    }
}

/// Basis traces of one side of a face at the face quadrature points:
/// values and normal fluxes `(kappa grad phi) . n_left`, both `N x nq`.
pub(crate) struct SideTrace {
    pub element: usize,
    pub values: DMatrix<f64>,
    pub fluxes: DMatrix<f64>,
}

pub(crate) fn side_trace(space: &DgSpace, kappa: &Tensor2, f: usize, left: bool) -> SideTrace {
    let face = space.skeleton().face(f);
    let side = if left { face.left } else { face.right.expect("interior face") };
    let table = space.face_table(&side);
    let (gx, gy) = space.physical_gradients(side.element, table);
    let kn: Vector2<f64> = kappa.apply(&face.normal);
    SideTrace {
        element: side.element,
        values: table.values.clone(),
        fluxes: gx * kn.x + gy * kn.y,
    }
}

/// `sum_q w_q a_i(q) b_j(q)` for `N x nq` tables.
fn weighted_outer(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut bw = b.clone();
    for (q, wq) in w.iter().enumerate() {
        bw.column_mut(q).scale_mut(*wq);
    }
    a * bw.transpose()
}

pub(crate) fn element_pattern(space: &DgSpace) -> Vec<Vec<usize>> {
    let sk = space.skeleton();
    (0..space.num_elements())
        .map(|e| std::iter::once(e).chain(sk.neighbors(e)).collect())
        .collect()
}

pub(crate) fn volume_block(space: &DgSpace, kappa: &Tensor2, e: usize) -> DMatrix<f64> {
    let (gx, gy) = space.physical_gradients(e, space.volume_table());
    let (_, w) = space.volume_points(e);
    let kgx = &gx * kappa.xx + &gy * kappa.xy;
    let kgy = &gx * kappa.xy + &gy * kappa.yy;
    weighted_outer(&gx, &kgx, &w) + weighted_outer(&gy, &kgy, &w)
}

/// One block of face contributions between test element `test` and trial
/// element `trial`.
struct FaceBlock {
    test: usize,
    trial: usize,
    consistency: DMatrix<f64>,
    penalty: DMatrix<f64>,
    flux_penalty: DMatrix<f64>,
}

fn face_blocks(space: &DgSpace, kappas: &[Tensor2], coeffs: &[FaceCoefficients], f: usize) -> Vec<FaceBlock> {
    let face = space.skeleton().face(f);
    let c = &coeffs[f];
    let (_, w) = space.face_points(f);
    match (face.right, face.boundary) {
        (None, Some(BoundaryKind::Neumann)) => Vec::new(),
        (None, _) => {
            let s = side_trace(space, &kappas[face.left.element], f, true);
            let n = s.values.nrows();
            vec![FaceBlock {
                test: s.element,
                trial: s.element,
                consistency: -weighted_outer(&s.values, &s.fluxes, &w),
                penalty: weighted_outer(&s.values, &s.values, &w) * c.rho0,
                flux_penalty: DMatrix::zeros(n, n),
            }]
        }
        (Some(right), _) => {
            let sides = [
                side_trace(space, &kappas[face.left.element], f, true),
                side_trace(space, &kappas[right.element], f, false),
            ];
            let sign = [1.0, -1.0];
            // conjugate weighted mean: the left trace carries omega_2
            let cw = [c.omega[1], c.omega[0]];
            let mut out = Vec::with_capacity(4);
            for a in 0..2 {
                for b in 0..2 {
                    let sa = sign[a];
                    let sb = sign[b];
                    out.push(FaceBlock {
                        test: sides[a].element,
                        trial: sides[b].element,
                        consistency: -weighted_outer(&sides[a].values, &sides[b].fluxes, &w) * (sa * cw[b]),
                        penalty: weighted_outer(&sides[a].values, &sides[b].values, &w) * (c.rho0 * sa * sb),
                        flux_penalty: weighted_outer(&sides[a].fluxes, &sides[b].fluxes, &w) * (c.rho1 * sa * sb),
                    });
                }
            }
            out
        }
    }
}

fn all_face_blocks(space: &DgSpace, kappas: &[Tensor2], coeffs: &[FaceCoefficients]) -> Vec<Vec<FaceBlock>> {
    (0..space.skeleton().num_faces())
        .into_par_iter()
        .map(|f| face_blocks(space, kappas, coeffs, f))
        .collect()
}

fn check_coeffs(space: &DgSpace, coeffs: &[FaceCoefficients]) -> Result<()> {
    if coeffs.len() != space.skeleton().num_faces() {
        return Err(Error::InvalidArgument(format!(
            "coefficient table has {} entries for {} faces",
            coeffs.len(),
            space.skeleton().num_faces()
        )));
    }
    Ok(())
}

/// Assembles the four building blocks of the bilinear form separately.
pub fn assemble_parts(
    space: &DgSpace,
    diffusion: &crate::coeffs::DiffusionField,
    coeffs: &[FaceCoefficients],
) -> Result<FormParts> {
    check_coeffs(space, coeffs)?;
    let kappas = diffusion.element_tensors(space.mesh())?;
    let n = space.n_loc();
    let pattern = element_pattern(space);
    let mut vol = BlockBuilder::new(n, pattern.clone());
    let mut con = BlockBuilder::new(n, pattern.clone());
    let mut pen = BlockBuilder::new(n, pattern.clone());
    let mut flx = BlockBuilder::new(n, pattern);
    let vblocks: Vec<DMatrix<f64>> = (0..space.num_elements())
        .into_par_iter()
        .map(|e| volume_block(space, &kappas[e], e))
        .collect();
    for (e, b) in vblocks.iter().enumerate() {
        vol.add_block(e, e, b);
    }
    for blocks in all_face_blocks(space, &kappas, coeffs) {
        for b in blocks {
            con.add_block(b.test, b.trial, &b.consistency);
            pen.add_block(b.test, b.trial, &b.penalty);
            flx.add_block(b.test, b.trial, &b.flux_penalty);
        }
    }
    Ok(FormParts {
        volume: vol.finish(),
        consistency: con.finish(),
        penalty: pen.finish(),
        flux_penalty: flx.finish(),
    })
}

/// Right-hand side `(f, v) - <g_N, v>_N - eps <kappa grad v . n, g_D>_D + <rho0 g_D, v>_D`.
pub fn assemble_rhs(space: &DgSpace, problem: &Problem, coeffs: &[FaceCoefficients], eps: f64) -> Result<Vec<f64>> {
    check_coeffs(space, coeffs)?;
    let kappas = problem.diffusion.element_tensors(space.mesh())?;
    let n = space.n_loc();
    let tris = space.mesh().triangles();
    let mut rhs: Vec<f64> = (0..space.num_elements())
        .into_par_iter()
        .flat_map_iter(|e| {
            let (pts, w) = space.volume_points(e);
            let t = &space.volume_table().values;
            let fv: Vec<f64> = pts.iter().zip(&w).map(|(p, wq)| wq * (problem.source)(p, tris[e].subdomain)).collect();
            (0..n).map(move |i| fv.iter().enumerate().map(|(q, v)| v * t[(i, q)]).sum::<f64>())
        })
        .collect();
    let sk = space.skeleton();
    let contributions: Vec<(usize, Vec<f64>)> = sk
        .boundary_faces()
        .par_iter()
        .map(|&f| {
            let face = sk.face(f);
            let e = face.left.element;
            let sub = tris[e].subdomain;
            let (pts, w) = space.face_points(f);
            let mut local = vec![0.0; n];
            match face.boundary {
                Some(BoundaryKind::Neumann) => {
                    let t = &space.face_table(&face.left).values;
                    for (q, p) in pts.iter().enumerate() {
                        let g = (problem.bc.neumann)(p, &face.normal, sub);
                        for (i, li) in local.iter_mut().enumerate() {
                            *li -= w[q] * g * t[(i, q)];
                        }
                    }
                }
                _ => {
                    let s = side_trace(space, &kappas[e], f, true);
                    let rho0 = coeffs[f].rho0;
                    for (q, p) in pts.iter().enumerate() {
                        let g = (problem.bc.dirichlet)(p, sub);
                        for (i, li) in local.iter_mut().enumerate() {
                            *li += w[q] * g * (rho0 * s.values[(i, q)] - eps * s.fluxes[(i, q)]);
                        }
                    }
                }
            }
            (e, local)
        })
        .collect();
    for (e, local) in contributions {
        for (i, v) in local.into_iter().enumerate() {
            rhs[e * n + i] += v;
        }
    }
    Ok(rhs)
}

/// Assembles the system of `spec` with the face coefficient table it implies.
pub fn assemble(space: &DgSpace, problem: &Problem, spec: &SchemeSpec) -> Result<LinearSystem> {
    spec.validate()?;
    if spec.k != space.degree() {
        return Err(Error::InvalidArgument(format!(
            "scheme degree {} does not match space degree {}",
            spec.k,
            space.degree()
        )));
    }
    let coeffs = face_coefficients(space.mesh(), space.skeleton(), &problem.diffusion, &spec.penalty())?;
    assemble_with_coefficients(space, problem, spec.eps(), &coeffs)
}

/// Assembles `A = V + C + eps C^T + P - eps J` and its right-hand side for a
/// given coefficient table.
pub fn assemble_with_coefficients(
    space: &DgSpace,
    problem: &Problem,
    eps: f64,
    coeffs: &[FaceCoefficients],
) -> Result<LinearSystem> {
    check_coeffs(space, coeffs)?;
    let kappas = problem.diffusion.element_tensors(space.mesh())?;
    let n = space.n_loc();
    let mut builder = BlockBuilder::new(n, element_pattern(space));
    let vblocks: Vec<DMatrix<f64>> = (0..space.num_elements())
        .into_par_iter()
        .map(|e| volume_block(space, &kappas[e], e))
        .collect();
    for (e, b) in vblocks.iter().enumerate() {
        builder.add_block(e, e, b);
    }
    for blocks in all_face_blocks(space, &kappas, coeffs) {
        for b in blocks {
            builder.add_block(b.test, b.trial, &(&b.consistency + &b.penalty - &b.flux_penalty * eps));
            if eps != 0.0 {
                builder.add_block(b.trial, b.test, &(b.consistency.transpose() * eps));
            }
        }
    }
    Ok(LinearSystem {
        matrix: builder.finish(),
        rhs: assemble_rhs(space, problem, coeffs, eps)?,
        block_size: n,
    })
}

/// Gram matrix of the energy norm `||kappa^{1/2} grad v||^2 + sum_F rho0 ||[v]||^2`
/// over interior and Dirichlet faces.
pub fn energy_matrix(
    space: &DgSpace,
    diffusion: &crate::coeffs::DiffusionField,
    coeffs: &[FaceCoefficients],
) -> Result<SparseMatrix> {
    check_coeffs(space, coeffs)?;
    let kappas = diffusion.element_tensors(space.mesh())?;
    let n = space.n_loc();
    let mut builder = BlockBuilder::new(n, element_pattern(space));
    for e in 0..space.num_elements() {
        builder.add_block(e, e, &volume_block(space, &kappas[e], e));
    }
    for blocks in all_face_blocks(space, &kappas, coeffs) {
        for b in blocks {
            builder.add_block(b.test, b.trial, &b.penalty);
        }
    }
    Ok(builder.finish())
}
