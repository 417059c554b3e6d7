use nalgebra::{DMatrix, Point2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::{build_skeleton, FaceSide, Mesh, Skeleton};
use crate::refelem::{edge_point, quadrature, AffineMap, BasisTable, QuadratureDomain, QuadratureRule, ReferenceBasis};

/// Broken polynomial space `P_k` on a mesh, together with the quadrature
/// tables every assembly routine needs.
///
/// Volume and face integrals use rules of degree `2k + 2`. Face tables are
/// stored per (local edge, orientation), so a face quadrature point with
/// parameter `s` along the face direction is seen by both neighbours at the
/// same physical location.
#[derive(Debug, Clone)]
pub struct DgSpace {
    mesh: Mesh,
    skeleton: Skeleton,
    k: usize,
    basis: ReferenceBasis,
    vol_rule: QuadratureRule,
    vol_table: BasisTable,
    edge_rule: QuadratureRule,
    face_tables: Vec<BasisTable>,
    maps: Vec<AffineMap>,
}

impl DgSpace {
    pub fn new(mesh: Mesh, k: usize) -> Result<Self> {
        Self::with_quadrature_degree(mesh, k, 2 * k + 2)
    }

    pub fn with_quadrature_degree(mesh: Mesh, k: usize, degree: usize) -> Result<Self> {
        let basis = ReferenceBasis::new(k)?;
        let skeleton = build_skeleton(&mesh)?;
        let vol_rule = quadrature(QuadratureDomain::Triangle, degree)?;
        let edge_rule = quadrature(QuadratureDomain::Edge, degree)?;
        let vol_table = basis.eval(&vol_rule.points);
        let mut face_tables = Vec::with_capacity(6);
        for j in 0..3 {
            for reversed in [false, true] {
                let pts: Vec<[f64; 2]> = edge_rule
                    .points
                    .iter()
                    .map(|p| edge_point(j, if reversed { 1.0 - p[0] } else { p[0] }))
                    .collect();
                face_tables.push(basis.eval(&pts));
            }
        }
        let maps = (0..mesh.num_triangles())
            .map(|e| {
                AffineMap::new(mesh.corners(e)).map_err(|_| Error::Degenerate {
                    element: e,
                    area: mesh.area(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mesh,
            skeleton,
            k,
            basis,
            vol_rule,
            vol_table,
            edge_rule,
            face_tables,
            maps,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    /// Number of basis functions per element.
    pub fn n_loc(&self) -> usize {
        self.basis.len()
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_triangles()
    }

    pub fn ndof(&self) -> usize {
        self.n_loc() * self.num_elements()
    }

    pub fn volume_rule(&self) -> &QuadratureRule {
        &self.vol_rule
    }

    pub fn volume_table(&self) -> &BasisTable {
        &self.vol_table
    }

    pub fn edge_rule(&self) -> &QuadratureRule {
        &self.edge_rule
    }

    pub fn map(&self, e: usize) -> &AffineMap {
        &self.maps[e]
    }

    /// Basis values and reference gradients at the face quadrature points,
    /// as seen from `side`.
    pub fn face_table(&self, side: &FaceSide) -> &BasisTable {
        &self.face_tables[2 * side.local_edge + side.reversed as usize]
    }

    /// Physical gradients `(d/dx, d/dy)` of the basis of element `e` from a
    /// table of reference gradients.
    pub fn physical_gradients(&self, e: usize, table: &BasisTable) -> (DMatrix<f64>, DMatrix<f64>) {
        let a = self.maps[e].inv_jacobian_t;
        let gx = &table.grad_x * a[(0, 0)] + &table.grad_y * a[(0, 1)];
        let gy = &table.grad_x * a[(1, 0)] + &table.grad_y * a[(1, 1)];
        (gx, gy)
    }

    /// Physical volume quadrature points and weights (including `|det J|`).
    pub fn volume_points(&self, e: usize) -> (Vec<Point2<f64>>, Vec<f64>) {
        let map = &self.maps[e];
        let det = map.det.abs();
        (
            self.vol_rule.points.iter().map(|&p| map.to_physical(p)).collect(),
            self.vol_rule.weights.iter().map(|w| w * det).collect(),
        )
    }

    /// Physical face quadrature points and weights (including `|F|`).
    pub fn face_points(&self, f: usize) -> (Vec<Point2<f64>>, Vec<f64>) {
        let face = self.skeleton.face(f);
        (
            self.edge_rule.points.iter().map(|p| face.point(&self.mesh, p[0])).collect(),
            self.edge_rule.weights.iter().map(|w| w * face.length).collect(),
        )
    }

    /// Value and physical gradient of `u` on element `e` at a reference point.
    pub fn eval(&self, u: &DgFunction, e: usize, xi: [f64; 2]) -> (f64, Vector2<f64>) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (i, c) in u.block(e).iter().enumerate() {
            let (phi, grad) = self.basis.eval_one(i, xi[0], xi[1]);
            v += c * phi;
            g[0] += c * grad[0];
            g[1] += c * grad[1];
        }
        (v, self.maps[e].physical_gradient(g))
    }

    /// Element containing `p` and the reference coordinates of `p` in it.
    pub fn locate(&self, p: &Point2<f64>) -> Option<(usize, [f64; 2])> {
        let tol = 1e-12;
        (0..self.num_elements()).find_map(|e| {
            let r = self.maps[e].to_reference(p);
            (r[0] >= -tol && r[1] >= -tol && r[0] + r[1] <= 1.0 + tol).then_some((e, r))
        })
    }
}

/// Coefficient vector of a broken polynomial, element-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DgFunction {
    k: usize,
    n_loc: usize,
    coeffs: Vec<f64>,
}

impl DgFunction {
    pub fn zeros(space: &DgSpace) -> Self {
        Self {
            k: space.degree(),
            n_loc: space.n_loc(),
            coeffs: vec![0.0; space.ndof()],
        }
    }

    pub fn from_vec(space: &DgSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.ndof() {
            return Err(Error::InvalidArgument(format!(
                "coefficient vector has length {}, space has {} unknowns",
                coeffs.len(),
                space.ndof()
            )));
        }
        if let Some(i) = coeffs.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("coefficient {i} is not finite")));
        }
        Ok(Self {
            k: space.degree(),
            n_loc: space.n_loc(),
            coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn n_loc(&self) -> usize {
        self.n_loc
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn block(&self, e: usize) -> &[f64] {
        &self.coeffs[e * self.n_loc..(e + 1) * self.n_loc]
    }

    pub fn block_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.coeffs[e * self.n_loc..(e + 1) * self.n_loc]
    }

    pub fn num_elements(&self) -> usize {
        self.coeffs.len() / self.n_loc
    }

    /// `self - other`
    pub fn sub(&self, other: &DgFunction) -> DgFunction {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        Self {
            k: self.k,
            n_loc: self.n_loc,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Values of `u` at the rows of `table` on element `e`: `table^T u_e`.
pub(crate) fn values_at(table: &DMatrix<f64>, coeffs: &[f64]) -> Vec<f64> {
    (0..table.ncols())
        .map(|q| coeffs.iter().enumerate().map(|(i, c)| c * table[(i, q)]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, BoundingBox, DiagonalSplit, Partition};
    use approx::assert_relative_eq;

    fn space(n: usize, k: usize) -> DgSpace {
        let mesh = generate_structured(n, &BoundingBox::unit_square(), DiagonalSplit::Alternate, Partition::None).unwrap();
        DgSpace::new(mesh, k).unwrap()
    }

    #[test]
    fn mass_matrix_is_scaled_identity() {
        let s = space(2, 3);
        for e in 0..s.num_elements() {
            let (_, w) = s.volume_points(e);
            let t = &s.volume_table().values;
            for i in 0..s.n_loc() {
                for j in 0..s.n_loc() {
                    let m: f64 = (0..w.len()).map(|q| w[q] * t[(i, q)] * t[(j, q)]).sum();
                    let expected = if i == j { 2.0 * s.mesh().area(e) } else { 0.0 };
                    assert!((m - expected).abs() < 1e-12 * s.mesh().area(e), "e={e} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn face_points_coincide_from_both_sides() {
        let s = space(3, 2);
        for &f in s.skeleton().interior_faces() {
            let face = s.skeleton().face(f);
            let (pts, _) = s.face_points(f);
            for side in face.sides() {
                let table = s.face_table(side);
                // a linear function through the basis: evaluate x via the map
                let map = s.map(side.element);
                for (q, p) in pts.iter().enumerate() {
                    // recover the reference point from the table-independent path
                    let r = map.to_reference(p);
                    let t = crate::refelem::basis_eval(2, &[r]).unwrap();
                    for i in 0..s.n_loc() {
                        assert_relative_eq!(t.values[(i, 0)], table.values[(i, q)], epsilon = 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn locate_finds_containing_element() {
        let s = space(4, 1);
        let p = Point2::new(0.3, 0.71);
        let (e, r) = s.locate(&p).unwrap();
        let back = s.map(e).to_physical(r);
        assert_relative_eq!(back.x, p.x, epsilon = 1e-14);
        assert!(s.locate(&Point2::new(1.5, 0.5)).is_none());
    }
}
