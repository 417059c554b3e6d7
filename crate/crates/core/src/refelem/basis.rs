//! Orthonormal hierarchical (Dubiner) basis on the reference triangle.
//!
//! Each basis function is a Jacobi-polynomial product in collapsed
//! coordinates, expanded once into monomial coefficients so that values and
//! gradients are cheap to evaluate anywhere in the closed triangle,
//! including the collapsed vertex `(0, 1)`.

use nalgebra::DMatrix;

use super::quadrature::{quadrature, QuadratureDomain};
use crate::error::{Error, Result};

pub const MAX_BASIS_DEGREE: usize = 4;

/// Dimension of `P_k` in two variables.
pub fn dim_pk(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Bivariate polynomial with dense monomial coefficients `c[a][b]` of `x^a y^b`.
#[derive(Debug, Clone, PartialEq)]
struct Poly2 {
    degree: usize,
    coeffs: Vec<f64>,
}

impl Poly2 {
    fn zero(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![0.0; (degree + 1) * (degree + 1)],
        }
    }

    fn idx(&self, a: usize, b: usize) -> usize {
        a * (self.degree + 1) + b
    }

    fn get(&self, a: usize, b: usize) -> f64 {
        self.coeffs[self.idx(a, b)]
    }

    fn add_term(&mut self, a: usize, b: usize, c: f64) {
        let i = self.idx(a, b);
        self.coeffs[i] += c;
    }

    fn constant(degree: usize, c: f64) -> Self {
        let mut p = Self::zero(degree);
        p.add_term(0, 0, c);
        p
    }

    /// `cx * x + cy * y + c0`
    fn linear(degree: usize, cx: f64, cy: f64, c0: f64) -> Self {
        let mut p = Self::constant(degree, c0);
        p.add_term(1, 0, cx);
        p.add_term(0, 1, cy);
        p
    }

    fn mul(&self, other: &Poly2) -> Poly2 {
        let mut out = Poly2::zero(self.degree);
        for a in 0..=self.degree {
            for b in 0..=self.degree - a {
                let c = self.get(a, b);
                if c == 0.0 {
                    continue;
                }
                for a2 in 0..=other.degree {
                    for b2 in 0..=other.degree - a2 {
                        let d = other.get(a2, b2);
                        if d != 0.0 {
                            assert!(a + a2 + b + b2 <= self.degree, "polynomial degree overflow");
                            out.add_term(a + a2, b + b2, c * d);
                        }
                    }
                }
            }
        }
        out
    }

    fn scaled_add(&mut self, s: f64, other: &Poly2) {
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += s * y;
        }
    }

    fn pow(&self, n: usize) -> Poly2 {
        (0..n).fold(Poly2::constant(self.degree, 1.0), |acc, _| acc.mul(self))
    }

    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let d = self.degree;
        let mut xp = vec![1.0; d + 1];
        let mut yp = vec![1.0; d + 1];
        for i in 1..=d {
            xp[i] = xp[i - 1] * x;
            yp[i] = yp[i - 1] * y;
        }
        let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for a in 0..=d {
            for b in 0..=d - a {
                let c = self.get(a, b);
                if c == 0.0 {
                    continue;
                }
                v += c * xp[a] * yp[b];
                if a > 0 {
                    gx += c * a as f64 * xp[a - 1] * yp[b];
                }
                if b > 0 {
                    gy += c * b as f64 * xp[a] * yp[b - 1];
                }
            }
        }
        (v, gx, gy)
    }
}

/// Monomial coefficients (in `t`) of the Jacobi polynomial `P_n^(alpha, 0)`.
fn jacobi_coeffs(n: usize, alpha: f64) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    // P_1 = (alpha + 1) + (alpha + 2) (t - 1) / 2
    let mut cur = vec![(alpha + 1.0) - 0.5 * (alpha + 2.0), 0.5 * (alpha + 2.0)];
    for m in 2..=n {
        let m = m as f64;
        let s = 2.0 * m + alpha;
        let c0 = 2.0 * m * (m + alpha) * (s - 2.0);
        let c1 = (s - 1.0) * s * (s - 2.0);
        let c2 = (s - 1.0) * alpha * alpha;
        let c3 = 2.0 * (m + alpha - 1.0) * (m - 1.0) * s;
        let mut next = vec![0.0; cur.len() + 1];
        for (i, &c) in cur.iter().enumerate() {
            next[i + 1] += c1 * c / c0;
            next[i] += c2 * c / c0;
        }
        for (i, &c) in prev.iter().enumerate() {
            next[i] -= c3 * c / c0;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Orthonormal basis of `P_k` on the reference triangle.
///
/// Functions are ordered by total degree, so the first `dim_pk(m)` of them
/// span `P_m` for every `m <= k`. The first function is the constant
/// `sqrt(2)`.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    degree: usize,
    polys: Vec<Poly2>,
}

/// Basis values and reference gradients at a set of points, each stored as
/// an `N_k x n_points` matrix.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub values: DMatrix<f64>,
    pub grad_x: DMatrix<f64>,
    pub grad_y: DMatrix<f64>,
}

impl ReferenceBasis {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_BASIS_DEGREE {
            return Err(Error::UnsupportedDegree(k));
        }
        let rule = quadrature(QuadratureDomain::Triangle, 2 * k)?;
        let mut polys = Vec::with_capacity(dim_pk(k));
        for total in 0..=k {
            for q in 0..=total {
                let p = total - q;
                // P_p(s) (1 - y)^p with s = 2x / (1 - y) - 1
                let legendre = jacobi_coeffs(p, 0.0);
                let s_num = Poly2::linear(k, 2.0, 1.0, -1.0);
                let one_minus_y = Poly2::linear(k, 0.0, -1.0, 1.0);
                let mut radial = Poly2::zero(k);
                for (m, &c) in legendre.iter().enumerate() {
                    radial.scaled_add(c, &s_num.pow(m).mul(&one_minus_y.pow(p - m)));
                }
                // P_q^(2p+1, 0)(2y - 1)
                let jac = jacobi_coeffs(q, (2 * p + 1) as f64);
                let t = Poly2::linear(k, 0.0, 2.0, -1.0);
                let mut vertical = Poly2::zero(k);
                for (m, &c) in jac.iter().enumerate() {
                    vertical.scaled_add(c, &t.pow(m));
                }
                let mut phi = radial.mul(&vertical);
                let norm2 = rule.integrate(|[x, y]| phi.eval(x, y).0.powi(2));
                let scale = 1.0 / norm2.sqrt();
                phi.coeffs.iter_mut().for_each(|c| *c *= scale);
                polys.push(phi);
            }
        }
        Ok(Self { degree: k, polys })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    /// Values and reference gradients of basis function `i` at `(x, y)`.
    pub fn eval_one(&self, i: usize, x: f64, y: f64) -> (f64, [f64; 2]) {
        let (v, gx, gy) = self.polys[i].eval(x, y);
        (v, [gx, gy])
    }

    pub fn eval(&self, points: &[[f64; 2]]) -> BasisTable {
        let n = self.len();
        let mut values = DMatrix::zeros(n, points.len());
        let mut grad_x = DMatrix::zeros(n, points.len());
        let mut grad_y = DMatrix::zeros(n, points.len());
        for (q, p) in points.iter().enumerate() {
            for (i, poly) in self.polys.iter().enumerate() {
                let (v, gx, gy) = poly.eval(p[0], p[1]);
                values[(i, q)] = v;
                grad_x[(i, q)] = gx;
                grad_y[(i, q)] = gy;
            }
        }
        BasisTable { values, grad_x, grad_y }
    }
}

/// Evaluates the degree-`k` basis at points of the closed reference
/// triangle.
pub fn basis_eval(k: usize, points: &[[f64; 2]]) -> Result<BasisTable> {
    let tol = 1e-12;
    if let Some(p) = points
        .iter()
        .find(|p| p[0] < -tol || p[1] < -tol || p[0] + p[1] > 1.0 + tol)
    {
        return Err(Error::InvalidArgument(format!(
            "point ({}, {}) lies outside the reference triangle",
            p[0], p[1]
        )));
    }
    Ok(ReferenceBasis::new(k)?.eval(points))
}

/// Orthonormal Legendre polynomials on `[0, 1]`: `sqrt(2m + 1) P_m(2s - 1)`.
pub fn edge_legendre(k: usize, s: f64) -> Vec<f64> {
    let t = 2.0 * s - 1.0;
    let mut p = Vec::with_capacity(k + 1);
    p.push(1.0);
    if k >= 1 {
        p.push(t);
    }
    for m in 2..=k {
        let m_f = m as f64;
        let next = ((2.0 * m_f - 1.0) * t * p[m - 1] - (m_f - 1.0) * p[m - 2]) / m_f;
        p.push(next);
    }
    p.iter()
        .enumerate()
        .map(|(m, v)| v * (2.0 * m as f64 + 1.0).sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dimensions() {
        assert_eq!(ReferenceBasis::new(1).unwrap().len(), 3);
        assert_eq!(ReferenceBasis::new(3).unwrap().len(), 10);
        for k in 1..=4 {
            assert_eq!(ReferenceBasis::new(k).unwrap().len(), dim_pk(k));
        }
        assert!(matches!(ReferenceBasis::new(0), Err(Error::UnsupportedDegree(0))));
        assert!(matches!(ReferenceBasis::new(5), Err(Error::UnsupportedDegree(5))));
    }

    #[test]
    fn gram_matrix_is_identity() {
        for k in 1..=4 {
            let basis = ReferenceBasis::new(k).unwrap();
            let rule = quadrature(QuadratureDomain::Triangle, 2 * k).unwrap();
            let table = basis.eval(&rule.points);
            for i in 0..basis.len() {
                for j in 0..basis.len() {
                    let g: f64 = (0..rule.len())
                        .map(|q| rule.weights[q] * table.values[(i, q)] * table.values[(j, q)])
                        .sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((g - expected).abs() < 1e-12, "k={k} ({i},{j}): {g}");
                }
            }
        }
    }

    #[test]
    fn hierarchical_and_constant_first() {
        let basis = ReferenceBasis::new(4).unwrap();
        let (v, g) = basis.eval_one(0, 0.2, 0.3);
        assert_relative_eq!(v, 2f64.sqrt(), epsilon = 1e-14);
        assert_eq!(g, [0.0, 0.0]);
        // the first dim_pk(1) functions have constant gradients
        for i in 1..3 {
            let (_, g1) = basis.eval_one(i, 0.1, 0.1);
            let (_, g2) = basis.eval_one(i, 0.6, 0.3);
            assert_relative_eq!(g1[0], g2[0], epsilon = 1e-13);
            assert_relative_eq!(g1[1], g2[1], epsilon = 1e-13);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let step = 1e-6;
        let points = [[0.2, 0.3], [0.1, 0.1], [0.45, 0.45], [0.7, 0.1], [0.05, 0.8]];
        for k in 1..=4 {
            let basis = ReferenceBasis::new(k).unwrap();
            for p in points {
                for i in 0..basis.len() {
                    let (_, g) = basis.eval_one(i, p[0], p[1]);
                    let fx = (basis.eval_one(i, p[0] + step, p[1]).0 - basis.eval_one(i, p[0] - step, p[1]).0)
                        / (2.0 * step);
                    let fy = (basis.eval_one(i, p[0], p[1] + step).0 - basis.eval_one(i, p[0], p[1] - step).0)
                        / (2.0 * step);
                    assert!((g[0] - fx).abs() < 1e-6 * (1.0 + fx.abs()), "k={k} i={i}");
                    assert!((g[1] - fy).abs() < 1e-6 * (1.0 + fy.abs()), "k={k} i={i}");
                }
            }
        }
    }

    #[test]
    fn finite_at_collapsed_vertex() {
        let table = basis_eval(4, &[[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!(table.values.iter().chain(table.grad_x.iter()).chain(table.grad_y.iter()).all(|v| v.is_finite()));
        assert!(basis_eval(2, &[[0.8, 0.8]]).is_err());
    }

    #[test]
    fn edge_legendre_orthonormal() {
        let rule = quadrature(QuadratureDomain::Edge, 8).unwrap();
        for i in 0..=4 {
            for j in 0..=4 {
                let g = rule.integrate(|[s, _]| edge_legendre(4, s)[i] * edge_legendre(4, s)[j]);
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }
}
