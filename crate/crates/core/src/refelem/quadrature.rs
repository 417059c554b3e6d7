//! Gauss rules on the unit edge and collapsed (Stroud conical product) rules
//! on the reference triangle `{(x, y) : x, y >= 0, x + y <= 1}`.
//!
//! Nodes come from the Golub-Welsch eigenvalue problem for the Jacobi
//! recurrence, so any exactness degree up to [`MAX_DEGREE`] is available
//! without tabulated data. All weights are positive and all nodes are
//! interior.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureDomain {
    /// Reference triangle, measure 1/2.
    Triangle,
    /// Unit interval `[0, 1]`, measure 1. Points are stored as `[s, 0]`.
    Edge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub domain: QuadratureDomain,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Polynomials of total degree up to this value are integrated exactly.
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

/// Gauss-Jacobi nodes and weights on `[-1, 1]` for the weight
/// `(1 - t)^a (1 + t)^b`.
pub(crate) fn gauss_jacobi(n: usize, a: u32, b: u32) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (a as f64, b as f64);
    let mut jacobi = DMatrix::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        let s = 2.0 * k + a + b;
        jacobi[(i, i)] = if i == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if i + 1 < n {
            let m = k + 1.0;
            let s = 2.0 * m + a + b;
            let beta = 4.0 * m * (m + a) * (m + b) * (m + a + b) / (s * s * (s + 1.0) * (s - 1.0));
            jacobi[(i, i + 1)] = beta.sqrt();
            jacobi[(i + 1, i)] = beta.sqrt();
        }
    }
    let factorial = |m: f64| (1..=m as u64).map(|v| v as f64).product::<f64>();
    let mu0 = 2f64.powf(a + b + 1.0) * factorial(a) * factorial(b) / factorial(a + b + 1.0);
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.into_iter().unzip()
}

fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Returns a rule for `domain` that is exact at least up to `degree`.
pub fn quadrature(domain: QuadratureDomain, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::QuadratureDegree {
            kind: match domain {
                QuadratureDomain::Triangle => "triangle",
                QuadratureDomain::Edge => "edge",
            },
            degree,
            max: MAX_DEGREE,
        });
    }
    let n = points_for(degree);
    let exactness = 2 * n - 1;
    let (gl_t, gl_w) = gauss_jacobi(n, 0, 0);
    match domain {
        QuadratureDomain::Edge => Ok(QuadratureRule {
            domain,
            points: gl_t.iter().map(|t| [0.5 * (1.0 + t), 0.0]).collect(),
            weights: gl_w.iter().map(|w| 0.5 * w).collect(),
            exactness,
        }),
        QuadratureDomain::Triangle => {
            // y carries the collapsed-coordinate Jacobian (1 - y) in its weight.
            let (gj_t, gj_w) = gauss_jacobi(n, 1, 0);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (ty, wy) in gj_t.iter().zip(&gj_w) {
                let y = 0.5 * (1.0 + ty);
                for (tx, wx) in gl_t.iter().zip(&gl_w) {
                    let s = 0.5 * (1.0 + tx);
                    points.push([s * (1.0 - y), y]);
                    weights.push(0.5 * wx * 0.25 * wy);
                }
            }
            Ok(QuadratureRule {
                domain,
                points,
                weights,
                exactness,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Integral of x^a y^b over the reference triangle.
    fn monomial_triangle(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn centroid_rule() {
        let rule = quadrature(QuadratureDomain::Triangle, 1).unwrap();
        assert_eq!(rule.len(), 1);
        assert_relative_eq!(rule.points[0][0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(rule.points[0][1], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(rule.weights[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn two_point_gauss_on_edge() {
        let rule = quadrature(QuadratureDomain::Edge, 3).unwrap();
        assert_eq!(rule.len(), 2);
        let r = 1.0 / 3f64.sqrt();
        assert_relative_eq!(rule.points[0][0], 0.5 * (1.0 - r), epsilon = 1e-15);
        assert_relative_eq!(rule.points[1][0], 0.5 * (1.0 + r), epsilon = 1e-15);
        assert_relative_eq!(rule.weights[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn every_rule_is_exact_on_monomials() {
        for degree in 0..=MAX_DEGREE {
            let tri = quadrature(QuadratureDomain::Triangle, degree).unwrap();
            assert!(tri.exactness >= degree);
            assert!(tri.weights.iter().all(|&w| w > 0.0));
            assert_relative_eq!(tri.weights.iter().sum::<f64>(), 0.5, epsilon = 1e-14);
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let q = tri.integrate(|[x, y]| x.powi(a as i32) * y.powi(b as i32));
                    let exact = monomial_triangle(a, b);
                    assert!((q - exact).abs() <= 1e-13, "triangle deg {degree}: x^{a} y^{b}: {q} vs {exact}");
                }
            }
            for p in tri.points.iter() {
                assert!(p[0] > 0.0 && p[1] > 0.0 && p[0] + p[1] < 1.0);
            }

            let edge = quadrature(QuadratureDomain::Edge, degree).unwrap();
            assert_relative_eq!(edge.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            for a in 0..=degree as i32 {
                let q = edge.integrate(|[s, _]| s.powi(a));
                assert!((q - 1.0 / (a as f64 + 1.0)).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn rejects_excessive_degree() {
        assert!(matches!(
            quadrature(QuadratureDomain::Triangle, MAX_DEGREE + 1),
            Err(Error::QuadratureDegree { .. })
        ));
    }
}
