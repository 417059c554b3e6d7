use nalgebra::{Matrix2, Point2, Vector2};

use crate::error::{Error, Result};

/// Affine map from the reference triangle onto a physical triangle,
/// `x = v0 + J xi` with `J = [v1 - v0 | v2 - v0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub origin: Point2<f64>,
    pub jacobian: Matrix2<f64>,
    /// `J^{-T}`, which maps reference gradients to physical gradients.
    pub inv_jacobian_t: Matrix2<f64>,
    pub det: f64,
}

impl AffineMap {
    pub fn new(corners: [Point2<f64>; 3]) -> Result<Self> {
        let [v0, v1, v2] = corners;
        let jacobian = Matrix2::from_columns(&[v1 - v0, v2 - v0]);
        let det = jacobian.determinant();
        let scale = (v1 - v0).norm_squared().max((v2 - v0).norm_squared());
        if det.abs() <= 1e-14 * scale {
            return Err(Error::InvalidArgument(format!("degenerate triangle (det J = {det:e})")));
        }
        let inv = jacobian
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("singular element map".into()))?;
        Ok(Self {
            origin: v0,
            jacobian,
            inv_jacobian_t: inv.transpose(),
            det,
        })
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> Point2<f64> {
        self.origin + self.jacobian * Vector2::new(xi[0], xi[1])
    }

    pub fn to_reference(&self, x: &Point2<f64>) -> [f64; 2] {
        let r = self.inv_jacobian_t.transpose() * (x - self.origin);
        [r.x, r.y]
    }

    pub fn physical_gradient(&self, grad_ref: [f64; 2]) -> Vector2<f64> {
        self.inv_jacobian_t * Vector2::new(grad_ref[0], grad_ref[1])
    }
}

/// Maps reference points onto the triangle with the given corners.
pub fn phys_map(corners: [Point2<f64>; 3], points: &[[f64; 2]]) -> Result<(Vec<Point2<f64>>, AffineMap)> {
    let map = AffineMap::new(corners)?;
    Ok((points.iter().map(|&p| map.to_physical(p)).collect(), map))
}
