//! Reference-triangle machinery: quadrature, orthonormal bases and affine
//! element maps.

mod basis;
mod map;
mod quadrature;

pub use basis::{basis_eval, dim_pk, edge_legendre, BasisTable, ReferenceBasis, MAX_BASIS_DEGREE};
pub use map::{phys_map, AffineMap};
pub use quadrature::{quadrature, QuadratureDomain, QuadratureRule, MAX_DEGREE};

/// Reference coordinates of the point at parameter `s` along local edge
/// `j`, which runs from local vertex `j` to local vertex `(j + 1) % 3`.
pub fn edge_point(local_edge: usize, s: f64) -> [f64; 2] {
    match local_edge {
        0 => [s, 0.0],
        1 => [1.0 - s, s],
        2 => [0.0, 1.0 - s],
        _ => panic!("local edge index {local_edge} out of range"),
    }
}
