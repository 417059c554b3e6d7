use std::collections::HashMap;

use nalgebra::{Point2, Vector2};

use super::{edge_key, BoundaryKind, Mesh};
use crate::error::{Error, Result};

/// One element's view of a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceSide {
    pub element: usize,
    /// Local edge `j` runs from local vertex `j` to local vertex `(j + 1) % 3`.
    pub local_edge: usize,
    /// True when the face direction `vertices[0] -> vertices[1]` is opposite
    /// to the element's counterclockwise traversal of that edge.
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Endpoints ordered counterclockwise with respect to the left element.
    pub vertices: [usize; 2],
    pub left: FaceSide,
    pub right: Option<FaceSide>,
    /// Unit normal pointing out of the left element.
    pub normal: Vector2<f64>,
    pub length: f64,
    /// `None` on interior faces.
    pub boundary: Option<BoundaryKind>,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.right.is_some()
    }

    pub fn sides(&self) -> impl Iterator<Item = &FaceSide> {
        std::iter::once(&self.left).chain(self.right.as_ref())
    }

    /// Physical point at parameter `s` in `[0, 1]` along the face.
    pub fn point(&self, mesh: &Mesh, s: f64) -> Point2<f64> {
        let a = mesh.vertices()[self.vertices[0]];
        let b = mesh.vertices()[self.vertices[1]];
        a + (b - a) * s
    }

    /// Outward normal as seen from `element`.
    pub fn normal_from(&self, element: usize) -> Vector2<f64> {
        if self.left.element == element {
            self.normal
        } else {
            -self.normal
        }
    }
}

/// The set of mesh edges with element adjacency.
///
/// Faces are numbered in order of first appearance when walking elements in
/// index order and their local edges in order, so the element with the lower
/// index is always the left side.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    faces: Vec<Face>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    element_faces: Vec<[usize; 3]>,
}

impl Skeleton {
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn interior_faces(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_faces(&self) -> &[usize] {
        &self.boundary
    }

    /// Face indices of element `e`, indexed by local edge.
    pub fn element_faces(&self, e: usize) -> [usize; 3] {
        self.element_faces[e]
    }

    pub fn num_elements(&self) -> usize {
        self.element_faces.len()
    }

    /// Elements adjacent to `e` through an interior face.
    pub fn neighbors(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.element_faces[e].iter().filter_map(move |&f| {
            let face = &self.faces[f];
            face.right.map(|r| if r.element == e { face.left.element } else { r.element })
        })
    }
}

fn on_box_side(mesh: &Mesh, a: &Point2<f64>, b: &Point2<f64>) -> bool {
    let bb = mesh.bbox();
    let tol = 1e-12 * bb.diameter();
    let same = |u: f64, v: f64, w: f64| (u - w).abs() <= tol && (v - w).abs() <= tol;
    same(a.x, b.x, bb.min.x) || same(a.x, b.x, bb.max.x) || same(a.y, b.y, bb.min.y) || same(a.y, b.y, bb.max.y)
}

/// Derives the face skeleton of a conforming mesh.
pub fn build_skeleton(mesh: &Mesh) -> Result<Skeleton> {
    let ne = mesh.num_triangles();
    let mut faces: Vec<Face> = Vec::with_capacity(3 * ne / 2 + 2);
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * ne / 2 + 2);
    let mut element_faces = vec![[usize::MAX; 3]; ne];

    for (e, tri) in mesh.triangles().iter().enumerate() {
        for j in 0..3 {
            let (a, b) = (tri.vertices[j], tri.vertices[(j + 1) % 3]);
            match lookup.get(&edge_key(a, b)) {
                None => {
                    let pa = mesh.vertices()[a];
                    let pb = mesh.vertices()[b];
                    let d = pb - pa;
                    let length = d.norm();
                    lookup.insert(edge_key(a, b), faces.len());
                    element_faces[e][j] = faces.len();
                    faces.push(Face {
                        vertices: [a, b],
                        left: FaceSide {
                            element: e,
                            local_edge: j,
                            reversed: false,
                        },
                        right: None,
                        normal: Vector2::new(d.y, -d.x) / length,
                        length,
                        boundary: None,
                    });
                }
                Some(&f) => {
                    let face = &mut faces[f];
                    if face.right.is_some() {
                        return Err(Error::Topology(format!(
                            "edge ({a}, {b}) is shared by more than two elements (elements {}, {}, {e})",
                            face.left.element,
                            face.right.unwrap().element
                        )));
                    }
                    face.right = Some(FaceSide {
                        element: e,
                        local_edge: j,
                        reversed: face.vertices[0] != a,
                    });
                    element_faces[e][j] = f;
                }
            }
        }
    }

    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for (f, face) in faces.iter_mut().enumerate() {
        if face.right.is_some() {
            let [a, b] = face.vertices;
            if mesh.boundary_overrides().contains_key(&edge_key(a, b)) {
                return Err(Error::Topology(format!(
                    "boundary marker given for interior edge ({a}, {b})"
                )));
            }
            interior.push(f);
        } else {
            let [a, b] = face.vertices;
            if !on_box_side(mesh, &mesh.vertices()[a], &mesh.vertices()[b]) {
                return Err(Error::Topology(format!(
                    "edge ({a}, {b}) has a single incident element but does not lie on the domain boundary \
                     (hanging node or non-conforming mesh)"
                )));
            }
            face.boundary = Some(mesh.boundary_kind(a, b));
            boundary.push(f);
        }
    }
    for (key, _) in mesh.boundary_overrides() {
        if !lookup.contains_key(key) {
            return Err(Error::Topology(format!(
                "boundary marker given for ({}, {}) which is not a mesh edge",
                key.0, key.1
            )));
        }
    }

    Ok(Skeleton {
        faces,
        interior,
        boundary,
        element_faces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, refine_uniform, BoundingBox, DiagonalSplit, Partition, Triangle};

    fn structured(n: usize, split: DiagonalSplit) -> Mesh {
        generate_structured(n, &BoundingBox::unit_square(), split, Partition::None).unwrap()
    }

    #[test]
    fn single_square_counts_and_diagonal_normal() {
        let mesh = structured(1, DiagonalSplit::Right);
        let sk = build_skeleton(&mesh).unwrap();
        assert_eq!(sk.num_faces(), 5);
        assert_eq!(sk.boundary_faces().len(), 4);
        assert_eq!(sk.interior_faces().len(), 1);
        let face = sk.face(sk.interior_faces()[0]);
        assert_eq!(face.left.element, 0);
        // element 0 is the lower-right triangle; its diagonal normal points up-left
        let expected = Vector2::new(-1.0, 1.0) / 2f64.sqrt();
        assert!((face.normal - expected).norm() < 1e-15);
        let c = mesh.centroid(0);
        let mid = face.point(&mesh, 0.5);
        assert!((mid - c).dot(&face.normal) > 0.0);
    }

    #[test]
    fn two_by_two_counts_follow_euler() {
        let mesh = structured(2, DiagonalSplit::Alternate);
        let sk = build_skeleton(&mesh).unwrap();
        // V - E + F = 2 with V = 9 and F = 8 + 1
        assert_eq!(9 - sk.num_faces() as i64 + 9, 2);
        assert_eq!(sk.num_faces(), 16);
        assert_eq!(sk.interior_faces().len(), 8);
        assert_eq!(sk.boundary_faces().len(), 8);
    }

    #[test]
    fn normals_unit_outward_and_polygons_closed() {
        let mesh = refine_uniform(&structured(3, DiagonalSplit::Alternate)).unwrap();
        let sk = build_skeleton(&mesh).unwrap();
        for face in sk.faces() {
            assert!((face.normal.norm() - 1.0).abs() < 1e-14);
            let mid = face.point(&mesh, 0.5);
            for side in face.sides() {
                let n = face.normal_from(side.element);
                assert!((mid - mesh.centroid(side.element)).dot(&n) > 0.0);
            }
            if let Some(r) = face.right {
                assert!(r.reversed);
                assert_eq!(face.normal_from(r.element), -face.normal_from(face.left.element));
                assert!(face.left.element < r.element);
            }
        }
        for e in 0..mesh.num_triangles() {
            let sum: Vector2<f64> = sk
                .element_faces(e)
                .iter()
                .map(|&f| sk.face(f).normal_from(e) * sk.face(f).length)
                .sum();
            assert!(sum.norm() <= 1e-12 * mesh.diameter(e));
        }
    }

    #[test]
    fn deterministic_ordering() {
        let mesh = structured(4, DiagonalSplit::Alternate);
        assert_eq!(build_skeleton(&mesh).unwrap(), build_skeleton(&mesh).unwrap());
    }

    #[test]
    fn rejects_three_elements_on_an_edge() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 1.0),
            Point2::new(0.5, -1.0),
            Point2::new(0.5, 0.5),
        ];
        let tri = |vertices| Triangle { vertices, subdomain: 0 };
        let mesh = Mesh::new(v, vec![tri([0, 1, 2]), tri([1, 0, 3]), tri([0, 1, 4])]).unwrap();
        assert!(matches!(build_skeleton(&mesh), Err(Error::Topology(_))));
    }

    #[test]
    fn rejects_hanging_node() {
        // a unit square with one half split again: vertex 4 hangs on the diagonal
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
        ];
        let tri = |vertices| Triangle { vertices, subdomain: 0 };
        let mesh = Mesh::new(v, vec![tri([0, 1, 2]), tri([0, 4, 3]), tri([4, 2, 3])]).unwrap();
        assert!(matches!(build_skeleton(&mesh), Err(Error::Topology(_))));
    }
}
