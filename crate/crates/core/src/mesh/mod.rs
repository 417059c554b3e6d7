//! Conforming triangular meshes of rectangular domains.
//!
//! Meshes are immutable once built. Structured meshes split each cell of an
//! `n x n` grid into two triangles; [`refine_uniform`] splits every triangle
//! into four similar children through its edge midpoints, so a refinement
//! sequence is nested and `h` halves exactly at each level.

mod io;
mod skeleton;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_mesh, read_mesh_str, write_mesh, write_mesh_string};
pub use skeleton::{build_skeleton, Face, FaceSide, Skeleton};

/// Subdomain tag carried by every triangle.
pub type SubdomainId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point2<f64>,
    pub max: Point2<f64>,
}

impl BoundingBox {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) || ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "empty or non-finite box [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Self {
            min: Point2::new(xmin, ymin),
            max: Point2::new(xmax, ymax),
        })
    }

    pub fn unit_square() -> Self {
        Self::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diameter(&self) -> f64 {
        (self.max - self.min).norm()
    }

    fn of_points(points: &[Point2<f64>]) -> Option<Self> {
        let first = points.first()?;
        let (mut min, mut max) = (*first, *first);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Some(Self { min, max })
    }
}

/// How each square of a structured grid is cut into two triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DiagonalSplit {
    /// Diagonal from the lower-left to the upper-right corner.
    Right,
    /// Diagonal from the lower-right to the upper-left corner.
    Left,
    /// Checkerboard alternation of `Right` and `Left`.
    #[default]
    Alternate,
}

impl fmt::Display for DiagonalSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagonalSplit::Right => "right",
            DiagonalSplit::Left => "left",
            DiagonalSplit::Alternate => "alternate",
        })
    }
}

impl FromStr for DiagonalSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right" => Ok(DiagonalSplit::Right),
            "left" => Ok(DiagonalSplit::Left),
            "alternate" => Ok(DiagonalSplit::Alternate),
            other => Err(Error::InvalidArgument(format!("unknown diagonal split `{other}`"))),
        }
    }
}

/// Subdomain layout of a structured mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    /// Every triangle gets subdomain 0.
    #[default]
    None,
    /// Four quadrants around the box center, numbered counterclockwise from
    /// the lower-left: 1 = lower-left, 2 = lower-right, 3 = upper-right,
    /// 4 = upper-left.
    Quadrants,
}

impl Partition {
    pub fn classify(&self, bbox: &BoundingBox, p: &Point2<f64>) -> SubdomainId {
        match self {
            Partition::None => 0,
            Partition::Quadrants => {
                let c = bbox.center();
                match (p.x > c.x, p.y > c.y) {
                    (false, false) => 1,
                    (true, false) => 2,
                    (true, true) => 3,
                    (false, true) => 4,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

impl BoundaryKind {
    pub fn code(&self) -> char {
        match self {
            BoundaryKind::Dirichlet => 'D',
            BoundaryKind::Neumann => 'N',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    /// Vertex indices in counterclockwise order.
    pub vertices: [usize; 3],
    pub subdomain: SubdomainId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point2<f64>>,
    triangles: Vec<Triangle>,
    bbox: BoundingBox,
    /// Boundary-condition overrides keyed by the sorted vertex pair of an edge.
    boundary_overrides: BTreeMap<(usize, usize), BoundaryKind>,
    split: Option<DiagonalSplit>,
}

fn signed_area(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh, reorienting clockwise triangles to counterclockwise.
    ///
    /// Rejects out-of-range indices, repeated vertices within a triangle,
    /// (near-)zero areas and duplicate triangles.
    pub fn new(vertices: Vec<Point2<f64>>, triangles: Vec<Triangle>) -> Result<Self> {
        let bbox = BoundingBox::of_points(&vertices)
            .ok_or_else(|| Error::Mesh("mesh has no vertices".into()))?;
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Mesh("non-finite vertex coordinate".into()));
        }
        let area_floor = 1e-14 * bbox.diameter().powi(2);
        let mut seen = HashSet::with_capacity(triangles.len());
        let mut fixed = Vec::with_capacity(triangles.len());
        for (e, t) in triangles.into_iter().enumerate() {
            if let Some(&v) = t.vertices.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!(
                    "triangle {e} references vertex {v} but the mesh has {} vertices",
                    vertices.len()
                )));
            }
            let [a, b, c] = t.vertices;
            if a == b || b == c || a == c {
                return Err(Error::Mesh(format!("triangle {e} repeats a vertex")));
            }
            let area = signed_area(&vertices[a], &vertices[b], &vertices[c]);
            if area.abs() <= area_floor {
                return Err(Error::Degenerate { element: e, area });
            }
            let mut sorted = t.vertices;
            sorted.sort_unstable();
            if !seen.insert(sorted) {
                return Err(Error::Mesh(format!("triangle {e} duplicates an earlier triangle")));
            }
            let vertices = if area < 0.0 { [a, c, b] } else { [a, b, c] };
            fixed.push(Triangle {
                vertices,
                subdomain: t.subdomain,
            });
        }
        if fixed.is_empty() {
            return Err(Error::Mesh("mesh has no triangles".into()));
        }
        Ok(Self {
            vertices,
            triangles: fixed,
            bbox,
            boundary_overrides: BTreeMap::new(),
            split: None,
        })
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    /// Diagonal rule the mesh was generated with, if structured.
    pub fn split(&self) -> Option<DiagonalSplit> {
        self.split
    }

    pub fn corners(&self, e: usize) -> [Point2<f64>; 3] {
        self.triangles[e].vertices.map(|v| self.vertices[v])
    }

    pub fn area(&self, e: usize) -> f64 {
        let [a, b, c] = self.corners(e);
        signed_area(&a, &b, &c)
    }

    /// Element diameter: the longest edge.
    pub fn diameter(&self, e: usize) -> f64 {
        let [a, b, c] = self.corners(e);
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    pub fn centroid(&self, e: usize) -> Point2<f64> {
        let [a, b, c] = self.corners(e);
        Point2::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Global mesh size `max_E h_E`.
    pub fn h_max(&self) -> f64 {
        (0..self.num_triangles()).map(|e| self.diameter(e)).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|e| self.area(e)).sum()
    }

    /// Boundary condition of the edge `(a, b)`; Dirichlet unless overridden.
    pub fn boundary_kind(&self, a: usize, b: usize) -> BoundaryKind {
        self.boundary_overrides
            .get(&edge_key(a, b))
            .copied()
            .unwrap_or(BoundaryKind::Dirichlet)
    }

    pub fn boundary_overrides(&self) -> &BTreeMap<(usize, usize), BoundaryKind> {
        &self.boundary_overrides
    }

    /// Marks the edge `(a, b)`; whether it is really a boundary edge is
    /// checked when the skeleton is built.
    pub fn set_boundary_kind(&mut self, a: usize, b: usize, kind: BoundaryKind) -> Result<()> {
        if a >= self.vertices.len() || b >= self.vertices.len() || a == b {
            return Err(Error::Mesh(format!("invalid boundary edge ({a}, {b})")));
        }
        if kind == BoundaryKind::Dirichlet {
            self.boundary_overrides.remove(&edge_key(a, b));
        } else {
            self.boundary_overrides.insert(edge_key(a, b), kind);
        }
        Ok(())
    }

    /// Marks every boundary edge whose midpoint satisfies `select`.
    pub fn mark_boundary_where(
        &mut self,
        kind: BoundaryKind,
        select: impl Fn(&Point2<f64>) -> bool,
    ) -> Result<usize> {
        let skeleton = build_skeleton(self)?;
        let mut count = 0;
        for &f in skeleton.boundary_faces() {
            let [a, b] = skeleton.face(f).vertices;
            let mid = nalgebra::center(&self.vertices[a], &self.vertices[b]);
            if select(&mid) {
                self.set_boundary_kind(a, b, kind)?;
                count += 1;
            }
        }
        Ok(count)
    }
}

/// Generates an `n x n` structured mesh of `bbox`.
///
/// Vertex `(i, j)` of the grid gets index `j * (n + 1) + i`. With
/// [`Partition::Quadrants`], `n` must be even so that the quadrant
/// interfaces run along element edges.
pub fn generate_structured(
    n: usize,
    bbox: &BoundingBox,
    split: DiagonalSplit,
    partition: Partition,
) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::Config("structured mesh needs n >= 1".into()));
    }
    if partition == Partition::Quadrants && n % 2 != 0 {
        return Err(Error::Config(format!(
            "quadrant partition needs an even number of subdivisions, got n = {n}"
        )));
    }
    let (dx, dy) = (bbox.width() / n as f64, bbox.height() / n as f64);
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // Snap the far edges onto the box exactly.
            let x = if i == n { bbox.max.x } else { bbox.min.x + i as f64 * dx };
            let y = if j == n { bbox.max.y } else { bbox.min.y + j as f64 * dy };
            vertices.push(Point2::new(x, y));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let right = match split {
                DiagonalSplit::Right => true,
                DiagonalSplit::Left => false,
                DiagonalSplit::Alternate => (i + j) % 2 == 0,
            };
            let pair = if right { [[a, b, c], [a, c, d]] } else { [[a, b, d], [b, c, d]] };
            for tri in pair {
                let centroid = Point2::from(
                    (vertices[tri[0]].coords + vertices[tri[1]].coords + vertices[tri[2]].coords) / 3.0,
                );
                triangles.push(Triangle {
                    vertices: tri,
                    subdomain: partition.classify(bbox, &centroid),
                });
            }
        }
    }
    let mut mesh = Mesh::new(vertices, triangles)?;
    mesh.bbox = *bbox;
    mesh.split = Some(split);
    Ok(mesh)
}

/// Splits each triangle into four through its edge midpoints.
///
/// Children inherit the parent's subdomain; boundary overrides are carried
/// to both halves of a split edge.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point2<f64>>| -> usize {
        *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
            vertices.push(nalgebra::center(&vertices[a], &vertices[b]));
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    let mut split_edges = Vec::new();
    for t in &mesh.triangles {
        let [v0, v1, v2] = t.vertices;
        let m01 = midpoint(v0, v1, &mut vertices);
        let m12 = midpoint(v1, v2, &mut vertices);
        let m20 = midpoint(v2, v0, &mut vertices);
        for (a, b, m) in [(v0, v1, m01), (v1, v2, m12), (v2, v0, m20)] {
            if let Some(&kind) = mesh.boundary_overrides.get(&edge_key(a, b)) {
                split_edges.push((a, m, kind));
                split_edges.push((m, b, kind));
            }
        }
        for vertices in [[v0, m01, m20], [m01, v1, m12], [m20, m12, v2], [m01, m12, m20]] {
            triangles.push(Triangle {
                vertices,
                subdomain: t.subdomain,
            });
        }
    }
    let mut refined = Mesh::new(vertices, triangles)?;
    refined.bbox = mesh.bbox;
    refined.split = mesh.split;
    for (a, b, kind) in split_edges {
        refined.boundary_overrides.insert(edge_key(a, b), kind);
    }
    Ok(refined)
}
