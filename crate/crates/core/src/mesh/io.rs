//! Plain-text mesh format, version 1.
//!
//! ```text
//! UIPDG-MESH 1 [split=<right|left|alternate>]
//! <nv> <nt>
//! x y                      (nv lines)
//! v0 v1 v2 subdomain       (nt lines, 0-based vertex indices)
//! B vA vB D|N              (optional boundary-marker overrides)
//! ```
//!
//! Coordinates are written with 17 significant digits so a write/read round
//! trip reproduces them bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Point2;

use super::{BoundaryKind, DiagonalSplit, Mesh, Triangle};
use crate::error::{Error, Result};

const MAGIC: &str = "UIPDG-MESH";

pub fn write_mesh_string(mesh: &Mesh) -> String {
    let mut out = String::new();
    match mesh.split() {
        Some(split) => writeln!(out, "{MAGIC} 1 split={split}").unwrap(),
        None => writeln!(out, "{MAGIC} 1").unwrap(),
    }
    writeln!(out, "{} {}", mesh.num_vertices(), mesh.num_triangles()).unwrap();
    for p in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e}", p.x, p.y).unwrap();
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.vertices;
        writeln!(out, "{a} {b} {c} {}", t.subdomain).unwrap();
    }
    for (&(a, b), kind) in mesh.boundary_overrides() {
        writeln!(out, "B {a} {b} {}", kind.code()).unwrap();
    }
    out
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    read_mesh_str(&text, path)
}

struct LineParser<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineParser<'a> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: PathBuf::from(self.path),
            line,
            message: message.into(),
        }
    }

    /// Next non-blank line as (1-based line number, tokens).
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.lines.by_ref() {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some((i + 1, tokens));
            }
        }
        None
    }

    fn expect(&mut self, what: &str, last_line: usize) -> Result<(usize, Vec<&'a str>)> {
        self.next()
            .ok_or_else(|| self.err(last_line + 1, format!("unexpected end of file, expected {what}")))
    }

    fn parse<T: std::str::FromStr>(&self, line: usize, token: &str, what: &str) -> Result<T> {
        token
            .parse()
            .map_err(|_| self.err(line, format!("cannot parse {what} from `{token}`")))
    }
}

pub fn read_mesh_str(text: &str, path: impl AsRef<Path>) -> Result<Mesh> {
    let mut p = LineParser {
        path: path.as_ref(),
        lines: text.lines().enumerate(),
    };

    let (line, header) = p.expect("header", 0)?;
    if header.len() < 2 || header[0] != MAGIC || header[1] != "1" {
        return Err(p.err(line, format!("malformed header, expected `{MAGIC} 1`")));
    }
    let mut split = None;
    for token in &header[2..] {
        match token.strip_prefix("split=") {
            Some(rule) => split = Some(rule.parse::<DiagonalSplit>().map_err(|e| p.err(line, e.to_string()))?),
            None => return Err(p.err(line, format!("unknown header field `{token}`"))),
        }
    }

    let (line, counts) = p.expect("vertex and triangle counts", line)?;
    if counts.len() != 2 {
        return Err(p.err(line, "expected `<nv> <nt>`"));
    }
    let nv: usize = p.parse(line, counts[0], "vertex count")?;
    let nt: usize = p.parse(line, counts[1], "triangle count")?;

    let mut last = line;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, tok) = p.expect("vertex coordinates", last)?;
        if tok.len() != 2 {
            return Err(p.err(line, "expected `x y`"));
        }
        vertices.push(Point2::new(p.parse(line, tok[0], "x")?, p.parse(line, tok[1], "y")?));
        last = line;
    }

    let mut triangles = Vec::with_capacity(nt);
    let mut triangle_lines = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, tok) = p.expect("triangle", last)?;
        if tok.len() != 4 {
            return Err(p.err(line, "expected `v0 v1 v2 subdomain`"));
        }
        let mut v = [0usize; 3];
        for (slot, t) in v.iter_mut().zip(&tok[..3]) {
            *slot = p.parse(line, t, "vertex index")?;
            if *slot >= nv {
                return Err(p.err(line, format!("vertex index {slot} out of range (mesh has {nv} vertices)")));
            }
        }
        let subdomain = p.parse(line, tok[3], "subdomain id")?;
        triangles.push(Triangle { vertices: v, subdomain });
        triangle_lines.push(line);
        last = line;
    }

    let mut markers = Vec::new();
    while let Some((line, tok)) = p.next() {
        if tok.len() != 4 || tok[0] != "B" {
            return Err(p.err(line, "expected `B vA vB D|N` or end of file"));
        }
        let a: usize = p.parse(line, tok[1], "vertex index")?;
        let b: usize = p.parse(line, tok[2], "vertex index")?;
        let kind = match tok[3] {
            "D" => BoundaryKind::Dirichlet,
            "N" => BoundaryKind::Neumann,
            other => return Err(p.err(line, format!("unknown boundary marker `{other}`"))),
        };
        markers.push((line, a, b, kind));
    }

    let mut mesh = Mesh::new(vertices, triangles).map_err(|e| match e {
        Error::Degenerate { element, area } => {
            p.err(triangle_lines[element], format!("triangle {element} has non-positive area {area:e}"))
        }
        other => p.err(0, other.to_string()),
    })?;
    mesh.split = split;
    for (line, a, b, kind) in markers {
        mesh.set_boundary_kind(a, b, kind).map_err(|e| p.err(line, e.to_string()))?;
    }
    Ok(mesh)
}
