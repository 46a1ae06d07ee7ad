//! Gmsh ASCII v2.2 reader and writer.
//!
//! Only linear tetrahedra (type 4) and triangles (type 2) carry data. Point
//! (15) and line (1) elements are skipped. Triangles in the file are checked
//! against the faces of the volume mesh but the boundary is always rebuilt
//! from face adjacency.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{Point, TetMesh, TET_FACES};
use crate::error::{Error, Result};

pub fn import_gmsh(path: impl AsRef<Path>) -> Result<TetMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_gmsh(&text)
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Ok((i + 1, l));
            }
        }
        Err(perr(self.last + 1, "unexpected end of file"))
    }

    fn expect(&mut self, tag: &str) -> Result<()> {
        let (n, l) = self.next_line()?;
        if l != tag {
            return Err(perr(n, format!("expected {tag}, found {l:?}")));
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| perr(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| perr(line, format!("invalid {what}")))
}

pub fn parse_gmsh(text: &str) -> Result<TetMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    lines.expect("$MeshFormat")?;
    let (n, header) = lines.next_line()?;
    let mut tok = header.split_whitespace();
    let version: String = parse_num(tok.next(), n, "format version")?;
    if !version.starts_with("2.") {
        return Err(perr(n, format!("unsupported format version {version}")));
    }
    let file_type: u32 = parse_num(tok.next(), n, "file type")?;
    if file_type != 0 {
        return Err(perr(n, "binary files are not supported"));
    }
    lines.expect("$EndMeshFormat")?;

    // skip optional sections until $Nodes
    let mut nodes_line;
    loop {
        let (n, l) = lines.next_line()?;
        nodes_line = n;
        if l == "$Nodes" {
            break;
        }
        if !l.starts_with('$') || l.starts_with("$End") {
            continue;
        }
        if l == "$Elements" {
            return Err(perr(n, "$Elements section before $Nodes"));
        }
    }
    let (n, l) = lines.next_line()?;
    let count: usize = parse_num(Some(l), n, "node count")?;
    let mut vertices = Vec::with_capacity(count);
    for expected in 1..=count {
        let (n, l) = lines.next_line()?;
        let mut tok = l.split_whitespace();
        let id: usize = parse_num(tok.next(), n, "node id")?;
        if id != expected {
            return Err(perr(
                n,
                format!("node numbering has a gap: missing node {expected} (found {id})"),
            ));
        }
        let x: f64 = parse_num(tok.next(), n, "x coordinate")?;
        let y: f64 = parse_num(tok.next(), n, "y coordinate")?;
        let z: f64 = parse_num(tok.next(), n, "z coordinate")?;
        vertices.push(Point::new(x, y, z));
    }
    lines.expect("$EndNodes").map_err(|e| match e {
        Error::Parse { line, .. } => perr(
            line,
            format!("expected $EndNodes after {count} nodes (section starts at line {nodes_line})"),
        ),
        e => e,
    })?;
    lines.expect("$Elements")?;
    let (n, l) = lines.next_line()?;
    let count: usize = parse_num(Some(l), n, "element count")?;
    let mut tets = Vec::new();
    let mut triangles = Vec::new();
    for _ in 0..count {
        let (n, l) = lines.next_line()?;
        let mut tok = l.split_whitespace();
        let _id: usize = parse_num(tok.next(), n, "element id")?;
        let etype: u32 = parse_num(tok.next(), n, "element type")?;
        let ntags: usize = parse_num(tok.next(), n, "tag count")?;
        for _ in 0..ntags {
            let _: i64 = parse_num(tok.next(), n, "tag")?;
        }
        let nnodes = match etype {
            4 => 4,
            2 => 3,
            1 => 2,
            15 => 1,
            other => return Err(perr(n, format!("unsupported element type {other}"))),
        };
        let mut ids = Vec::with_capacity(nnodes);
        for _ in 0..nnodes {
            let id: usize = parse_num(tok.next(), n, "element node")?;
            if id == 0 || id > vertices.len() {
                return Err(perr(n, format!("element references missing node {id}")));
            }
            ids.push(id - 1);
        }
        match etype {
            4 => tets.push((n, [ids[0], ids[1], ids[2], ids[3]])),
            2 => triangles.push((n, [ids[0], ids[1], ids[2]])),
            _ => {}
        }
    }
    lines.expect("$EndElements")?;
    if tets.is_empty() {
        return Err(perr(lines.last, "file contains no tetrahedra"));
    }
    let mesh = TetMesh::new(vertices, tets.iter().map(|t| t.1).collect())?;

    if !triangles.is_empty() {
        let faces: HashSet<[usize; 3]> = mesh
            .tets
            .iter()
            .flat_map(|t| {
                TET_FACES.iter().map(move |f| {
                    let mut v = [t[f[0]], t[f[1]], t[f[2]]];
                    v.sort_unstable();
                    v
                })
            })
            .collect();
        for (line, mut tri) in triangles {
            tri.sort_unstable();
            if !faces.contains(&tri) {
                return Err(perr(line, "triangle is not a face of any tetrahedron"));
            }
        }
    }
    Ok(mesh)
}

/// Writes the mesh as Gmsh ASCII v2.2 with tets and boundary triangles.
pub fn write_gmsh(mesh: &TetMesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.vertices.len());
    for (i, p) in mesh.vertices.iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e} {:.17e}", i + 1, p.x, p.y, p.z);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "{}", mesh.tets.len() + mesh.boundary_facets.len());
    let mut id = 1;
    for f in &mesh.boundary_facets {
        let v = f.vertices;
        let _ = writeln!(s, "{id} 2 2 1 1 {} {} {}", v[0] + 1, v[1] + 1, v[2] + 1);
        id += 1;
    }
    for t in &mesh.tets {
        let _ = writeln!(s, "{id} 4 2 2 1 {} {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1, t[3] + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}
