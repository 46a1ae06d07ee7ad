//! Tetrahedral volume meshes of the interior domain and the triangulated
//! interface extracted from them.

mod generate;
pub mod gmsh;
mod surface;

use std::collections::HashMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{generate_ball_mesh, generate_box_mesh, generate_cube_mesh};
pub use surface::{extract_boundary, SurfaceMesh};

pub type Point = Vector3<f64>;

/// Local faces of a tetrahedron; face `i` is opposite vertex `i`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryFacet {
    /// Vertex indices ordered so that the right-hand normal points out of the mesh.
    pub vertices: [usize; 3],
    pub tet: usize,
    pub local_face: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TetMesh {
    pub vertices: Vec<Point>,
    pub tets: Vec<[usize; 4]>,
    pub boundary_facets: Vec<BoundaryFacet>,
}

impl TetMesh {
    /// Builds a mesh from raw connectivity. Negatively oriented tetrahedra are
    /// reordered, and the boundary facets are reconstructed from face adjacency.
    pub fn new(vertices: Vec<Point>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        let nv = vertices.len();
        for (k, t) in tets.iter_mut().enumerate() {
            if let Some(&bad) = t.iter().find(|&&v| v >= nv) {
                return Err(Error::Structure(format!(
                    "tet {k} references vertex {bad} but the mesh has {nv} vertices"
                )));
            }
            let vol = signed_volume(&vertices, t);
            if vol.abs() <= f64::EPSILON * 1e-3 {
                return Err(Error::Structure(format!("tet {k} is degenerate")));
            }
            if vol < 0.0 {
                t.swap(2, 3);
            }
        }
        let boundary_facets = find_boundary_facets(&vertices, &tets)?;
        Ok(Self {
            vertices,
            tets,
            boundary_facets,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_vertices(&self, k: usize) -> [Point; 4] {
        let t = self.tets[k];
        [
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
            self.vertices[t[3]],
        ]
    }

    pub fn tet_volume(&self, k: usize) -> f64 {
        signed_volume(&self.vertices, &self.tets[k])
    }

    pub fn volume(&self) -> f64 {
        (0..self.n_tets()).map(|k| self.tet_volume(k)).sum()
    }

    /// Diameter of tet `k`: the largest pairwise vertex distance.
    pub fn tet_diameter(&self, k: usize) -> f64 {
        let p = self.tet_vertices(k);
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                d = d.max((p[i] - p[j]).norm());
            }
        }
        d
    }

    pub fn tet_centroid(&self, k: usize) -> Point {
        let p = self.tet_vertices(k);
        (p[0] + p[1] + p[2] + p[3]) / 4.0
    }

    /// Global edges as sorted vertex pairs, numbered in order of first
    /// appearance when walking the tets.
    pub fn edges(&self) -> (Vec<[usize; 2]>, HashMap<[usize; 2], usize>) {
        let mut list = Vec::new();
        let mut index = HashMap::new();
        for t in &self.tets {
            for (a, b) in TET_EDGES {
                let e = sorted2(t[a], t[b]);
                index.entry(e).or_insert_with(|| {
                    list.push(e);
                    list.len() - 1
                });
            }
        }
        (list, index)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TetMesh = serde_json::from_str(s)?;
        // rebuild derived data rather than trusting the dump
        TetMesh::new(m.vertices, m.tets)
    }
}

/// Local edges of a tetrahedron, in the order used for P2 edge DOFs.
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub(crate) fn sorted2(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

pub(crate) fn signed_volume(vertices: &[Point], t: &[usize; 4]) -> f64 {
    let a = vertices[t[0]];
    let e1 = vertices[t[1]] - a;
    let e2 = vertices[t[2]] - a;
    let e3 = vertices[t[3]] - a;
    e1.dot(&e2.cross(&e3)) / 6.0
}

fn find_boundary_facets(vertices: &[Point], tets: &[[usize; 4]]) -> Result<Vec<BoundaryFacet>> {
    let mut owners: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::new();
    for (k, t) in tets.iter().enumerate() {
        for (f, face) in TET_FACES.iter().enumerate() {
            let key = sorted3([t[face[0]], t[face[1]], t[face[2]]]);
            owners.entry(key).or_default().push((k, f));
        }
    }
    let mut facets = Vec::new();
    for (key, own) in &owners {
        match own.len() {
            1 => {
                let (k, f) = own[0];
                let t = tets[k];
                let face = TET_FACES[f];
                let mut v = [t[face[0]], t[face[1]], t[face[2]]];
                let opposite = vertices[t[f]];
                let n = (vertices[v[1]] - vertices[v[0]]).cross(&(vertices[v[2]] - vertices[v[0]]));
                if n.dot(&(vertices[v[0]] - opposite)) < 0.0 {
                    v.swap(1, 2);
                }
                facets.push(BoundaryFacet {
                    vertices: v,
                    tet: k,
                    local_face: f,
                });
            }
            2 => {}
            n => return Err(Error::Structure(format!("face {key:?} is shared by {n} tetrahedra"))),
        }
    }
    facets.sort_by_key(|f| (f.tet, f.local_face));
    Ok(facets)
}

/// Mesh size `h`: the maximum tet diameter.
pub fn mesh_size(mesh: &TetMesh) -> Result<f64> {
    if mesh.tets.is_empty() {
        return Err(Error::InvalidArgument("mesh has no tetrahedra".into()));
    }
    Ok((0..mesh.n_tets()).map(|k| mesh.tet_diameter(k)).fold(0.0, f64::max))
}
