use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Point, TetMesh};
use crate::error::{Error, Result};

/// Oriented triangulation of the interface. Triangle `i` is boundary facet
/// `i` of the volume mesh it was extracted from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub outward_normals: Vec<Point>,
    /// Triangle diameters h_E (longest edge).
    pub diameters: Vec<f64>,
    pub areas: Vec<f64>,
    /// Surface vertex -> volume vertex.
    pub volume_vertex: Vec<usize>,
}

impl SurfaceMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn centroid(&self, t: usize) -> Point {
        let p = self.triangle_vertices(t);
        (p[0] + p[1] + p[2]) / 3.0
    }

    pub fn area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Point with the given barycentric coordinates in triangle `t`.
    pub fn point(&self, t: usize, bary: &[f64; 3]) -> Point {
        let p = self.triangle_vertices(t);
        p[0] * bary[0] + p[1] * bary[1] + p[2] * bary[2]
    }

    /// Sum of the signed solid angles subtended by all triangles at `x`.
    /// Equals 4π for points enclosed by a closed, outward-oriented surface.
    pub fn solid_angle_sum(&self, x: &Point) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let [a, b, c] = self.triangle_vertices(t);
                triangle_solid_angle(&(a - x), &(b - x), &(c - x))
            })
            .sum()
    }
}

/// Van Oosterom-Strackee solid angle of the triangle (a, b, c) seen from the
/// origin; positive when the right-hand normal points away from the origin.
pub fn triangle_solid_angle(a: &Point, b: &Point, c: &Point) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(c));
    let den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    2.0 * num.atan2(den)
}

/// Extracts the boundary triangulation of `mesh` with outward normals.
///
/// Fails if the boundary is not a closed, consistently oriented 2-manifold.
pub fn extract_boundary(mesh: &TetMesh) -> Result<SurfaceMesh> {
    let mut surface_of = HashMap::new();
    let mut volume_vertex = Vec::new();
    // surface vertices numbered by increasing volume index
    let mut used: Vec<usize> = mesh.boundary_facets.iter().flat_map(|f| f.vertices).collect();
    used.sort_unstable();
    used.dedup();
    for v in used {
        surface_of.insert(v, volume_vertex.len());
        volume_vertex.push(v);
    }
    let vertices: Vec<Point> = volume_vertex.iter().map(|&v| mesh.vertices[v]).collect();
    let triangles: Vec<[usize; 3]> = mesh
        .boundary_facets
        .iter()
        .map(|f| f.vertices.map(|v| surface_of[&v]))
        .collect();

    // every directed edge must be matched by exactly one reversed edge
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in &triangles {
        for i in 0..3 {
            *directed.entry((tri[i], tri[(i + 1) % 3])).or_default() += 1;
        }
    }
    for (&(a, b), &count) in &directed {
        if count != 1 || directed.get(&(b, a)).copied() != Some(1) {
            return Err(Error::Structure(format!(
                "boundary edge ({}, {}) is not shared by exactly two consistently oriented facets",
                volume_vertex[a], volume_vertex[b]
            )));
        }
    }

    let mut outward_normals = Vec::with_capacity(triangles.len());
    let mut diameters = Vec::with_capacity(triangles.len());
    let mut areas = Vec::with_capacity(triangles.len());
    for tri in &triangles {
        let [a, b, c] = tri.map(|v| vertices[v]);
        let n = (b - a).cross(&(c - a));
        let norm = n.norm();
        if norm <= 0.0 {
            return Err(Error::Structure("zero-area boundary facet".into()));
        }
        outward_normals.push(n / norm);
        areas.push(0.5 * norm);
        diameters.push((b - a).norm().max((c - b).norm()).max((a - c).norm()));
    }
    Ok(SurfaceMesh {
        vertices,
        triangles,
        outward_normals,
        diameters,
        areas,
        volume_vertex,
    })
}
