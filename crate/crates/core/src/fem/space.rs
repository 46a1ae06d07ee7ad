use std::sync::Arc;

use nalgebra::{DVector, Matrix3};

use crate::error::{Error, Result};
use crate::mesh::{extract_boundary, Point, SurfaceMesh, TetMesh, TET_EDGES};

/// Affine geometry of one tetrahedron.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TetGeometry {
    pub origin: Point,
    pub jacobian: Matrix3<f64>,
    pub volume: f64,
    /// Gradients of the four barycentric coordinates.
    pub grad_bary: [Point; 4],
}

impl TetGeometry {
    pub fn new(p: &[Point; 4]) -> Self {
        let jacobian = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
        let det = jacobian.determinant();
        let inv = jacobian.try_inverse().expect("non-degenerate tet");
        let g1 = inv.row(0).transpose();
        let g2 = inv.row(1).transpose();
        let g3 = inv.row(2).transpose();
        Self {
            origin: p[0],
            jacobian,
            volume: det.abs() / 6.0,
            grad_bary: [-(g1 + g2 + g3), g1, g2, g3],
        }
    }

    pub fn point(&self, bary: &[f64; 4]) -> Point {
        self.origin + self.jacobian * Point::new(bary[1], bary[2], bary[3])
    }
}

/// Continuous Lagrange space of degree 1 or 2 on a tetrahedral mesh.
///
/// P2 local numbering: the four vertices, then the edge midpoints in
/// [`TET_EDGES`] order.
#[derive(Debug, Clone)]
pub struct VolumeSpace {
    mesh: Arc<TetMesh>,
    surface: Arc<SurfaceMesh>,
    degree: usize,
    dof_map: Vec<usize>,
    n_dofs: usize,
    dof_points: Vec<Point>,
    boundary_dofs: Vec<usize>,
}

pub fn build_volume_space(mesh: Arc<TetMesh>, degree: usize) -> Result<VolumeSpace> {
    VolumeSpace::new(mesh, degree)
}

impl VolumeSpace {
    pub fn new(mesh: Arc<TetMesh>, degree: usize) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::Unsupported(format!(
                "volume space degree {degree} (supported: 1, 2)"
            )));
        }
        let surface = Arc::new(extract_boundary(&mesh)?);
        let nv = mesh.n_vertices();
        let mut dof_points = mesh.vertices.clone();
        let n_local = if degree == 1 { 4 } else { 10 };
        let mut dof_map = Vec::with_capacity(n_local * mesh.n_tets());
        let edge_index = if degree == 2 {
            let (edges, index) = mesh.edges();
            for e in &edges {
                dof_points.push((mesh.vertices[e[0]] + mesh.vertices[e[1]]) * 0.5);
            }
            Some(index)
        } else {
            None
        };
        for t in &mesh.tets {
            dof_map.extend_from_slice(t);
            if let Some(index) = &edge_index {
                for (a, b) in TET_EDGES {
                    dof_map.push(nv + index[&crate::mesh::sorted2(t[a], t[b])]);
                }
            }
        }
        let n_dofs = dof_points.len();

        let mut on_boundary = vec![false; n_dofs];
        for &v in &surface.volume_vertex {
            on_boundary[v] = true;
        }
        if let Some(index) = &edge_index {
            for f in &mesh.boundary_facets {
                let v = f.vertices;
                for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                    on_boundary[nv + index[&crate::mesh::sorted2(v[a], v[b])]] = true;
                }
            }
        }
        let boundary_dofs = (0..n_dofs).filter(|&i| on_boundary[i]).collect();
        Ok(Self {
            mesh,
            surface,
            degree,
            dof_map,
            n_dofs,
            dof_points,
            boundary_dofs,
        })
    }

    pub fn mesh(&self) -> &Arc<TetMesh> {
        &self.mesh
    }

    /// The interface triangulation; trace spaces coupled to this volume
    /// space must be built on this exact surface.
    pub fn surface(&self) -> &Arc<SurfaceMesh> {
        &self.surface
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        if self.degree == 1 {
            4
        } else {
            10
        }
    }

    pub fn local_dofs(&self, k: usize) -> &[usize] {
        let n = self.n_local();
        &self.dof_map[n * k..n * (k + 1)]
    }

    pub fn dof_points(&self) -> &[Point] {
        &self.dof_points
    }

    /// DOFs whose Lagrange node lies on the interface.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub(crate) fn geometry(&self, k: usize) -> TetGeometry {
        TetGeometry::new(&self.mesh.tet_vertices(k))
    }

    /// Basis values and gradients at barycentric point `bary`.
    pub(crate) fn eval_basis(&self, geo: &TetGeometry, bary: &[f64; 4], vals: &mut [f64], grads: &mut [Point]) {
        let g = &geo.grad_bary;
        if self.degree == 1 {
            vals[..4].copy_from_slice(bary);
            grads[..4].copy_from_slice(g);
        } else {
            for i in 0..4 {
                vals[i] = bary[i] * (2.0 * bary[i] - 1.0);
                grads[i] = g[i] * (4.0 * bary[i] - 1.0);
            }
            for (e, (a, b)) in TET_EDGES.iter().enumerate() {
                vals[4 + e] = 4.0 * bary[*a] * bary[*b];
                grads[4 + e] = (g[*b] * bary[*a] + g[*a] * bary[*b]) * 4.0;
            }
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: &dyn Fn(&Point) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.n_dofs, self.dof_points.iter().map(f))
    }

    /// Value of the discrete field in tet `k` at barycentric point `bary`.
    pub fn evaluate(&self, coeffs: &DVector<f64>, k: usize, bary: &[f64; 4]) -> f64 {
        let geo = self.geometry(k);
        let mut vals = [0.0; 10];
        let mut grads = [Point::zeros(); 10];
        self.eval_basis(&geo, bary, &mut vals, &mut grads);
        self.local_dofs(k).iter().zip(vals).map(|(&d, v)| coeffs[d] * v).sum()
    }

    /// Barycentric coordinates in the owning tet of a point on boundary
    /// facet `t` given by facet barycentrics.
    pub(crate) fn facet_to_tet_bary(&self, t: usize, bary: &[f64; 3]) -> (usize, [f64; 4]) {
        let f = &self.mesh.boundary_facets[t];
        let tet = self.mesh.tets[f.tet];
        let mut out = [0.0; 4];
        for (a, &v) in f.vertices.iter().enumerate() {
            let local = tet.iter().position(|&w| w == v).expect("facet vertex in owner");
            out[local] = bary[a];
        }
        (f.tet, out)
    }

    /// Trace of the discrete field on surface triangle `t`.
    pub fn evaluate_on_facet(&self, coeffs: &DVector<f64>, t: usize, bary: &[f64; 3]) -> f64 {
        let (k, b) = self.facet_to_tet_bary(t, bary);
        self.evaluate(coeffs, k, &b)
    }

    /// `‖u_h − g‖_{L²(Ω_h)}` with a rule exact for degree `2j + 4`.
    pub fn l2_distance(&self, coeffs: &DVector<f64>, g: &dyn Fn(&Point) -> f64) -> f64 {
        let rule = crate::quadrature::TetRule::with_degree(2 * self.degree + 4);
        let bary = rule.barycentric();
        let mut vals = [0.0; 10];
        let mut grads = [Point::zeros(); 10];
        let mut acc = 0.0;
        for k in 0..self.mesh.n_tets() {
            let geo = self.geometry(k);
            let dofs = self.local_dofs(k);
            for (b, w) in bary.iter().zip(&rule.weights) {
                self.eval_basis(&geo, b, &mut vals, &mut grads);
                let uh: f64 = dofs.iter().zip(&vals).map(|(&d, v)| coeffs[d] * v).sum();
                let d = uh - g(&geo.point(b));
                acc += 6.0 * geo.volume * w * d * d;
            }
        }
        acc.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_cube_mesh;

    fn cube(n: usize) -> Arc<TetMesh> {
        Arc::new(generate_cube_mesh(n).unwrap())
    }

    #[test]
    fn dof_counts() {
        assert_eq!(VolumeSpace::new(cube(1), 1).unwrap().n_dofs(), 8);
        assert_eq!(VolumeSpace::new(cube(2), 1).unwrap().n_dofs(), 27);
        let m = cube(1);
        let (edges, _) = m.edges();
        // vertices plus one node per edge
        assert_eq!(edges.len(), 19);
        assert_eq!(VolumeSpace::new(m, 2).unwrap().n_dofs(), 27);
        assert!(matches!(VolumeSpace::new(cube(1), 3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn boundary_dofs_lie_on_boundary() {
        for j in [1, 2] {
            let sp = VolumeSpace::new(cube(3), j).unwrap();
            let on_face = |p: &Point| p.iter().any(|c| c.abs() < 1e-12 || (c - 1.0).abs() < 1e-12);
            let expected = sp.dof_points().iter().filter(|p| on_face(p)).count();
            assert_eq!(sp.boundary_dofs().len(), expected);
            assert!(sp.boundary_dofs().iter().all(|&d| on_face(&sp.dof_points()[d])));
        }
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let sp = VolumeSpace::new(cube(2), 2).unwrap();
        let f = |p: &Point| p.x * p.y - 2.0 * p.z * p.z + p.x + 0.3;
        let c = sp.interpolate(&f);
        assert!(sp.l2_distance(&c, &f) < 1e-13);
        let sp1 = VolumeSpace::new(cube(2), 1).unwrap();
        let c1 = sp1.interpolate(&f);
        assert!(sp1.l2_distance(&c1, &f) > 1e-3);
    }

    #[test]
    fn facet_trace_matches_volume_values() {
        let sp = VolumeSpace::new(cube(2), 2).unwrap();
        let f = |p: &Point| p.x * p.x + p.y * p.z;
        let c = sp.interpolate(&f);
        let s = sp.surface();
        for t in 0..s.n_triangles() {
            let b = [0.2, 0.3, 0.5];
            assert!((sp.evaluate_on_facet(&c, t, &b) - f(&s.point(t, &b))).abs() < 1e-13);
        }
    }
}
