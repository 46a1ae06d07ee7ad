use super::{Point, TetMesh};
use crate::error::{Error, Result};

/// Structured mesh of the box `[lo, hi]^3`: `n` cells per axis, each cell
/// split into six tetrahedra sharing the cell's main diagonal.
pub fn generate_box_mesh(n: usize, lo: f64, hi: f64) -> Result<TetMesh> {
    box_mesh(n, lo, hi, false)
}

/// With `mirrored`, each cell's diagonal starts at the corner closest to the
/// box centre instead of the lower-left corner. The split stays conforming
/// (orientation along an axis depends only on the cell index along it) and
/// every tetrahedron touches the corner nearest the centre, so none has all
/// four vertices on the boundary.
fn box_mesh(n: usize, lo: f64, hi: f64, mirrored: bool) -> Result<TetMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "number of subdivisions must be at least 1".into(),
        ));
    }
    let np = n + 1;
    let step = (hi - lo) / n as f64;
    let idx = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push(Point::new(
                    lo + step * i as f64,
                    lo + step * j as f64,
                    lo + step * k as f64,
                ));
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let cell = [i, j, k];
                // +1 steps up along an axis, -1 steps down from the upper face
                let dir = cell.map(|c| if mirrored && 2 * c < n { -1i64 } else { 1 });
                let start = [0, 1, 2].map(|a| if dir[a] < 0 { cell[a] + 1 } else { cell[a] });
                for perm in PERMS {
                    let mut c = start;
                    let mut t = [0; 4];
                    t[0] = idx(c[0], c[1], c[2]);
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] = (c[axis] as i64 + dir[axis]) as usize;
                        t[s + 1] = idx(c[0], c[1], c[2]);
                    }
                    tets.push(t);
                }
            }
        }
    }
    TetMesh::new(vertices, tets)
}

/// Unit cube `(0,1)^3` with `6 n^3` tetrahedra.
pub fn generate_cube_mesh(n: usize) -> Result<TetMesh> {
    generate_box_mesh(n, 0.0, 1.0)
}

/// Unit ball: the mesh of `[-1,1]^3` pushed through the radial map
/// `x -> x |x|_inf / |x|_2`, which sends the cube surface onto the unit sphere.
///
/// The cells are split with centre-pointing diagonals. With the plain split,
/// cells along the cube edges contain tetrahedra whose four vertices all land
/// on the sphere; those flatten into slivers as `n` grows and ruin the
/// Nitsche penalty scaling.
pub fn generate_ball_mesh(n: usize) -> Result<TetMesh> {
    let cube = box_mesh(n, -1.0, 1.0, true)?;
    let vertices = cube
        .vertices
        .iter()
        .map(|p| {
            let r2 = p.norm();
            if r2 == 0.0 {
                *p
            } else {
                let rinf = p.x.abs().max(p.y.abs()).max(p.z.abs());
                p * (rinf / r2)
            }
        })
        .collect();
    TetMesh::new(vertices, cube.tets)
}
