//! Galerkin double integrals over triangle pairs.
//!
//! Pairs sharing a vertex, an edge or the whole triangle are integrated with
//! the Sauter-Schwab coordinate transformations on the reference triangle
//! `{0 ≤ x₂ ≤ x₁ ≤ 1}` parametrized by `A + x₁(B − A) + x₂(C − B)`, so the
//! shared vertex is `A` and a shared edge is `AB`. Separated pairs use
//! collapsed Gauss rules whose order drops with the distance ratio.

use serde::{Deserialize, Serialize};

use super::kernel::FOUR_PI_INV;
use crate::error::{Error, Result};
use crate::mesh::{Point, SurfaceMesh};
use crate::quadrature::{gauss_legendre, TriangleRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BemQuadrature {
    /// Gauss points per dimension of the 4D singular rules.
    pub singular_order: usize,
    /// Gauss points per axis for separated pairs, nearest tier first.
    pub regular_orders: Vec<usize>,
    /// Tier boundaries on centroid distance / larger diameter; one fewer
    /// than `regular_orders`.
    pub ratio_thresholds: Vec<f64>,
}

impl Default for BemQuadrature {
    /// Separated pairs are integrated to roughly 1e-9 relative accuracy.
    /// Order 4 singular rules leave ~1e-5 relative error in the double
    /// layer of touching pairs; order 8 brings it to ~1e-8.
    fn default() -> Self {
        Self {
            singular_order: 8,
            regular_orders: vec![12, 8, 7, 6, 5, 4, 3],
            ratio_thresholds: vec![1.0, 1.5, 2.0, 3.0, 6.0, 12.0],
        }
    }
}

impl BemQuadrature {
    /// One rule of `order` points per axis for every separated pair.
    pub fn uniform(singular_order: usize, order: usize) -> Self {
        Self {
            singular_order,
            regular_orders: vec![order],
            ratio_thresholds: vec![],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.singular_order < 2 {
            return Err(Error::Quadrature(format!(
                "singular order {} is below the minimum of 2",
                self.singular_order
            )));
        }
        if self.regular_orders.is_empty() || self.regular_orders.contains(&0) {
            return Err(Error::Quadrature("regular orders must be at least 1".into()));
        }
        if self.singular_order > 40 || self.regular_orders.iter().any(|&q| q > 40) {
            return Err(Error::Quadrature("orders above 40 are not supported".into()));
        }
        let t = &self.ratio_thresholds;
        if t.len() + 1 != self.regular_orders.len() {
            return Err(Error::Quadrature(format!(
                "{} regular orders need {} ratio thresholds, got {}",
                self.regular_orders.len(),
                self.regular_orders.len() - 1,
                t.len()
            )));
        }
        if t.iter().any(|&x| !(x > 0.0 && x.is_finite())) || t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Quadrature(format!(
                "ratio thresholds must be positive and increasing, got {t:?}"
            )));
        }
        Ok(())
    }

    /// Every order doubled; used to check quadrature convergence.
    pub fn doubled(&self) -> Self {
        Self {
            singular_order: 2 * self.singular_order,
            regular_orders: self.regular_orders.iter().map(|q| 2 * q).collect(),
            ratio_thresholds: self.ratio_thresholds.clone(),
        }
    }

    fn tier(&self, ratio: f64) -> usize {
        self.ratio_thresholds
            .iter()
            .position(|&t| ratio < t)
            .unwrap_or(self.ratio_thresholds.len())
    }
}

/// Local integrals of one ordered pair (t, s) with x ∈ t and y ∈ s, against
/// the barycentric coordinates `λ_a(x) λ_b(y)`:
/// `g = ∫∫ G`, `dy = ∫∫ ∂G/∂n_y` (normal of s), `dx = ∫∫ (y − x)·n_t / 4πr³`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PairIntegrals {
    pub g: [[f64; 3]; 3],
    pub dy: [[f64; 3]; 3],
    pub dx: [[f64; 3]; 3],
}

impl PairIntegrals {
    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn add(&mut self, bx: &[f64; 3], by: &[f64; 3], d: &Point, nx: &Point, ny: &Point, w: f64, with_dl: bool) {
        let r2 = d.norm_squared();
        let r = r2.sqrt();
        let gk = w * FOUR_PI_INV / r;
        if with_dl {
            let kdy = gk * d.dot(ny) / r2;
            let kdx = -gk * d.dot(nx) / r2;
            for a in 0..3 {
                for b in 0..3 {
                    let p = bx[a] * by[b];
                    self.g[a][b] += p * gk;
                    self.dy[a][b] += p * kdy;
                    self.dx[a][b] += p * kdx;
                }
            }
        } else {
            for a in 0..3 {
                for b in 0..3 {
                    self.g[a][b] += bx[a] * by[b] * gk;
                }
            }
        }
    }

    pub fn g_total(&self) -> f64 {
        self.g.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PairKind {
    Identical,
    Edge,
    Vertex,
    Separated,
}

/// Reference points `(x̂, ŷ)` and weights (including the transformation
/// Jacobian) of a 4D singular rule.
struct SingularRule {
    x: Vec<[f64; 2]>,
    y: Vec<[f64; 2]>,
    w: Vec<f64>,
}

type Map = fn(f64, f64, f64, f64) -> (f64, [f64; 2], [f64; 2]);

const IDENTICAL: [Map; 6] = [
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1 * e2,
            [s, s * (1.0 - e1 + e1 * e2)],
            [s * (1.0 - e1 * e2 * e3), s * (1.0 - e1)],
        )
    },
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1 * e2,
            [s * (1.0 - e1 * e2 * e3), s * (1.0 - e1)],
            [s, s * (1.0 - e1 + e1 * e2)],
        )
    },
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1 * e2,
            [s, s * e1 * (1.0 - e2 + e2 * e3)],
            [s * (1.0 - e1 * e2), s * e1 * (1.0 - e2)],
        )
    },
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1 * e2,
            [s * (1.0 - e1 * e2), s * e1 * (1.0 - e2)],
            [s, s * e1 * (1.0 - e2 + e2 * e3)],
        )
    },
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1 * e2,
            [s * (1.0 - e1 * e2 * e3), s * e1 * (1.0 - e2 * e3)],
            [s, s * e1 * (1.0 - e2)],
        )
    },
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1 * e2,
            [s, s * e1 * (1.0 - e2)],
            [s * (1.0 - e1 * e2 * e3), s * e1 * (1.0 - e2 * e3)],
        )
    },
];

const EDGE: [Map; 5] = [
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1,
            [s, s * e1 * e3],
            [s * (1.0 - e1 * e2), s * e1 * (1.0 - e2)],
        )
    },
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1 * e2,
            [s, s * e1],
            [s * (1.0 - e1 * e2 * e3), s * e1 * e2 * (1.0 - e3)],
        )
    },
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1 * e2,
            [s * (1.0 - e1 * e2), s * e1 * (1.0 - e2)],
            [s, s * e1 * e2 * e3],
        )
    },
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1 * e2,
            [s * (1.0 - e1 * e2 * e3), s * e1 * e2 * (1.0 - e3)],
            [s, s * e1],
        )
    },
    |s, e1, e2, e3| {
        (
            s * s * s * e1 * e1 * e2,
            [s * (1.0 - e1 * e2 * e3), s * e1 * (1.0 - e2 * e3)],
            [s, s * e1 * e2],
        )
    },
];

const VERTEX: [Map; 2] = [
    |s, e1, e2, e3| (s * s * s * e2, [s, s * e1], [s * e2, s * e2 * e3]),
    |s, e1, e2, e3| (s * s * s * e2, [s * e2, s * e2 * e3], [s, s * e1]),
];

impl SingularRule {
    fn new(maps: &[Map], n: usize) -> Self {
        let (g, gw) = gauss_legendre(n);
        let mut rule = SingularRule {
            x: Vec::new(),
            y: Vec::new(),
            w: Vec::new(),
        };
        for map in maps {
            for (i, &s) in g.iter().enumerate() {
                for (j, &e1) in g.iter().enumerate() {
                    for (k, &e2) in g.iter().enumerate() {
                        for (l, &e3) in g.iter().enumerate() {
                            let (jac, x, y) = map(s, e1, e2, e3);
                            rule.x.push(x);
                            rule.y.push(y);
                            rule.w.push(jac * gw[i] * gw[j] * gw[k] * gw[l]);
                        }
                    }
                }
            }
        }
        rule
    }
}

#[inline]
fn reference_bary(p: &[f64; 2]) -> [f64; 3] {
    [1.0 - p[0], p[0] - p[1], p[1]]
}

/// Per-triangle regular quadrature points for one order.
struct TriangleQuadrature {
    points: Vec<Point>,
    bary: Vec<[f64; 3]>,
    /// Weights scaled by the triangle area.
    weights: Vec<f64>,
}

pub(crate) struct PairIntegrator<'a> {
    surface: &'a SurfaceMesh,
    config: BemQuadrature,
    identical: SingularRule,
    edge: SingularRule,
    vertex: SingularRule,
    /// `regular[tier][triangle]`
    regular: Vec<Vec<TriangleQuadrature>>,
}

impl<'a> PairIntegrator<'a> {
    pub fn new(surface: &'a SurfaceMesh, config: &BemQuadrature) -> Result<Self> {
        config.validate()?;
        let q = config.singular_order;
        let regular = config
            .regular_orders
            .iter()
            .map(|&n| {
                let rule = TriangleRule::with_points_per_axis(n);
                let bary = rule.barycentric();
                (0..surface.n_triangles())
                    .map(|t| TriangleQuadrature {
                        points: bary.iter().map(|b| surface.point(t, b)).collect(),
                        bary: bary.clone(),
                        weights: rule.weights.iter().map(|w| 2.0 * w * surface.areas[t]).collect(),
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            surface,
            config: config.clone(),
            identical: SingularRule::new(&IDENTICAL, q),
            edge: SingularRule::new(&EDGE, q),
            vertex: SingularRule::new(&VERTEX, q),
            regular,
        })
    }

    pub fn classify(&self, t: usize, s: usize) -> (PairKind, [usize; 3], [usize; 3]) {
        let a = self.surface.triangles[t];
        let b = self.surface.triangles[s];
        if t == s {
            return (PairKind::Identical, [0, 1, 2], [0, 1, 2]);
        }
        let mut shared = [(0usize, 0usize); 3];
        let mut n = 0;
        for i in 0..3 {
            for j in 0..3 {
                if a[i] == b[j] {
                    shared[n] = (i, j);
                    n += 1;
                }
            }
        }
        let complete = |first: &[usize]| -> [usize; 3] {
            let mut p = [0; 3];
            p[..first.len()].copy_from_slice(first);
            let mut k = first.len();
            for i in 0..3 {
                if !first.contains(&i) {
                    p[k] = i;
                    k += 1;
                }
            }
            p
        };
        match n {
            0 => (PairKind::Separated, [0, 1, 2], [0, 1, 2]),
            1 => (PairKind::Vertex, complete(&[shared[0].0]), complete(&[shared[0].1])),
            2 => (
                PairKind::Edge,
                complete(&[shared[0].0, shared[1].0]),
                complete(&[shared[0].1, shared[1].1]),
            ),
            _ => panic!("distinct triangles {t} and {s} share all vertices"),
        }
    }

    /// Integrals for x ∈ t, y ∈ s. `with_dl` also computes the double layer
    /// parts.
    pub fn integrate(&self, t: usize, s: usize, with_dl: bool) -> PairIntegrals {
        let (kind, pt, ps) = self.classify(t, s);
        match kind {
            PairKind::Separated => self.regular_pair(t, s, with_dl),
            PairKind::Identical => {
                // flat triangle: (x − y)·n vanishes identically
                let mut out = self.singular_pair(&self.identical, t, s, pt, ps, false);
                // exact symmetry of the coincident single layer block
                for a in 0..3 {
                    for b in 0..a {
                        let m = 0.5 * (out.g[a][b] + out.g[b][a]);
                        out.g[a][b] = m;
                        out.g[b][a] = m;
                    }
                }
                out
            }
            PairKind::Edge => self.singular_pair(&self.edge, t, s, pt, ps, with_dl),
            PairKind::Vertex => self.singular_pair(&self.vertex, t, s, pt, ps, with_dl),
        }
    }

    fn singular_pair(
        &self,
        rule: &SingularRule,
        t: usize,
        s: usize,
        pt: [usize; 3],
        ps: [usize; 3],
        with_dl: bool,
    ) -> PairIntegrals {
        let vt = self.surface.triangle_vertices(t);
        let vs = self.surface.triangle_vertices(s);
        let (nt, ns) = (self.surface.outward_normals[t], self.surface.outward_normals[s]);
        // permuted vertices: A, B, C
        let a_t = vt[pt[0]];
        let (bt, ct) = (vt[pt[1]] - a_t, vt[pt[2]] - a_t);
        let a_s = vs[ps[0]];
        let (bs, cs) = (vs[ps[1]] - a_s, vs[ps[2]] - a_s);
        let shift = a_t - a_s;
        let scale = 4.0 * self.surface.areas[t] * self.surface.areas[s];
        let mut out = PairIntegrals::default();
        for ((x, y), &w) in rule.x.iter().zip(&rule.y).zip(&rule.w) {
            let lx = reference_bary(x);
            let ly = reference_bary(y);
            let d = shift + bt * lx[1] + ct * lx[2] - bs * ly[1] - cs * ly[2];
            let mut bx = [0.0; 3];
            let mut by = [0.0; 3];
            for k in 0..3 {
                bx[pt[k]] = lx[k];
                by[ps[k]] = ly[k];
            }
            out.add(&bx, &by, &d, &nt, &ns, w * scale, with_dl);
        }
        out
    }

    fn regular_pair(&self, t: usize, s: usize, with_dl: bool) -> PairIntegrals {
        let dist = (self.surface.centroid(t) - self.surface.centroid(s)).norm();
        let diam = self.surface.diameters[t].max(self.surface.diameters[s]);
        let tier = self.config.tier(dist / diam);
        let qt = &self.regular[tier][t];
        let qs = &self.regular[tier][s];
        let (nt, ns) = (self.surface.outward_normals[t], self.surface.outward_normals[s]);
        let mut out = PairIntegrals::default();
        for i in 0..qt.points.len() {
            let x = qt.points[i];
            // inner sums over y, weighted by the trial barycentrics
            let mut sg = [0.0; 3];
            let mut sdy = [0.0; 3];
            let mut sdx = [0.0; 3];
            for j in 0..qs.points.len() {
                let d = x - qs.points[j];
                let r2 = d.norm_squared();
                let gk = qs.weights[j] * FOUR_PI_INV / r2.sqrt();
                let by = &qs.bary[j];
                if with_dl {
                    let kdy = gk * d.dot(&ns) / r2;
                    let kdx = -gk * d.dot(&nt) / r2;
                    for b in 0..3 {
                        sg[b] += gk * by[b];
                        sdy[b] += kdy * by[b];
                        sdx[b] += kdx * by[b];
                    }
                } else {
                    for b in 0..3 {
                        sg[b] += gk * by[b];
                    }
                }
            }
            let w = qt.weights[i];
            for a in 0..3 {
                let wa = w * qt.bary[i][a];
                for b in 0..3 {
                    out.g[a][b] += wa * sg[b];
                    out.dy[a][b] += wa * sdy[b];
                    out.dx[a][b] += wa * sdx[b];
                }
            }
        }
        out
    }
}
