//! Gauss rules on the interval, triangle and tetrahedron.
//!
//! Simplex rules are collapsed (Duffy/Stroud conical product) tensor Gauss
//! rules. They are not the most economical rules, but they exist for every
//! degree and all weights are positive.

/// Gauss-Legendre rule with `n` points on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map from [-1, 1] to [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Quadrature on the reference triangle with vertices (0,0), (1,0), (0,1).
/// Weights sum to 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Collapsed rule exact for polynomials of total degree `degree`.
    pub fn with_degree(degree: usize) -> Self {
        Self::with_points_per_axis((degree + 2).div_ceil(2).max(1))
    }

    pub fn with_points_per_axis(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&u, &wu) in x.iter().zip(&w) {
            for (&v, &wv) in x.iter().zip(&w) {
                points.push([u, (1.0 - u) * v]);
                weights.push(wu * wv * (1.0 - u));
            }
        }
        Self { points, weights }
    }

    /// Barycentric coordinates of each point, ordered as (v0, v1, v2).
    pub fn barycentric(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| [1.0 - p[0] - p[1], p[0], p[1]]).collect()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Quadrature on the reference tetrahedron (0,0,0), (1,0,0), (0,1,0), (0,0,1).
/// Weights sum to 1/6.
#[derive(Debug, Clone)]
pub struct TetRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TetRule {
    pub fn with_degree(degree: usize) -> Self {
        let n = (degree + 3).div_ceil(2).max(1);
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for (&a, &wa) in x.iter().zip(&w) {
            for (&b, &wb) in x.iter().zip(&w) {
                for (&c, &wc) in x.iter().zip(&w) {
                    let y = (1.0 - a) * b;
                    let z = (1.0 - a) * (1.0 - b) * c;
                    points.push([a, y, z]);
                    weights.push(wa * wb * wc * (1.0 - a) * (1.0 - a) * (1.0 - b));
                }
            }
        }
        Self { points, weights }
    }

    /// Barycentric coordinates ordered as (v0, v1, v2, v3).
    pub fn barycentric(&self) -> Vec<[f64; 4]> {
        self.points
            .iter()
            .map(|p| [1.0 - p[0] - p[1] - p[2], p[0], p[1], p[2]])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn gauss_legendre_known_nodes() {
        let (x, w) = gauss_legendre(2);
        let r = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - r)).abs() < 1e-15);
        assert!((x[1] - (0.5 + r)).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15);
        let (x, w) = gauss_legendre(1);
        assert_eq!(x, vec![0.5]);
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn gauss_legendre_exact_to_degree() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn triangle_monomials() {
        // int x^a y^b over the reference triangle = a! b! / (a+b+2)!
        for deg in 0..9 {
            let rule = TriangleRule::with_degree(deg);
            for a in 0..=deg {
                let b = deg - a;
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let exact = factorial(a as u32) * factorial(b as u32) / factorial((a + b + 2) as u32);
                assert!((q - exact).abs() < 1e-14, "deg={deg} a={a}");
            }
        }
    }

    #[test]
    fn tet_monomials() {
        // int x^a y^b z^c = a! b! c! / (a+b+c+3)!
        for deg in 0..7 {
            let rule = TetRule::with_degree(deg);
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let c = deg - a - b;
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                        .sum();
                    let exact =
                        factorial(a as u32) * factorial(b as u32) * factorial(c as u32) / factorial((deg + 3) as u32);
                    assert!((q - exact).abs() < 1e-14, "deg={deg} ({a},{b},{c})");
                }
            }
        }
    }
}
