//! One-dimensional Gauss-Lobatto-Legendre and Gauss-Legendre rules, Lagrange
//! differentiation and cross-grid interpolation matrices.
//!
//! Nodes are found by Newton iteration on the defining Legendre polynomial,
//! started from Chebyshev points. Legendre values come from the three-term
//! recurrence, which is stable for the orders used here (N up to ~32).

use crate::error::SemError;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    /// Gauss-Lobatto-Legendre: includes both endpoints.
    Gll,
    /// Gauss-Legendre: interior points only.
    Gl,
}

/// A 1D quadrature rule on [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn npts(&self) -> usize {
        self.nodes.len()
    }

    /// Quadrature of a function sampled at the nodes.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Barycentric weights of the node set.
    pub fn barycentric_weights(&self) -> Vec<f64> {
        barycentric_weights(&self.nodes)
    }
}

/// Dense row-major matrix mapping nodal values between 1D grids.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix1D {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl OperatorMatrix1D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &OperatorMatrix1D) -> OperatorMatrix1D {
        assert_eq!(self.cols, other.rows);
        let mut out = OperatorMatrix1D::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> OperatorMatrix1D {
        let mut out = OperatorMatrix1D::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }
}

/// Legendre polynomial L_n and its derivative at x.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        let dp_next = dp_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

/// Gauss-Lobatto-Legendre rule with N+1 points (polynomial order N).
pub fn gll_rule(order: usize) -> Result<QuadratureRule, SemError> {
    if order == 0 {
        return Err(SemError::InvalidOrder { what: "GLL rule", value: 0 });
    }
    let n = order;
    let nf = n as f64;
    let mut nodes = vec![0.0; n + 1];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    // Interior nodes are the roots of L'_N; only the lower half is solved for.
    for j in 1..=(n - 1) / 2 {
        let mut x = -(std::f64::consts::PI * j as f64 / nf).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre(n, x);
            let ddp = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
        nodes[j] = x;
        nodes[n - j] = -x;
    }
    if n % 2 == 0 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre(n, x);
            2.0 / (nf * (nf + 1.0) * p * p)
        })
        .collect();
    Ok(QuadratureRule { kind: RuleKind::Gll, nodes, weights })
}

/// Gauss-Legendre rule with `npts` interior points.
pub fn gl_rule(npts: usize) -> Result<QuadratureRule, SemError> {
    if npts == 0 {
        return Err(SemError::InvalidOrder { what: "GL rule", value: 0 });
    }
    let n = npts;
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    for j in 0..n.div_ceil(2) {
        let mut x = -(std::f64::consts::PI * (2 * j + 1) as f64 / (2.0 * nf)).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
        nodes[j] = x;
        nodes[n - 1 - j] = -x;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (_, dp) = legendre(n, x);
            2.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    Ok(QuadratureRule { kind: RuleKind::Gl, nodes, weights })
}

pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let prod: f64 = (0..nodes.len()).filter(|&k| k != j).map(|k| nodes[j] - nodes[k]).product();
            1.0 / prod
        })
        .collect()
}

/// Entry (i, j) is the derivative of the j-th Lagrange cardinal at node i.
pub fn diff_matrix(rule: &QuadratureRule) -> OperatorMatrix1D {
    let x = &rule.nodes;
    let n = x.len();
    let lam = barycentric_weights(x);
    let mut d = OperatorMatrix1D::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (lam[j] / lam[i]) / (x[i] - x[j]);
                d.set(i, j, v);
                diag -= v;
            }
        }
        d.set(i, i, diag);
    }
    d
}

/// Values of all Lagrange cardinals of `nodes` at the point `y`.
pub fn lagrange_row(nodes: &[f64], bary: &[f64], y: f64) -> Vec<f64> {
    if let Some(hit) = nodes.iter().position(|&x| x == y) {
        let mut row = vec![0.0; nodes.len()];
        row[hit] = 1.0;
        return row;
    }
    let terms: Vec<f64> = nodes.iter().zip(bary).map(|(&x, &l)| l / (y - x)).collect();
    let denom: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / denom).collect()
}

/// Entry (i, j) is the j-th cardinal of `src` evaluated at the i-th node of `dst`.
pub fn interp_matrix(src: &QuadratureRule, dst: &QuadratureRule) -> OperatorMatrix1D {
    interp_matrix_to_points(&src.nodes, &dst.nodes)
}

pub fn interp_matrix_to_points(src_nodes: &[f64], points: &[f64]) -> OperatorMatrix1D {
    let bary = barycentric_weights(src_nodes);
    let mut m = OperatorMatrix1D::zeros(points.len(), src_nodes.len());
    for (i, &y) in points.iter().enumerate() {
        let row = lagrange_row(src_nodes, &bary, y);
        m.data[i * src_nodes.len()..(i + 1) * src_nodes.len()].copy_from_slice(&row);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection root finder, independent of the Newton path.
    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let mut fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fm == 0.0 {
                return m;
            }
            if (fa < 0.0) == (fm < 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    fn roots_by_scan(f: impl Fn(f64) -> f64 + Copy, samples: usize) -> Vec<f64> {
        let mut roots = Vec::new();
        let h = 2.0 / samples as f64;
        for s in 0..samples {
            let a = -1.0 + s as f64 * h + 1e-9;
            let b = a + h;
            if f(a) * f(b) < 0.0 {
                roots.push(bisect(f, a, b));
            }
        }
        roots
    }

    #[test]
    fn gll_order_one_is_trapezoid() {
        let r = gll_rule(1).unwrap();
        assert_eq!(r.nodes, vec![-1.0, 1.0]);
        assert!((r.weights[0] - 1.0).abs() < 1e-15 && (r.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gll_order_two_matches_bisection_oracle() {
        // Interior roots of (1-x^2) L'_2 by bisection: only x = 0.
        let roots = roots_by_scan(|x| legendre(2, x).1, 1001);
        assert_eq!(roots.len(), 1);
        let r = gll_rule(2).unwrap();
        assert!((r.nodes[1] - roots[0]).abs() < 1e-14);
        let expected = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0];
        for (w, e) in r.weights.iter().zip(expected) {
            assert!((w - e).abs() < 1e-14);
        }
    }

    #[test]
    fn gll_interior_nodes_match_bisection_for_many_orders() {
        for n in 2..=20 {
            let r = gll_rule(n).unwrap();
            let roots = roots_by_scan(|x| legendre(n, x).1, 20000);
            assert_eq!(roots.len(), n - 1, "N={n}");
            for (a, b) in r.nodes[1..n].iter().zip(&roots) {
                assert!((a - b).abs() < 1e-12, "N={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn gl_two_points() {
        let roots = roots_by_scan(|x| legendre(2, x).0, 1000);
        let r = gl_rule(2).unwrap();
        assert!((r.nodes[0] + 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((r.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((r.nodes[0] - roots[0]).abs() < 1e-13);
        assert!((r.weights[0] - 1.0).abs() < 1e-14 && (r.weights[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gl_single_point() {
        let r = gl_rule(1).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_orders_rejected() {
        assert!(gll_rule(0).is_err());
        assert!(gl_rule(0).is_err());
    }

    #[test]
    fn second_moment_exact() {
        for n in 2..=24 {
            let r = gll_rule(n).unwrap();
            assert!((r.integrate(|x| x * x) - 2.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rules_are_sorted_and_positive() {
        for n in 1..=30 {
            for r in [gll_rule(n).unwrap(), gl_rule(n).unwrap()] {
                assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
                assert!(r.weights.iter().all(|&w| w > 0.0));
                assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
                assert!(r.nodes.iter().all(|x| x.abs() <= 1.0));
            }
        }
    }

    #[test]
    fn diff_matrix_examples() {
        for n in 1..=16 {
            let r = gll_rule(n).unwrap();
            let d = diff_matrix(&r);
            let ones = vec![1.0; n + 1];
            assert!(d.apply(&ones).iter().all(|v| v.abs() < 1e-12));
            let lin = d.apply(&r.nodes);
            assert!(lin.iter().all(|v| (v - 1.0).abs() < 1e-11), "N={n}");
            let pow: Vec<f64> = r.nodes.iter().map(|x| x.powi(n as i32)).collect();
            let dp = d.apply(&pow);
            for (i, &x) in r.nodes.iter().enumerate() {
                let exact = n as f64 * x.powi(n as i32 - 1);
                assert!((dp[i] - exact).abs() < 1e-12 * (1.0 + exact.abs()) * n as f64, "N={n}");
            }
        }
    }

    #[test]
    fn interp_examples() {
        let gll = gll_rule(4).unwrap();
        let gl = gl_rule(3).unwrap();
        let id = interp_matrix(&gll, &gll);
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id.get(i, j) - e).abs() < 1e-15);
            }
        }
        let m = interp_matrix(&gll, &gl);
        let cube: Vec<f64> = gll.nodes.iter().map(|x| x.powi(3)).collect();
        let out = m.apply(&cube);
        for (o, z) in out.iter().zip(&gl.nodes) {
            assert!((o - z.powi(3)).abs() < 1e-13);
        }
        let c = m.apply(&[2.5; 5]);
        assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-14));
    }
}
