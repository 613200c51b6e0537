//! Sum-factorized application of 1D operators to tensor-product nodal arrays.
//!
//! Local arrays are stored with the first reference direction fastest:
//! index = i + n0 * (j + n1 * k). Unused axes have extent 1.

use crate::basis::OperatorMatrix1D;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape(pub [usize; 3]);

impl Shape {
    pub fn cube(n: usize, dim: usize) -> Self {
        let mut s = [1; 3];
        for v in s.iter_mut().take(dim) {
            *v = n;
        }
        Shape(s)
    }

    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_axis(self, axis: usize, n: usize) -> Self {
        let mut s = self.0;
        s[axis] = n;
        Shape(s)
    }

    /// Split into (stride before axis, extent of axis, count after axis).
    #[inline]
    fn split(&self, axis: usize) -> (usize, usize, usize) {
        let pre: usize = self.0[..axis].iter().product();
        let post: usize = self.0[axis + 1..].iter().product();
        (pre, self.0[axis], post)
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let [n0, n1, _] = self.0;
        [idx % n0, (idx / n0) % n1, idx / (n0 * n1)]
    }

    pub fn ravel(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.0[0] * (ijk[1] + self.0[1] * ijk[2])
    }
}

/// `out = A x` along `axis`; `x` has shape `shape`, with `shape[axis] == a.cols`.
pub fn apply_axis(a: &OperatorMatrix1D, x: &[f64], shape: Shape, axis: usize, out: &mut [f64]) {
    let (pre, len, post) = shape.split(axis);
    debug_assert_eq!(len, a.cols);
    debug_assert_eq!(x.len(), shape.len());
    let rows = a.rows;
    debug_assert_eq!(out.len(), pre * rows * post);
    for b in 0..post {
        for r in 0..rows {
            let arow = &a.data[r * len..(r + 1) * len];
            let obase = pre * (r + rows * b);
            for p in 0..pre {
                let mut s = 0.0;
                for (i, &av) in arow.iter().enumerate() {
                    s += av * x[p + pre * (i + len * b)];
                }
                out[obase + p] = s;
            }
        }
    }
}

/// `out = A^T x` along `axis`; `x` has shape `shape`, with `shape[axis] == a.rows`.
pub fn apply_axis_t(a: &OperatorMatrix1D, x: &[f64], shape: Shape, axis: usize, out: &mut [f64]) {
    let (pre, len, post) = shape.split(axis);
    debug_assert_eq!(len, a.rows);
    let cols = a.cols;
    debug_assert_eq!(out.len(), pre * cols * post);
    out.iter_mut().for_each(|v| *v = 0.0);
    for b in 0..post {
        for r in 0..len {
            let arow = &a.data[r * cols..(r + 1) * cols];
            let xbase = pre * (r + len * b);
            for (c, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let obase = pre * (c + cols * b);
                for p in 0..pre {
                    out[obase + p] += av * x[xbase + p];
                }
            }
        }
    }
}

/// Apply one matrix per axis (first `dim` axes). Returns the result and its shape.
pub fn apply_tensor(mats: &[&OperatorMatrix1D], x: &[f64], shape: Shape) -> (Vec<f64>, Shape) {
    let mut cur = x.to_vec();
    let mut cur_shape = shape;
    for (axis, m) in mats.iter().enumerate() {
        let next_shape = cur_shape.with_axis(axis, m.rows);
        let mut next = vec![0.0; next_shape.len()];
        apply_axis(m, &cur, cur_shape, axis, &mut next);
        cur = next;
        cur_shape = next_shape;
    }
    (cur, cur_shape)
}

/// Transpose of [`apply_tensor`]: `shape` is the shape of `x` (the output side).
pub fn apply_tensor_t(mats: &[&OperatorMatrix1D], x: &[f64], shape: Shape) -> (Vec<f64>, Shape) {
    let mut cur = x.to_vec();
    let mut cur_shape = shape;
    for (axis, m) in mats.iter().enumerate().rev() {
        let next_shape = cur_shape.with_axis(axis, m.cols);
        let mut next = vec![0.0; next_shape.len()];
        apply_axis_t(m, &cur, cur_shape, axis, &mut next);
        cur = next;
        cur_shape = next_shape;
    }
    (cur, cur_shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{diff_matrix, gl_rule, gll_rule, interp_matrix};

    #[test]
    fn derivative_along_each_axis_3d() {
        let r = gll_rule(5).unwrap();
        let d = diff_matrix(&r);
        let shape = Shape::cube(6, 3);
        let f = |x: f64, y: f64, z: f64| x * x * y + z.powi(3) * y;
        let mut vals = vec![0.0; shape.len()];
        for idx in 0..shape.len() {
            let [i, j, k] = shape.unravel(idx);
            vals[idx] = f(r.nodes[i], r.nodes[j], r.nodes[k]);
        }
        let mut out = vec![0.0; shape.len()];
        apply_axis(&d, &vals, shape, 2, &mut out);
        for idx in 0..shape.len() {
            let [_, j, k] = shape.unravel(idx);
            let exact = 3.0 * r.nodes[k].powi(2) * r.nodes[j];
            assert!((out[idx] - exact).abs() < 1e-12);
        }
        apply_axis(&d, &vals, shape, 0, &mut out);
        for idx in 0..shape.len() {
            let [i, j, _] = shape.unravel(idx);
            assert!((out[idx] - 2.0 * r.nodes[i] * r.nodes[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let gll = gll_rule(6).unwrap();
        let gl = gl_rule(5).unwrap();
        let m = interp_matrix(&gll, &gl).matmul(&diff_matrix(&gll));
        let id = interp_matrix(&gll, &gl);
        let shape = Shape::cube(7, 2);
        let x: Vec<f64> = (0..shape.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let (ax, ashape) = apply_tensor(&[&m, &id], &x, shape);
        let y: Vec<f64> = (0..ashape.len()).map(|i| ((i * 13) % 7) as f64 * 0.3).collect();
        let (aty, _) = apply_tensor_t(&[&m, &id], &y, ashape);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }
}
