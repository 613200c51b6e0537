//! Nodal fields. Velocity-like fields are continuous and stored once per
//! global GLL node, component-major (`data[a * n + g]`). Pressure lives on
//! the GL grid of each element and is discontinuous across elements.

use crate::basis::interp_matrix;
use crate::mesh::{GeometryMetrics, Mesh};
use crate::tensor::apply_tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub dim: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(dim: usize, n: usize) -> Self {
        Self { dim, n, data: vec![0.0; dim * n] }
    }

    pub fn zeros_on(mesh: &Mesh) -> Self {
        Self::zeros(mesh.dim(), mesh.nglobal())
    }

    pub fn from_data(dim: usize, data: Vec<f64>) -> Self {
        let n = data.len() / dim;
        Self { dim, n, data }
    }

    /// Sample `f` at the current node positions.
    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut u = Self::zeros_on(mesh);
        for g in 0..u.n {
            let v = f(mesh.node(g));
            for a in 0..u.dim {
                u.data[a * u.n + g] = v[a];
            }
        }
        u
    }

    pub fn comp(&self, a: usize) -> &[f64] {
        &self.data[a * self.n..(a + 1) * self.n]
    }

    pub fn comp_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.data[a * self.n..(a + 1) * self.n]
    }

    pub fn at(&self, g: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (a, x) in v.iter_mut().enumerate().take(self.dim) {
            *x = self.data[a * self.n + g];
        }
        v
    }

    pub fn axpy(&mut self, alpha: f64, x: &VelocityField) {
        axpy(alpha, &x.data, &mut self.data);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PressureField {
    pub npp: usize,
    pub data: Vec<f64>,
}

impl PressureField {
    pub fn zeros_on(mesh: &Mesh) -> Self {
        let npp = mesh.reference.npp();
        Self { npp, data: vec![0.0; npp * mesh.num_elements()] }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 3]) -> f64) -> Self {
        let pts = pressure_points(mesh);
        Self { npp: mesh.reference.npp(), data: pts.into_iter().map(f).collect() }
    }

    /// Integral mean with respect to GL quadrature.
    pub fn mean(&self, metrics: &GeometryMetrics) -> f64 {
        let s: f64 = self.data.iter().zip(&metrics.wdet_gl).map(|(p, w)| p * w).sum();
        s / metrics.wdet_gl.iter().sum::<f64>()
    }

    pub fn remove_mean(&mut self, metrics: &GeometryMetrics) {
        let m = self.mean(metrics);
        self.data.iter_mut().for_each(|p| *p -= m);
    }
}

/// Physical coordinates of every GL pressure node, element by element.
pub fn pressure_points(mesh: &Mesh) -> Vec<[f64; 3]> {
    let r = &mesh.reference;
    let mats: Vec<_> = (0..r.dim).map(|_| &r.gll_to_gl).collect();
    let mut pts = Vec::with_capacity(mesh.num_elements() * r.npp());
    for e in 0..mesh.num_elements() {
        let x = mesh.local_coords(e);
        let xs: Vec<Vec<f64>> = x.iter().map(|xa| apply_tensor(&mats, xa, r.shape_v).0).collect();
        for q in 0..r.npp() {
            let mut p = [0.0; 3];
            for a in 0..r.dim {
                p[a] = xs[a][q];
            }
            pts.push(p);
        }
    }
    pts
}

/// Pressure interpolated to the GLL nodes of each element and averaged over
/// the elements sharing a node (for visualisation).
pub fn pressure_at_nodes(mesh: &Mesh, p: &[f64]) -> Vec<f64> {
    let r = &mesh.reference;
    let to_gll = interp_matrix(&r.gl, &r.gll);
    let mats: Vec<_> = (0..r.dim).map(|_| &to_gll).collect();
    let (npp, npe) = (r.npp(), r.npe());
    let mut local = vec![0.0; npe * mesh.num_elements()];
    for e in 0..mesh.num_elements() {
        let v = apply_tensor(&mats, &p[e * npp..(e + 1) * npp], r.shape_p).0;
        local[e * npe..(e + 1) * npe].copy_from_slice(&v);
    }
    let mut out = vec![0.0; mesh.nglobal()];
    mesh.numbering.scatter_add(&local, &mut out);
    for (o, m) in out.iter_mut().zip(mesh.numbering.multiplicity()) {
        *o /= m;
    }
    out
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
