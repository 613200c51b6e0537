//! Matrix-free spectral element operators on the current geometry.
//!
//! All element kernels are sum-factorized. Element-local results are computed
//! under the configured [`Exec`] policy and then summed into global arrays
//! sequentially in element order, so the output does not depend on the
//! number of workers.
//!
//! Velocity-like vectors are component-major, `[a * nglobal + g]`. Pressure
//! vectors hold `npp` GL values per element.

use crate::basis::OperatorMatrix1D;
use crate::error::Result;
use crate::exec::Exec;
use crate::mesh::{BoundaryTag, GeometryMetrics, Mesh};
use crate::tensor::{apply_axis, apply_axis_t, apply_tensor, apply_tensor_t};

/// Velocity data on Dirichlet faces and the body force per unit mass.
pub trait BoundaryData: Sync {
    fn velocity(&self, id: u32, x: [f64; 3], t: f64) -> [f64; 3];

    fn force(&self, _x: [f64; 3], _t: f64) -> [f64; 3] {
        [0.0; 3]
    }
}

/// Homogeneous data everywhere and no body force.
pub struct NoData;

impl BoundaryData for NoData {
    fn velocity(&self, _id: u32, _x: [f64; 3], _t: f64) -> [f64; 3] {
        [0.0; 3]
    }
}

/// Per global node: which boundary conditions touch it.
#[derive(Clone, Debug)]
pub struct BoundaryNodes {
    /// Data id of the first Dirichlet face (in boundary order) touching the node.
    pub dirichlet: Vec<Option<u32>>,
    pub sigma: Vec<bool>,
    /// Bit `a` set when a free-slip wall normal to axis `a` touches the node.
    pub slip: Vec<u8>,
}

impl BoundaryNodes {
    pub fn new(mesh: &Mesh) -> Self {
        let ng = mesh.nglobal();
        let r = &mesh.reference;
        let mut s = Self { dirichlet: vec![None; ng], sigma: vec![false; ng], slip: vec![0; ng] };
        for bf in &mesh.boundary {
            for l in r.face_nodes(bf.face) {
                let g = mesh.numbering.l2g[bf.element * r.npe() + l];
                match bf.tag {
                    BoundaryTag::Dirichlet(id) => {
                        if s.dirichlet[g].is_none() {
                            s.dirichlet[g] = Some(id);
                        }
                    }
                    BoundaryTag::Sigma => s.sigma[g] = true,
                    BoundaryTag::FreeSlip(axis) => s.slip[g] |= 1 << axis,
                }
            }
        }
        s
    }

    /// 1 for free fluid unknowns, 0 for constrained ones. Dirichlet nodes
    /// lose every component, free-slip nodes their wall-normal component.
    pub fn fluid_mask(&self, dim: usize) -> Vec<f64> {
        let ng = self.sigma.len();
        let mut m = vec![1.0; dim * ng];
        for g in 0..ng {
            for a in 0..dim {
                if self.dirichlet[g].is_some() || self.slip[g] >> a & 1 == 1 {
                    m[a * ng + g] = 0.0;
                }
            }
        }
        m
    }

    /// Mask for the mesh-velocity problem: moving (sigma) boundaries are
    /// also prescribed, since the mesh follows the fluid there.
    pub fn motion_mask(&self, dim: usize) -> Vec<f64> {
        let ng = self.sigma.len();
        let mut m = self.fluid_mask(dim);
        for g in 0..ng {
            if self.sigma[g] {
                for a in 0..dim {
                    m[a * ng + g] = 0.0;
                }
            }
        }
        m
    }

    /// Fluid Dirichlet values at time `t`, zero at all unconstrained entries.
    pub fn fluid_values(&self, mesh: &Mesh, data: &dyn BoundaryData, t: f64) -> Vec<f64> {
        let ng = mesh.nglobal();
        let dim = mesh.dim();
        let mut u = vec![0.0; dim * ng];
        for g in 0..ng {
            if let Some(id) = self.dirichlet[g] {
                let v = data.velocity(id, mesh.node(g), t);
                for a in 0..dim {
                    u[a * ng + g] = v[a];
                }
            }
        }
        u
    }

    pub fn has_sigma(&self) -> bool {
        self.sigma.iter().any(|&s| s)
    }
}

/// Operators bound to one geometry version.
pub struct Operators<'a> {
    pub mesh: &'a Mesh,
    pub metrics: &'a GeometryMetrics,
    pub exec: Exec,
    /// Assembled diagonal mass (GLL weights times det).
    pub mass_diag: Vec<f64>,
}

fn axis_mats<'m>(dim: usize, k: usize, diff: &'m OperatorMatrix1D, interp: &'m OperatorMatrix1D) -> Vec<&'m OperatorMatrix1D> {
    (0..dim).map(|b| if b == k { diff } else { interp }).collect()
}

impl<'a> Operators<'a> {
    pub fn new(mesh: &'a Mesh, metrics: &'a GeometryMetrics, exec: Exec) -> Result<Self> {
        metrics.check_current(mesh)?;
        let mut mass_diag = vec![0.0; mesh.nglobal()];
        mesh.numbering.scatter_add(&metrics.wdet, &mut mass_diag);
        Ok(Self { mesh, metrics, exec, mass_diag })
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn ng(&self) -> usize {
        self.mesh.nglobal()
    }

    pub fn npe(&self) -> usize {
        self.mesh.reference.npe()
    }

    pub fn npp(&self) -> usize {
        self.mesh.reference.npp()
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    fn gather(&self, u: &[f64], comp: usize, e: usize, out: &mut [f64]) {
        let ng = self.ng();
        self.mesh.numbering.gather_element(&u[comp * ng..(comp + 1) * ng], e, out);
    }

    /// Element-local computation of `ncomp` components followed by
    /// sequential direct stiffness summation.
    fn assemble<F>(&self, ncomp: usize, kernel: F) -> Vec<f64>
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let npe = self.npe();
        let ne = self.num_elements();
        let mut local = vec![0.0; ne * ncomp * npe];
        self.exec.for_each_chunk(&mut local, ncomp * npe, kernel);
        let ng = self.ng();
        let l2g = &self.mesh.numbering.l2g;
        let mut out = vec![0.0; ncomp * ng];
        for e in 0..ne {
            for c in 0..ncomp {
                let blk = &local[(e * ncomp + c) * npe..(e * ncomp + c + 1) * npe];
                let ids = &l2g[e * npe..(e + 1) * npe];
                let dst = &mut out[c * ng..(c + 1) * ng];
                for (v, &g) in blk.iter().zip(ids) {
                    dst[g] += v;
                }
            }
        }
        out
    }

    /// Reference derivatives of local data along every axis.
    fn ref_grad(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let r = &self.mesh.reference;
        (0..r.dim)
            .map(|k| {
                let mut o = vec![0.0; x.len()];
                apply_axis(&r.d, x, r.shape_v, k, &mut o);
                o
            })
            .collect()
    }

    /// Apply the diagonal mass matrix to each component of `u`.
    pub fn mass_apply(&self, u: &[f64]) -> Vec<f64> {
        let ng = self.ng();
        u.iter().enumerate().map(|(i, v)| v * self.mass_diag[i % ng]).collect()
    }

    /// Weak stress-form viscous operator: nu * integral of (grad u + grad u^T) : grad v.
    pub fn stiffness_apply(&self, u: &[f64], nu: f64) -> Vec<f64> {
        let dim = self.dim();
        let npe = self.npe();
        let r = &self.mesh.reference;
        let m = self.metrics;
        self.assemble(dim, |e, out| {
            let mut du = Vec::with_capacity(dim);
            let mut loc = vec![0.0; npe];
            for a in 0..dim {
                self.gather(u, a, e, &mut loc);
                du.push(self.ref_grad(&loc));
            }
            // flux[a][k][l]
            let mut flux = vec![vec![vec![0.0; npe]; dim]; dim];
            for l in 0..npe {
                let idx = e * npe + l;
                let mut grad = [[0.0; 3]; 3];
                for a in 0..dim {
                    for b in 0..dim {
                        grad[a][b] = (0..dim).map(|k| m.rx_at(idx, k, b) * du[a][k][l]).sum();
                    }
                }
                let w = nu * m.wdet[idx];
                for a in 0..dim {
                    for k in 0..dim {
                        flux[a][k][l] = w * (0..dim).map(|b| (grad[a][b] + grad[b][a]) * m.rx_at(idx, k, b)).sum::<f64>();
                    }
                }
            }
            let mut tmp = vec![0.0; npe];
            for a in 0..dim {
                let o = &mut out[a * npe..(a + 1) * npe];
                for (k, fk) in flux[a].iter().enumerate() {
                    apply_axis_t(&r.d, fk, r.shape_v, k, &mut tmp);
                    for (x, t) in o.iter_mut().zip(&tmp) {
                        *x += t;
                    }
                }
            }
        })
    }

    /// Weak scalar Laplacian nu * integral of grad s . grad v, applied to every
    /// `nglobal`-sized block of `s`.
    pub fn laplacian_apply(&self, s: &[f64], nu: f64) -> Vec<f64> {
        let dim = self.dim();
        let npe = self.npe();
        let ng = self.ng();
        let ncomp = s.len() / ng;
        let r = &self.mesh.reference;
        let m = self.metrics;
        self.assemble(ncomp, |e, out| {
            let mut loc = vec![0.0; npe];
            let mut tmp = vec![0.0; npe];
            for c in 0..ncomp {
                self.gather(s, c, e, &mut loc);
                let du = self.ref_grad(&loc);
                let mut flux = vec![vec![0.0; npe]; dim];
                for l in 0..npe {
                    let idx = e * npe + l;
                    let mut g = [0.0; 3];
                    for (b, gb) in g.iter_mut().enumerate().take(dim) {
                        *gb = (0..dim).map(|k| m.rx_at(idx, k, b) * du[k][l]).sum();
                    }
                    for (k, fk) in flux.iter_mut().enumerate() {
                        fk[l] = nu * m.wdet[idx] * (0..dim).map(|b| g[b] * m.rx_at(idx, k, b)).sum::<f64>();
                    }
                }
                let o = &mut out[c * npe..(c + 1) * npe];
                for (k, fk) in flux.iter().enumerate() {
                    apply_axis_t(&r.d, fk, r.shape_v, k, &mut tmp);
                    for (x, t) in o.iter_mut().zip(&tmp) {
                        *x += t;
                    }
                }
            }
        })
    }

    /// Weak divergence on the GL grid: entry q is -integral of phi_q div u.
    pub fn divergence_apply(&self, u: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let npe = self.npe();
        let npp = self.npp();
        let r = &self.mesh.reference;
        let m = self.metrics;
        let mut out = vec![0.0; self.num_elements() * npp];
        self.exec.for_each_chunk(&mut out, npp, |e, o| {
            let mut loc = vec![0.0; npe];
            let mut div = vec![0.0; npp];
            for a in 0..dim {
                self.gather(u, a, e, &mut loc);
                for k in 0..dim {
                    let mats = axis_mats(dim, k, &r.d_gl, &r.gll_to_gl);
                    let (v, _) = apply_tensor(&mats, &loc, r.shape_v);
                    for q in 0..npp {
                        div[q] += m.rx_gl_at(e * npp + q, k, a) * v[q];
                    }
                }
            }
            for q in 0..npp {
                o[q] = -m.wdet_gl[e * npp + q] * div[q];
            }
        });
        out
    }

    /// Exact transpose of [`Self::divergence_apply`].
    pub fn gradient_apply(&self, p: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let npe = self.npe();
        let npp = self.npp();
        let r = &self.mesh.reference;
        let m = self.metrics;
        self.assemble(dim, |e, out| {
            let pe = &p[e * npp..(e + 1) * npp];
            let mut t = vec![0.0; npp];
            for a in 0..dim {
                let o = &mut out[a * npe..(a + 1) * npe];
                for k in 0..dim {
                    for q in 0..npp {
                        let idx = e * npp + q;
                        t[q] = -m.wdet_gl[idx] * m.rx_gl_at(idx, k, a) * pe[q];
                    }
                    let mats = axis_mats(dim, k, &r.d_gl, &r.gll_to_gl);
                    let (v, _) = apply_tensor_t(&mats, &t, r.shape_p);
                    for (x, y) in o.iter_mut().zip(&v) {
                        *x += y;
                    }
                }
            }
        })
    }

    /// Weak divergence-form convection: integral of v . div(u (u - w)),
    /// collocated at GLL nodes. `w = None` means a fixed grid.
    pub fn convective_apply(&self, u: &[f64], w: Option<&[f64]>) -> Vec<f64> {
        let dim = self.dim();
        let npe = self.npe();
        let m = self.metrics;
        self.assemble(dim, |e, out| {
            let mut ul = vec![vec![0.0; npe]; dim];
            let mut rel = vec![vec![0.0; npe]; dim];
            for a in 0..dim {
                self.gather(u, a, e, &mut ul[a]);
                rel[a].copy_from_slice(&ul[a]);
                if let Some(w) = w {
                    let mut wl = vec![0.0; npe];
                    self.gather(w, a, e, &mut wl);
                    for (x, y) in rel[a].iter_mut().zip(&wl) {
                        *x -= y;
                    }
                }
            }
            let mut f = vec![0.0; npe];
            for a in 0..dim {
                let o = &mut out[a * npe..(a + 1) * npe];
                for b in 0..dim {
                    for l in 0..npe {
                        f[l] = ul[a][l] * rel[b][l];
                    }
                    let df = self.ref_grad(&f);
                    for l in 0..npe {
                        let idx = e * npe + l;
                        let s: f64 = (0..dim).map(|k| m.rx_at(idx, k, b) * df[k][l]).sum();
                        o[l] += m.wdet[idx] * s;
                    }
                }
            }
        })
    }

    /// Pointwise divergence at every element-local GLL node (`E * npe` values).
    pub fn pointwise_divergence(&self, w: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let npe = self.npe();
        let m = self.metrics;
        let mut out = vec![0.0; self.num_elements() * npe];
        self.exec.for_each_chunk(&mut out, npe, |e, o| {
            let mut loc = vec![0.0; npe];
            for a in 0..dim {
                self.gather(w, a, e, &mut loc);
                let d = self.ref_grad(&loc);
                for l in 0..npe {
                    let idx = e * npe + l;
                    o[l] += (0..dim).map(|k| m.rx_at(idx, k, a) * d[k][l]).sum::<f64>();
                }
            }
        });
        out
    }

    /// Coefficients of d phi_l / d xi_k at the nodes sharing a grid line with l.
    /// Returns (m, [D_0(m,l), .., D_{d-1}(m,l)]).
    fn line_support(&self, l: usize) -> Vec<(usize, [f64; 3])> {
        let r = &self.mesh.reference;
        let dim = r.dim;
        let n1 = r.n1d();
        let ijk = r.shape_v.unravel(l);
        let mut out = Vec::with_capacity(dim * n1);
        let mut own = [0.0; 3];
        for (k, v) in own.iter_mut().enumerate().take(dim) {
            *v = r.d.get(ijk[k], ijk[k]);
        }
        out.push((l, own));
        for k in 0..dim {
            for i in 0..n1 {
                if i == ijk[k] {
                    continue;
                }
                let mut mi = ijk;
                mi[k] = i;
                let mut c = [0.0; 3];
                c[k] = r.d.get(i, ijk[k]);
                out.push((r.shape_v.ravel(mi), c));
            }
        }
        out
    }

    fn diag_kernel(&self, stress: bool, nu: f64) -> Vec<f64> {
        let dim = self.dim();
        let npe = self.npe();
        let m = self.metrics;
        let ncomp = if stress { dim } else { 1 };
        self.assemble(ncomp, |e, out| {
            for l in 0..npe {
                for (mm, c) in self.line_support(l) {
                    let idx = e * npe + mm;
                    let mut g = [0.0; 3];
                    for (b, gb) in g.iter_mut().enumerate().take(dim) {
                        *gb = (0..dim).map(|k| m.rx_at(idx, k, b) * c[k]).sum();
                    }
                    let g2: f64 = g.iter().map(|v| v * v).sum();
                    let w = nu * m.wdet[idx];
                    for a in 0..ncomp {
                        let extra = if stress { g[a] * g[a] } else { 0.0 };
                        out[a * npe + l] += w * (g2 + extra);
                    }
                }
            }
        })
    }

    /// Assembled diagonal of the stress-form stiffness, per component.
    pub fn stiffness_diag(&self, nu: f64) -> Vec<f64> {
        self.diag_kernel(true, nu)
    }

    /// Assembled diagonal of the scalar Laplacian.
    pub fn laplacian_diag(&self, nu: f64) -> Vec<f64> {
        self.diag_kernel(false, nu)
    }

    /// Diagonal of B diag(scale) B^T, where `scale` is a per-velocity-unknown
    /// weight (typically mask / mass).
    pub fn schur_diag(&self, scale: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let npe = self.npe();
        let npp = self.npp();
        let ng = self.ng();
        let r = &self.mesh.reference;
        let m = self.metrics;
        let l2g = &self.mesh.numbering.l2g;
        let mut out = vec![0.0; self.num_elements() * npp];
        self.exec.for_each_chunk(&mut out, npp, |e, o| {
            for (q, oq) in o.iter_mut().enumerate() {
                let qi = r.shape_p.unravel(q);
                let idx = e * npp + q;
                for l in 0..npe {
                    let li = r.shape_v.unravel(l);
                    let mut phi = [0.0; 3];
                    for (k, pk) in phi.iter_mut().enumerate().take(dim) {
                        *pk = (0..dim)
                            .map(|b| {
                                let mat = if b == k { &r.d_gl } else { &r.gll_to_gl };
                                mat.get(qi[b], li[b])
                            })
                            .product();
                    }
                    let g = l2g[e * npe + l];
                    for a in 0..dim {
                        let b: f64 = -m.wdet_gl[idx] * (0..dim).map(|k| m.rx_gl_at(idx, k, a) * phi[k]).sum::<f64>();
                        *oq += b * b * scale[a * ng + g];
                    }
                }
            }
        });
        out
    }

    /// Whether constant pressures are annihilated by the gradient on the
    /// unknowns selected by `scale` (mask over mass). Holds exactly on affine
    /// elements; on curved ones quadrature leaves a small residue and the
    /// constant is only a near-null mode. Below a relative size of 1e-14 the
    /// mode is treated as null: deflating it would divide rounding noise by
    /// the tiny eigenvalue and pollute the velocity.
    pub fn constant_pressure_is_null(&self, scale: &[f64]) -> bool {
        let ones = vec![1.0; self.num_elements() * self.npp()];
        let g = self.gradient_apply(&ones);
        let q: f64 = g.iter().zip(scale).map(|(v, s)| v * v * s).sum();
        let trace: f64 = self.schur_diag(scale).iter().sum();
        q <= 1e-14 * trace
    }

    /// Net boundary flux of `u` through every tagged face.
    pub fn compatibility_check(&self, u: &[f64]) -> f64 {
        let ng = self.ng();
        let dim = self.dim();
        let mut s = 0.0;
        for f in &self.metrics.faces {
            for (i, &g) in f.global_nodes.iter().enumerate() {
                let un: f64 = (0..dim).map(|a| u[a * ng + g] * f.normals[i][a]).sum();
                s += f.weights[i] * un;
            }
        }
        s
    }

    /// Boundary flux restricted to faces with a given tag.
    pub fn boundary_flux(&self, u: &[f64], tag: BoundaryTag) -> f64 {
        let ng = self.ng();
        let dim = self.dim();
        let mut s = 0.0;
        for f in self.metrics.faces.iter().filter(|f| f.tag == tag) {
            for (i, &g) in f.global_nodes.iter().enumerate() {
                let un: f64 = (0..dim).map(|a| u[a * ng + g] * f.normals[i][a]).sum();
                s += f.weights[i] * un;
            }
        }
        s
    }

    /// GLL-quadrature L2 norm of a velocity-like field.
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        let ng = self.ng();
        u.iter().enumerate().map(|(i, v)| v * v * self.mass_diag[i % ng]).sum::<f64>().sqrt()
    }

    /// Weak body force: M f sampled at the nodes.
    pub fn force_dual(&self, data: &dyn BoundaryData, t: f64) -> Vec<f64> {
        let ng = self.ng();
        let dim = self.dim();
        let mut f = vec![0.0; dim * ng];
        for g in 0..ng {
            let v = data.force(self.mesh.node(g), t);
            for a in 0..dim {
                f[a * ng + g] = v[a] * self.mass_diag[g];
            }
        }
        f
    }
}

/// Dirichlet lifting and its right-hand-side contributions.
#[derive(Clone, Debug)]
pub struct Lifting {
    pub u_b: Vec<f64>,
    /// -sigma M u_b - K u_b - C(u_b, w)
    pub rhs1: Vec<f64>,
    /// -B u_b
    pub rhs2: Vec<f64>,
}

/// Build the lifting `u_b` (Dirichlet values on constrained nodes, zero
/// elsewhere) and its contributions to the momentum and continuity right-hand
/// sides. `sigma` is the coefficient of the new time level in the time
/// derivative (zero for steady problems).
pub fn lift_dirichlet(
    ops: &Operators,
    nodes: &BoundaryNodes,
    data: &dyn BoundaryData,
    t: f64,
    nu: f64,
    sigma: f64,
    w: Option<&[f64]>,
) -> Lifting {
    let u_b = nodes.fluid_values(ops.mesh, data, t);
    let flux = ops.compatibility_check(&u_b);
    let scale = ops.metrics.faces.iter().flat_map(|f| f.weights.iter()).sum::<f64>().max(1.0)
        * u_b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if flux.abs() > 1e-8 * scale && !nodes.has_sigma() {
        log::warn!("Dirichlet data violates discrete compatibility: flux {flux:e}");
    }
    let mut rhs1 = ops.stiffness_apply(&u_b, nu);
    if sigma != 0.0 {
        let mu = ops.mass_apply(&u_b);
        crate::field::axpy(sigma, &mu, &mut rhs1);
    }
    if let Some(w) = w {
        let c = ops.convective_apply(&u_b, Some(w));
        crate::field::axpy(1.0, &c, &mut rhs1);
    }
    rhs1.iter_mut().for_each(|v| *v = -*v);
    let rhs2 = ops.divergence_apply(&u_b).into_iter().map(|v| -v).collect();
    Lifting { u_b, rhs1, rhs2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::dot;
    use crate::mesh::{build_box_mesh, compute_metrics, sine_deform, SineVariant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(lo: f64, hi: f64, el: usize, n: usize) -> (Mesh, GeometryMetrics) {
        let mesh = build_box_mesh(&[lo, lo], &[hi, hi], &[el, el], n, 2).unwrap();
        let m = compute_metrics(&mesh, Exec::Serial).unwrap();
        (mesh, m)
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn mass_of_one_is_area() {
        for (lo, hi, area) in [(0.0, 1.0, 1.0), (-1.0, 1.0, 4.0)] {
            let (mesh, m) = setup(lo, hi, 2, 5);
            let ops = Operators::new(&mesh, &m, Exec::Serial).unwrap();
            let one = vec![1.0; ops.ng()];
            assert!((dot(&ops.mass_apply(&one), &one) - area).abs() < 1e-13);
        }
    }

    #[test]
    fn stiffness_quadratic_form_example() {
        let (mesh, m) = setup(-1.0, 1.0, 2, 4);
        let ops = Operators::new(&mesh, &m, Exec::Serial).unwrap();
        let ng = ops.ng();
        let mut u = vec![0.0; 2 * ng];
        for g in 0..ng {
            let x = mesh.node(g);
            u[g] = x[0];
            u[ng + g] = -x[1];
        }
        let nu = 0.3;
        let ku = ops.stiffness_apply(&u, nu);
        assert!((dot(&ku, &u) - 16.0 * nu).abs() < 1e-12);
        let c = vec![0.7; 2 * ng];
        assert!(ops.stiffness_apply(&c, nu).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn stiffness_symmetric_and_policies_agree() {
        let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[2, 2], 5, 2).unwrap();
        let mesh = sine_deform(&mesh, 0.1, SineVariant::Symmetric).unwrap();
        let m = compute_metrics(&mesh, Exec::Serial).unwrap();
        let ops = Operators::new(&mesh, &m, Exec::Serial).unwrap();
        let opp = Operators::new(&mesh, &m, Exec::Parallel).unwrap();
        let u = random(2 * ops.ng(), 1);
        let v = random(2 * ops.ng(), 2);
        let a = dot(&ops.stiffness_apply(&u, 1.0), &v);
        let b = dot(&ops.stiffness_apply(&v, 1.0), &u);
        assert!((a - b).abs() < 1e-11 * a.abs().max(1.0));
        assert_eq!(ops.stiffness_apply(&u, 1.0), opp.stiffness_apply(&u, 1.0));
        assert_eq!(ops.divergence_apply(&u), opp.divergence_apply(&u));
    }

    #[test]
    fn divergence_examples() {
        let (mesh, m) = setup(-1.0, 1.0, 1, 4);
        let ops = Operators::new(&mesh, &m, Exec::Serial).unwrap();
        let ng = ops.ng();
        let c = vec![2.5; 2 * ng];
        assert!(ops.divergence_apply(&c).iter().all(|v| v.abs() < 1e-13));
        let mut u = vec![0.0; 2 * ng];
        for g in 0..ng {
            let x = mesh.node(g);
            u[g] = x[0];
            u[ng + g] = x[1];
        }
        let d = ops.divergence_apply(&u);
        for (q, v) in d.iter().enumerate() {
            assert!((v + 2.0 * m.wdet_gl[q]).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_is_transpose_of_divergence() {
        let mesh = build_box_mesh(&[0.0, 0.0, 0.0], &[1.0, 2.0, 1.0], &[2, 1, 1], 4, 3).unwrap();
        let m = compute_metrics(&mesh, Exec::Serial).unwrap();
        let ops = Operators::new(&mesh, &m, Exec::Serial).unwrap();
        let u = random(3 * ops.ng(), 3);
        let p = random(ops.num_elements() * ops.npp(), 4);
        let lhs = dot(&ops.divergence_apply(&u), &p);
        let rhs = dot(&u, &ops.gradient_apply(&p));
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        assert!(ops.gradient_apply(&vec![0.0; p.len()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn convective_vanishes_for_w_equal_u() {
        let (mesh, m) = setup(-1.0, 1.0, 2, 5);
        let ops = Operators::new(&mesh, &m, Exec::Serial).unwrap();
        let u = random(2 * ops.ng(), 5);
        assert!(ops.convective_apply(&u, Some(&u)).iter().all(|v| v.abs() < 1e-14));
        let c = vec![1.3; 2 * ops.ng()];
        assert!(ops.convective_apply(&c, None).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn compatibility_examples() {
        let (mesh, m) = setup(-1.0, 1.0, 2, 5);
        let ops = Operators::new(&mesh, &m, Exec::Serial).unwrap();
        let ng = ops.ng();
        let mut u = vec![0.0; 2 * ng];
        assert_eq!(ops.compatibility_check(&u), 0.0);
        u[..ng].iter_mut().for_each(|v| *v = 1.0);
        assert!(ops.compatibility_check(&u).abs() < 1e-13);
        for g in 0..ng {
            let x = mesh.node(g);
            u[g] = x[0];
            u[ng + g] = x[1];
        }
        assert!((ops.compatibility_check(&u) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn diagonals_match_probing() {
        let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[2, 1], 3, 2).unwrap();
        let mesh = sine_deform(&mesh, 0.1, SineVariant::Symmetric).unwrap();
        let m = compute_metrics(&mesh, Exec::Serial).unwrap();
        let ops = Operators::new(&mesh, &m, Exec::Serial).unwrap();
        let n = 2 * ops.ng();
        let kd = ops.stiffness_diag(0.5);
        let ld = ops.laplacian_diag(0.5);
        for i in (0..n).step_by(3) {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let k = ops.stiffness_apply(&e, 0.5)[i];
            assert!((k - kd[i]).abs() < 1e-12 * k.abs().max(1.0));
            if i < ops.ng() {
                let l = ops.laplacian_apply(&e[..ops.ng()], 0.5)[i];
                assert!((l - ld[i]).abs() < 1e-12 * l.abs().max(1.0));
            }
        }
        let scale: Vec<f64> = (0..n).map(|i| 1.0 / ops.mass_diag[i % ops.ng()]).collect();
        let sd = ops.schur_diag(&scale);
        let np = ops.num_elements() * ops.npp();
        for q in 0..np {
            let mut e = vec![0.0; np];
            e[q] = 1.0;
            let g = ops.gradient_apply(&e);
            let s: Vec<f64> = g.iter().zip(&scale).map(|(a, b)| a * b).collect();
            let v = ops.divergence_apply(&s)[q];
            assert!((v - sd[q]).abs() < 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn stale_metrics_rejected() {
        let (mut mesh, m) = setup(0.0, 1.0, 1, 3);
        mesh.map_nodes(|x| [x[0] * 2.0, x[1], 0.0]);
        assert!(Operators::new(&mesh, &m, Exec::Serial).is_err());
    }
}
