//! Geometric factors of the current mesh configuration at GLL and GL nodes,
//! plus outward normals and surface Jacobians on tagged boundary faces.

use crate::error::{Result, SemError};
use crate::exec::Exec;
use crate::tensor::{apply_axis, apply_tensor};

use super::{BoundaryTag, Mesh, ReferenceElement};

#[derive(Clone, Debug)]
pub struct FaceGeometry {
    pub element: usize,
    pub face: usize,
    pub tag: BoundaryTag,
    pub local_nodes: Vec<usize>,
    pub global_nodes: Vec<usize>,
    pub normals: Vec<[f64; 3]>,
    pub surf_jac: Vec<f64>,
    /// Face quadrature weights times surface Jacobian.
    pub weights: Vec<f64>,
}

/// Metrics for one geometry version of a mesh.
///
/// `rx` stores the inverse Jacobian, entry `[k][a] = d xi_k / d x_a`, laid out
/// as `((e * npts + l) * d + k) * d + a`.
#[derive(Clone, Debug)]
pub struct GeometryMetrics {
    pub version: u64,
    pub dim: usize,
    pub npe: usize,
    pub npp: usize,
    pub num_elements: usize,
    pub jac: Vec<f64>,
    pub det: Vec<f64>,
    pub rx: Vec<f64>,
    /// Quadrature weight times det at GLL nodes.
    pub wdet: Vec<f64>,
    pub det_gl: Vec<f64>,
    pub rx_gl: Vec<f64>,
    pub wdet_gl: Vec<f64>,
    pub faces: Vec<FaceGeometry>,
}

struct ElemBlock {
    jac: Vec<f64>,
    det: Vec<f64>,
    rx: Vec<f64>,
    det_gl: Vec<f64>,
    rx_gl: Vec<f64>,
}

pub(crate) fn det_inv(dim: usize, j: &[f64]) -> (f64, [f64; 9]) {
    // j is row-major d x d with j[a * d + k] = dx_a / dxi_k.
    let mut inv = [0.0; 9];
    if dim == 2 {
        let det = j[0] * j[3] - j[1] * j[2];
        inv[0] = j[3] / det;
        inv[1] = -j[1] / det;
        inv[2] = -j[2] / det;
        inv[3] = j[0] / det;
        (det, inv)
    } else {
        let c = |r: usize, s: usize| j[r * 3 + s];
        let cof = [
            c(1, 1) * c(2, 2) - c(1, 2) * c(2, 1),
            c(1, 2) * c(2, 0) - c(1, 0) * c(2, 2),
            c(1, 0) * c(2, 1) - c(1, 1) * c(2, 0),
            c(0, 2) * c(2, 1) - c(0, 1) * c(2, 2),
            c(0, 0) * c(2, 2) - c(0, 2) * c(2, 0),
            c(0, 1) * c(2, 0) - c(0, 0) * c(2, 1),
            c(0, 1) * c(1, 2) - c(0, 2) * c(1, 1),
            c(0, 2) * c(1, 0) - c(0, 0) * c(1, 2),
            c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0),
        ];
        let det = c(0, 0) * cof[0] + c(0, 1) * cof[1] + c(0, 2) * cof[2];
        // inverse = adj / det, adj = cof^T; inv[k][a] = cof[a][k] / det
        for k in 0..3 {
            for a in 0..3 {
                inv[k * 3 + a] = cof[a * 3 + k] / det;
            }
        }
        (det, inv)
    }
}

/// Jacobian entries `dx_a/dxi_k` at GLL (or GL) nodes, row-major per node.
fn jacobian(r: &ReferenceElement, x: &[Vec<f64>], at_gl: bool) -> (Vec<f64>, usize) {
    let dim = r.dim;
    let mut out = Vec::new();
    let mut npts = 0;
    for k in 0..dim {
        for xa in x.iter().take(dim) {
            let vals = if at_gl {
                let mats: Vec<_> = (0..dim).map(|b| if b == k { &r.d_gl } else { &r.gll_to_gl }).collect();
                apply_tensor(&mats, xa, r.shape_v).0
            } else {
                let mut o = vec![0.0; r.npe()];
                apply_axis(&r.d, xa, r.shape_v, k, &mut o);
                o
            };
            npts = vals.len();
            out.push(vals);
        }
    }
    // out[k * dim + a][l] -> row-major per node j[a * dim + k]
    let mut jac = vec![0.0; npts * dim * dim];
    for l in 0..npts {
        for k in 0..dim {
            for a in 0..dim {
                jac[(l * dim + a) * dim + k] = out[k * dim + a][l];
            }
        }
    }
    (jac, npts)
}

fn element_block(mesh: &Mesh, e: usize) -> std::result::Result<ElemBlock, (usize, f64)> {
    let r = &mesh.reference;
    let dim = r.dim;
    let x = mesh.local_coords(e);
    let dd = dim * dim;
    let (jac, npe) = jacobian(r, &x, false);
    let mut det = vec![0.0; npe];
    let mut rx = vec![0.0; npe * dd];
    for l in 0..npe {
        let (d, inv) = det_inv(dim, &jac[l * dd..(l + 1) * dd]);
        if d <= 0.0 || !d.is_finite() {
            return Err((l, d));
        }
        det[l] = d;
        rx[l * dd..(l + 1) * dd].copy_from_slice(&inv[..dd]);
    }
    let (jg, npp) = jacobian(r, &x, true);
    let mut det_gl = vec![0.0; npp];
    let mut rx_gl = vec![0.0; npp * dd];
    for q in 0..npp {
        let (d, inv) = det_inv(dim, &jg[q * dd..(q + 1) * dd]);
        if d <= 0.0 || !d.is_finite() {
            return Err((npe + q, d));
        }
        det_gl[q] = d;
        rx_gl[q * dd..(q + 1) * dd].copy_from_slice(&inv[..dd]);
    }
    Ok(ElemBlock { jac, det, rx, det_gl, rx_gl })
}

/// Build metrics for the current geometry. Fails on the first element (in
/// element order) with a non-positive Jacobian determinant.
pub fn compute_metrics(mesh: &Mesh, exec: Exec) -> Result<GeometryMetrics> {
    let r = &mesh.reference;
    let dim = r.dim;
    let ne = mesh.num_elements();
    let blocks = exec.map(ne, |e| element_block(mesh, e));
    let (npe, npp) = (r.npe(), r.npp());
    let mut m = GeometryMetrics {
        version: mesh.version(),
        dim,
        npe,
        npp,
        num_elements: ne,
        jac: Vec::with_capacity(ne * npe * dim * dim),
        det: Vec::with_capacity(ne * npe),
        rx: Vec::with_capacity(ne * npe * dim * dim),
        wdet: Vec::with_capacity(ne * npe),
        det_gl: Vec::with_capacity(ne * npp),
        rx_gl: Vec::with_capacity(ne * npp * dim * dim),
        wdet_gl: Vec::with_capacity(ne * npp),
        faces: Vec::with_capacity(mesh.boundary.len()),
    };
    for (e, b) in blocks.into_iter().enumerate() {
        let b = b.map_err(|(node, det)| SemError::TangledElement { element: e, node, det })?;
        m.wdet.extend(b.det.iter().zip(&r.w_v).map(|(d, w)| d * w));
        m.wdet_gl.extend(b.det_gl.iter().zip(&r.w_p).map(|(d, w)| d * w));
        m.jac.extend(b.jac);
        m.det.extend(b.det);
        m.rx.extend(b.rx);
        m.det_gl.extend(b.det_gl);
        m.rx_gl.extend(b.rx_gl);
    }
    for bf in &mesh.boundary {
        m.faces.push(face_geometry(mesh, &m, bf.element, bf.face, bf.tag)?);
    }
    Ok(m)
}

fn face_geometry(mesh: &Mesh, m: &GeometryMetrics, e: usize, face: usize, tag: BoundaryTag) -> Result<FaceGeometry> {
    let r = &mesh.reference;
    let dim = r.dim;
    let dd = dim * dim;
    let axis = face / 2;
    let sign = if face % 2 == 0 { -1.0 } else { 1.0 };
    let local_nodes = r.face_nodes(face);
    let qw = r.face_weights(face);
    let scale = m.det[e * r.npe()..(e + 1) * r.npe()].iter().fold(0.0f64, |a, &b| a.max(b)).powf(1.0 / dim as f64);
    let mut normals = Vec::with_capacity(local_nodes.len());
    let mut surf_jac = Vec::with_capacity(local_nodes.len());
    for &l in &local_nodes {
        let j = &m.jac[(e * r.npe() + l) * dd..(e * r.npe() + l + 1) * dd];
        let col = |k: usize| -> [f64; 3] {
            let mut t = [0.0; 3];
            for a in 0..dim {
                t[a] = j[a * dim + k];
            }
            t
        };
        let raw = if dim == 2 {
            let t = col(1 - axis);
            if axis == 0 {
                [t[1], -t[0], 0.0]
            } else {
                [-t[1], t[0], 0.0]
            }
        } else {
            let (t1, t2) = (col((axis + 1) % 3), col((axis + 2) % 3));
            [t1[1] * t2[2] - t1[2] * t2[1], t1[2] * t2[0] - t1[0] * t2[2], t1[0] * t2[1] - t1[1] * t2[0]]
        };
        let norm = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
        if norm <= 1e-14 * scale.powi(dim as i32 - 1) || !norm.is_finite() {
            return Err(SemError::DegenerateGeometry { element: e, face });
        }
        let n = [sign * raw[0] / norm, sign * raw[1] / norm, sign * raw[2] / norm];
        // Outward: the normal must point along increasing xi_axis on side 1.
        let along = col(axis);
        let dot = sign * (n[0] * along[0] + n[1] * along[1] + n[2] * along[2]);
        if dot <= 0.0 {
            return Err(SemError::DegenerateGeometry { element: e, face });
        }
        normals.push(n);
        surf_jac.push(norm);
    }
    let global_nodes = local_nodes.iter().map(|&l| mesh.numbering.l2g[e * r.npe() + l]).collect();
    let weights = qw.iter().zip(&surf_jac).map(|(w, s)| w * s).collect();
    Ok(FaceGeometry { element: e, face, tag, local_nodes, global_nodes, normals, surf_jac, weights })
}

impl GeometryMetrics {
    pub fn volume(&self) -> f64 {
        self.wdet.iter().sum()
    }

    /// Inverse Jacobian entry d xi_k / d x_a at GLL node `idx = e * npe + l`.
    #[inline]
    pub fn rx_at(&self, idx: usize, k: usize, a: usize) -> f64 {
        self.rx[(idx * self.dim + k) * self.dim + a]
    }

    #[inline]
    pub fn rx_gl_at(&self, idx: usize, k: usize, a: usize) -> f64 {
        self.rx_gl[(idx * self.dim + k) * self.dim + a]
    }

    pub fn min_det(&self) -> f64 {
        self.det.iter().chain(&self.det_gl).copied().fold(f64::INFINITY, f64::min)
    }

    /// Error unless these metrics were built for the mesh's current geometry.
    pub fn check_current(&self, mesh: &Mesh) -> Result<()> {
        if self.version != mesh.version() {
            return Err(SemError::StaleMetrics { metrics: self.version, mesh: mesh.version() });
        }
        Ok(())
    }
}

/// Unit outward normal at node `node` of boundary face `face` (index into
/// `metrics.faces`).
pub fn face_normal(metrics: &GeometryMetrics, face: usize, node: usize) -> [f64; 3] {
    metrics.faces[face].normals[node]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, build_cylinder_cavity, sine_deform, CylinderMeshSpec, SineVariant};

    #[test]
    fn reference_element_identity() {
        let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[1, 1], 5, 2).unwrap();
        let m = compute_metrics(&mesh, Exec::Serial).unwrap();
        for (i, d) in m.det.iter().enumerate() {
            assert!((d - 1.0).abs() < 1e-13);
            assert!((m.rx_at(i, 0, 0) - 1.0).abs() < 1e-13 && m.rx_at(i, 0, 1).abs() < 1e-13);
        }
    }

    #[test]
    fn affine_scaling_det() {
        let mesh = build_box_mesh(&[0.0, 0.0, 0.0], &[3.0, 1.0, 0.5], &[1, 1, 1], 3, 3).unwrap();
        let m = compute_metrics(&mesh, Exec::Serial).unwrap();
        let expect = 1.5 * 0.5 * 0.25;
        assert!(m.det.iter().chain(&m.det_gl).all(|d| (d - expect).abs() < 1e-13));
        assert!((m.volume() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn box_volume_and_normals() {
        let mesh = build_box_mesh(&[0.0, 0.0], &[2.0, 3.0], &[3, 2], 4, 2).unwrap();
        let m = compute_metrics(&mesh, Exec::Parallel).unwrap();
        assert!((m.volume() - 6.0).abs() < 1e-12);
        for f in &m.faces {
            let mut expect = [0.0; 3];
            expect[f.face / 2] = if f.face % 2 == 0 { -1.0 } else { 1.0 };
            for n in &f.normals {
                assert!((0..3).all(|a| (n[a] - expect[a]).abs() < 1e-13), "{n:?}");
            }
        }
    }

    #[test]
    fn deformed_det_matches_finite_differences() {
        use crate::basis::{barycentric_weights, lagrange_row};
        let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[1, 1], 10, 2).unwrap();
        let d = sine_deform(&mesh, 0.1, SineVariant::Printed).unwrap();
        let m = compute_metrics(&d, Exec::Serial).unwrap();
        let r = &d.reference;
        let x = d.local_coords(0);
        let bary = barycentric_weights(&r.gll.nodes);
        // The element map is the polynomial interpolant of the geometry nodes.
        let map = |s: f64, t: f64| -> [f64; 2] {
            let (rs, rt) = (lagrange_row(&r.gll.nodes, &bary, s), lagrange_row(&r.gll.nodes, &bary, t));
            let mut y = [0.0; 2];
            for l in 0..r.npe() {
                let [i, j, _] = r.shape_v.unravel(l);
                for a in 0..2 {
                    y[a] += rs[i] * rt[j] * x[a][l];
                }
            }
            y
        };
        let h = 1e-5;
        for l in 0..r.npe() {
            let xi = r.node_xi(l);
            let dx = |a: usize| -> [f64; 2] {
                let (mut p, mut q) = ([xi[0], xi[1]], [xi[0], xi[1]]);
                p[a] += h;
                q[a] -= h;
                let (fp, fq) = (map(p[0], p[1]), map(q[0], q[1]));
                [(fp[0] - fq[0]) / (2.0 * h), (fp[1] - fq[1]) / (2.0 * h)]
            };
            let (c0, c1) = (dx(0), dx(1));
            let fd = c0[0] * c1[1] - c0[1] * c1[0];
            assert!((m.det[l] - fd).abs() / fd.abs() < 1e-6, "node {l}");
        }
    }

    #[test]
    fn circle_normals_are_radial() {
        let spec = CylinderMeshSpec { center: [0.1, -0.05], radius: 0.14, half_width: 1.0, rings: 2, order: 10 };
        let mesh = build_cylinder_cavity(&spec).unwrap();
        let m = compute_metrics(&mesh, Exec::Serial).unwrap();
        for f in m.faces.iter().filter(|f| f.tag == BoundaryTag::Dirichlet(1)) {
            for (n, &g) in f.normals.iter().zip(&f.global_nodes) {
                let x = mesh.node(g);
                let (dx, dy) = (x[0] - 0.1, x[1] + 0.05);
                let rr = (dx * dx + dy * dy).sqrt();
                // Outward from the fluid is toward the cylinder centre.
                assert!((n[0] + dx / rr).abs() < 1e-10 && (n[1] + dy / rr).abs() < 1e-10);
                assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interior_normals_antiparallel() {
        let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[2, 1], 6, 2).unwrap();
        let d = sine_deform(&mesh, 0.1, SineVariant::Symmetric).unwrap();
        let m = compute_metrics(&d, Exec::Serial).unwrap();
        let fa = face_geometry(&d, &m, 0, 1, BoundaryTag::Sigma).unwrap();
        let fb = face_geometry(&d, &m, 1, 0, BoundaryTag::Sigma).unwrap();
        for (i, &g) in fa.global_nodes.iter().enumerate() {
            let j = fb.global_nodes.iter().position(|&h| h == g).unwrap();
            for a in 0..2 {
                assert!((fa.normals[i][a] + fb.normals[j][a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tangled_element_reported() {
        let mesh = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[1, 1], 4, 2).unwrap();
        let mut bad = mesh.clone();
        bad.map_nodes(|x| [x[0] * (1.0 - 2.0 * x[1]) + 0.0, x[1], 0.0]);
        match compute_metrics(&bad, Exec::Serial) {
            Err(SemError::TangledElement { element: 0, det, .. }) => assert!(det <= 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
