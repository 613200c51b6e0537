//! Conforming tensor-product spectral element meshes in two and three
//! dimensions.
//!
//! Geometry is stored as a continuous global field of node positions; each
//! element's mapping from the reference cube is the degree-N interpolant of
//! its GLL nodes. Element ids and connectivity are fixed at construction and
//! never change during a run, only positions do.

mod build;
mod deform;
mod metrics;
mod transfinite;
mod vtk;

use std::collections::HashMap;
use std::sync::Arc;

use crate::basis::{diff_matrix, gl_rule, gll_rule, interp_matrix, OperatorMatrix1D, QuadratureRule};
use crate::error::{Result, SemError};
use crate::tensor::Shape;

pub use build::{build_box_mesh, build_cylinder_cavity, CylinderMeshSpec, CYLINDER_DATA_ID};
pub use deform::{sine_deform, sine_deform_interior, sine_map, SineVariant};
pub use metrics::{compute_metrics, face_normal, FaceGeometry, GeometryMetrics};
pub(crate) use metrics::det_inv;
pub use transfinite::{transfinite_element, transfinite_hex, transfinite_quad, BoundaryDescriptor, CurveFn, SurfaceFn};
pub use vtk::write_vtk;

/// Reference element for the P_N - P_{N-2} pairing on [-1, 1]^d.
#[derive(Debug)]
pub struct ReferenceElement {
    pub order: usize,
    pub dim: usize,
    pub gll: QuadratureRule,
    pub gl: QuadratureRule,
    /// Derivative matrix on the GLL grid.
    pub d: OperatorMatrix1D,
    /// Interpolation from GLL to GL nodes.
    pub gll_to_gl: OperatorMatrix1D,
    /// Derivative of the GLL interpolant evaluated at GL nodes.
    pub d_gl: OperatorMatrix1D,
    pub shape_v: Shape,
    pub shape_p: Shape,
    /// Tensor GLL weights, one per velocity node.
    pub w_v: Vec<f64>,
    /// Tensor GL weights, one per pressure node.
    pub w_p: Vec<f64>,
}

impl ReferenceElement {
    pub fn new(order: usize, dim: usize) -> Result<Self> {
        if order < 2 {
            return Err(SemError::InvalidOrder { what: "velocity order (needs N >= 2)", value: order });
        }
        if !(2..=3).contains(&dim) {
            return Err(SemError::InvalidMesh(format!("dimension {dim} not supported")));
        }
        let gll = gll_rule(order)?;
        let gl = gl_rule(order - 1)?;
        let d = diff_matrix(&gll);
        let gll_to_gl = interp_matrix(&gll, &gl);
        let d_gl = gll_to_gl.matmul(&d);
        let shape_v = Shape::cube(order + 1, dim);
        let shape_p = Shape::cube(order - 1, dim);
        let w_v = tensor_weights(&gll.weights, shape_v, dim);
        let w_p = tensor_weights(&gl.weights, shape_p, dim);
        Ok(Self { order, dim, gll, gl, d, gll_to_gl, d_gl, shape_v, shape_p, w_v, w_p })
    }

    pub fn npe(&self) -> usize {
        self.shape_v.len()
    }

    pub fn npp(&self) -> usize {
        self.shape_p.len()
    }

    pub fn n1d(&self) -> usize {
        self.order + 1
    }

    /// Local node indices lying on face `face` (axis = face / 2, side = face % 2).
    pub fn face_nodes(&self, face: usize) -> Vec<usize> {
        let axis = face / 2;
        let fixed = if face % 2 == 0 { 0 } else { self.order };
        (0..self.npe()).filter(|&l| self.shape_v.unravel(l)[axis] == fixed).collect()
    }

    /// Face quadrature weights matching [`Self::face_nodes`].
    pub fn face_weights(&self, face: usize) -> Vec<f64> {
        let axis = face / 2;
        self.face_nodes(face)
            .into_iter()
            .map(|l| {
                let ijk = self.shape_v.unravel(l);
                (0..self.dim).filter(|&a| a != axis).map(|a| self.gll.weights[ijk[a]]).product()
            })
            .collect()
    }

    /// Reference coordinates of local GLL node `l`.
    pub fn node_xi(&self, l: usize) -> [f64; 3] {
        let ijk = self.shape_v.unravel(l);
        let mut xi = [0.0; 3];
        for a in 0..self.dim {
            xi[a] = self.gll.nodes[ijk[a]];
        }
        xi
    }
}

fn tensor_weights(w: &[f64], shape: Shape, dim: usize) -> Vec<f64> {
    (0..shape.len())
        .map(|idx| {
            let ijk = shape.unravel(idx);
            (0..dim).map(|a| w[ijk[a]]).product()
        })
        .collect()
}

/// Boundary condition attached to a mesh face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTag {
    /// Essential velocity data; the id selects which data function applies.
    Dirichlet(u32),
    /// Natural (traction) boundary that moves with the fluid.
    Sigma,
    /// Axis-aligned wall: normal component along `axis` vanishes.
    FreeSlip(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryFace {
    pub element: usize,
    pub face: usize,
    pub tag: BoundaryTag,
}

impl BoundaryFace {
    pub fn axis(&self) -> usize {
        self.face / 2
    }

    /// 0 for the face at xi = -1, 1 for xi = +1.
    pub fn side(&self) -> usize {
        self.face % 2
    }
}

/// Map from (element, local node) to global degree of freedom.
#[derive(Clone, Debug)]
pub struct Numbering {
    pub l2g: Vec<usize>,
    pub nglobal: usize,
    pub npe: usize,
}

impl Numbering {
    /// Merge coincident nodes (within `tol`) in element order.
    pub fn from_coordinates(local: &[[f64; 3]], npe: usize, tol: f64) -> Self {
        let cell = tol * 8.0;
        let key = |x: &[f64; 3]| -> [i64; 3] { [0, 1, 2].map(|a| (x[a] / cell).floor() as i64) };
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let mut reps: Vec<[f64; 3]> = Vec::new();
        let mut l2g = Vec::with_capacity(local.len());
        for x in local {
            let k = key(x);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(ids) = buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &g in ids {
                                let r = &reps[g];
                                let dist = (0..3).map(|a| (r[a] - x[a]).abs()).fold(0.0, f64::max);
                                if dist <= tol {
                                    found = Some(g);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            let g = match found {
                Some(g) => g,
                None => {
                    let g = reps.len();
                    reps.push(*x);
                    buckets.entry(k).or_default().push(g);
                    g
                }
            };
            l2g.push(g);
        }
        Self { l2g, nglobal: reps.len(), npe }
    }

    pub fn num_elements(&self) -> usize {
        self.l2g.len() / self.npe
    }

    /// Local copy of a global field (Q u).
    pub fn gather(&self, global: &[f64], local: &mut [f64]) {
        for (l, &g) in local.iter_mut().zip(&self.l2g) {
            *l = global[g];
        }
    }

    pub fn gather_element(&self, global: &[f64], e: usize, local: &mut [f64]) {
        let ids = &self.l2g[e * self.npe..(e + 1) * self.npe];
        for (l, &g) in local.iter_mut().zip(ids) {
            *l = global[g];
        }
    }

    /// Sum local contributions into a global field (Q^T u), in element order.
    pub fn scatter_add(&self, local: &[f64], global: &mut [f64]) {
        for (&l, &g) in local.iter().zip(&self.l2g) {
            global[g] += l;
        }
    }

    /// Direct stiffness summation on local data (Q Q^T).
    pub fn gather_scatter(&self, local: &mut [f64]) {
        let mut global = vec![0.0; self.nglobal];
        self.scatter_add(local, &mut global);
        self.gather(&global, local);
    }

    pub fn multiplicity(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nglobal];
        for &g in &self.l2g {
            m[g] += 1.0;
        }
        m
    }
}

/// One spectral element, as seen from the mesh.
#[derive(Clone, Debug)]
pub struct Element {
    pub id: usize,
    /// Physical coordinates of the 2^d vertices.
    pub vertices: Vec<[f64; 3]>,
    /// Physical coordinates of every GLL node.
    pub nodes: Vec<[f64; 3]>,
    pub boundary: Vec<BoundaryFace>,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub reference: Arc<ReferenceElement>,
    pub numbering: Numbering,
    /// Current node positions, `[dim][nglobal]`.
    coords: Vec<Vec<f64>>,
    /// Positions in the reference configuration (t = t0).
    ref_coords: Vec<Vec<f64>>,
    pub boundary: Vec<BoundaryFace>,
    version: u64,
}

impl Mesh {
    /// Assemble a mesh from per-element GLL node coordinates.
    pub fn from_element_nodes(
        reference: Arc<ReferenceElement>,
        elem_nodes: &[Vec<[f64; 3]>],
        boundary: Vec<BoundaryFace>,
    ) -> Result<Self> {
        let npe = reference.npe();
        let dim = reference.dim;
        if elem_nodes.iter().any(|e| e.len() != npe) {
            return Err(SemError::InvalidMesh("element node count mismatch".into()));
        }
        let flat: Vec<[f64; 3]> = elem_nodes.iter().flatten().copied().collect();
        let scale = flat.iter().flat_map(|x| x.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
        let numbering = Numbering::from_coordinates(&flat, npe, 1e-9 * scale);
        let mut coords = vec![vec![0.0; numbering.nglobal]; dim];
        for (x, &g) in flat.iter().zip(&numbering.l2g) {
            for a in 0..dim {
                coords[a][g] = x[a];
            }
        }
        let mesh = Self {
            reference,
            numbering,
            ref_coords: coords.clone(),
            coords,
            boundary,
            version: 0,
        };
        mesh.validate_boundary()?;
        Ok(mesh)
    }

    /// Every exterior face must carry exactly one tag; interior faces none.
    fn validate_boundary(&self) -> Result<()> {
        let mult = self.numbering.multiplicity();
        let r = &self.reference;
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        for bf in &self.boundary {
            if bf.element >= self.num_elements() || bf.face >= 2 * r.dim {
                return Err(SemError::InvalidMesh(format!("bad boundary face {bf:?}")));
            }
            *seen.entry((bf.element, bf.face)).or_default() += 1;
        }
        for e in 0..self.num_elements() {
            for f in 0..2 * r.dim {
                let probe = self.face_probe_node(f);
                let g = self.numbering.l2g[e * r.npe() + probe];
                let exterior = mult[g] < 1.5;
                let count = seen.get(&(e, f)).copied().unwrap_or(0);
                if exterior && count != 1 {
                    return Err(SemError::InvalidMesh(format!(
                        "exterior face {f} of element {e} has {count} tags"
                    )));
                }
                if !exterior && count != 0 {
                    return Err(SemError::InvalidMesh(format!("interior face {f} of element {e} is tagged")));
                }
            }
        }
        Ok(())
    }

    /// A face node that is not on any edge of the face (exists for N >= 2).
    fn face_probe_node(&self, face: usize) -> usize {
        let r = &self.reference;
        let axis = face / 2;
        let mut ijk = [0usize; 3];
        for (a, v) in ijk.iter_mut().enumerate().take(r.dim) {
            *v = if a == axis {
                if face % 2 == 0 {
                    0
                } else {
                    r.order
                }
            } else {
                1
            };
        }
        r.shape_v.ravel(ijk)
    }

    pub fn dim(&self) -> usize {
        self.reference.dim
    }

    pub fn order(&self) -> usize {
        self.reference.order
    }

    pub fn num_elements(&self) -> usize {
        self.numbering.num_elements()
    }

    pub fn nglobal(&self) -> usize {
        self.numbering.nglobal
    }

    /// Incremented whenever node positions change.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn ref_coords(&self) -> &[Vec<f64>] {
        &self.ref_coords
    }

    pub fn node(&self, g: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (a, c) in self.coords.iter().enumerate() {
            x[a] = c[g];
        }
        x
    }

    pub fn ref_node(&self, g: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (a, c) in self.ref_coords.iter().enumerate() {
            x[a] = c[g];
        }
        x
    }

    /// Replace node positions (keeps connectivity).
    pub fn set_coords(&mut self, coords: Vec<Vec<f64>>) {
        assert_eq!(coords.len(), self.dim());
        assert!(coords.iter().all(|c| c.len() == self.nglobal()));
        self.coords = coords;
        self.version += 1;
    }

    /// Move nodes by a pointwise map.
    pub fn map_nodes(&mut self, f: impl Fn([f64; 3]) -> [f64; 3]) {
        let dim = self.dim();
        let mut coords = self.coords.clone();
        for g in 0..self.nglobal() {
            let y = f(self.node(g));
            for a in 0..dim {
                coords[a][g] = y[a];
            }
        }
        self.set_coords(coords);
    }

    /// Declare the current configuration as the reference one.
    pub fn reset_reference(&mut self) {
        self.ref_coords = self.coords.clone();
    }

    /// Element-local coordinate arrays, `[dim][npe]`.
    pub fn local_coords(&self, e: usize) -> Vec<Vec<f64>> {
        let npe = self.reference.npe();
        self.coords
            .iter()
            .map(|c| {
                let mut loc = vec![0.0; npe];
                self.numbering.gather_element(c, e, &mut loc);
                loc
            })
            .collect()
    }

    pub fn element(&self, e: usize) -> Element {
        let r = &self.reference;
        let npe = r.npe();
        let ids = &self.numbering.l2g[e * npe..(e + 1) * npe];
        let nodes: Vec<[f64; 3]> = ids.iter().map(|&g| self.node(g)).collect();
        let n = r.order;
        let corners: Vec<usize> = (0..(1 << r.dim))
            .map(|c| {
                let mut ijk = [0; 3];
                for (a, v) in ijk.iter_mut().enumerate().take(r.dim) {
                    *v = if c >> a & 1 == 1 { n } else { 0 };
                }
                r.shape_v.ravel(ijk)
            })
            .collect();
        Element {
            id: e,
            vertices: corners.iter().map(|&l| nodes[l]).collect(),
            nodes,
            boundary: self.boundary.iter().filter(|b| b.element == e).copied().collect(),
        }
    }

    /// Reassign boundary tags.
    pub fn retag(&mut self, f: impl Fn(&BoundaryFace) -> BoundaryTag) {
        for bf in &mut self.boundary {
            bf.tag = f(bf);
        }
    }

    pub fn has_sigma_boundary(&self) -> bool {
        self.boundary.iter().any(|b| b.tag == BoundaryTag::Sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn face_weights_sum_to_face_area() {
        let r = ReferenceElement::new(5, 3).unwrap();
        for f in 0..6 {
            let s: f64 = r.face_weights(f).iter().sum();
            assert!((s - 4.0).abs() < 1e-13);
            assert_eq!(r.face_nodes(f).len(), 36);
        }
    }

    #[test]
    fn gather_scatter_examples() {
        let mesh = build_box_mesh(&[0.0, 0.0], &[2.0, 1.0], &[2, 1], 3, 2).unwrap();
        let num = &mesh.numbering;
        let npe = 16;
        // Continuous data is unchanged by Q Q^T followed by division by multiplicity.
        let global: Vec<f64> = (0..num.nglobal).map(|g| g as f64 * 0.5).collect();
        let mut local = vec![0.0; 2 * npe];
        num.gather(&global, &mut local);
        let mult = num.multiplicity();
        let mut ds = local.clone();
        num.gather_scatter(&mut ds);
        for (l, (&v, &g)) in ds.iter().zip(&num.l2g).enumerate() {
            assert!((v / mult[g] - local[l]).abs() < 1e-14);
        }
        // Shared node with values 1 and 3 sums to 4 on both sides.
        let shared = num.l2g[3 + 4]; // element 0, i = N on the interface
        let mut local = vec![0.0; 2 * npe];
        for (l, &g) in num.l2g.iter().enumerate() {
            if g == shared {
                local[l] = if l < npe { 1.0 } else { 3.0 };
            }
        }
        num.gather_scatter(&mut local);
        for (l, &g) in num.l2g.iter().enumerate() {
            if g == shared {
                assert_eq!(local[l], 4.0);
            }
        }
    }

    #[test]
    fn gather_scatter_adjoint_dense_oracle() {
        let mesh = build_box_mesh(&[0.0, 0.0], &[2.0, 1.0], &[2, 1], 4, 2).unwrap();
        let num = &mesh.numbering;
        let nl = num.l2g.len();
        let ng = num.nglobal;
        // Dense Q: local x global.
        let mut q = vec![0.0; nl * ng];
        for (l, &g) in num.l2g.iter().enumerate() {
            q[l * ng + g] = 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..ng).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..nl).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let qu: Vec<f64> = (0..nl).map(|l| (0..ng).map(|g| q[l * ng + g] * u[g]).sum()).collect();
        let qtv: Vec<f64> = (0..ng).map(|g| (0..nl).map(|l| q[l * ng + g] * v[l]).sum()).collect();
        let mut qu2 = vec![0.0; nl];
        num.gather(&u, &mut qu2);
        let mut qtv2 = vec![0.0; ng];
        num.scatter_add(&v, &mut qtv2);
        for (a, b) in qu.iter().zip(&qu2) {
            assert!((a - b).abs() < 1e-15);
        }
        let lhs: f64 = qu2.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&qtv2).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        for (a, b) in qtv.iter().zip(&qtv2) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn untagged_exterior_face_rejected() {
        let r = Arc::new(ReferenceElement::new(2, 2).unwrap());
        let nodes: Vec<[f64; 3]> = (0..9).map(|l| r.node_xi(l)).collect();
        let err = Mesh::from_element_nodes(r, &[nodes], vec![]).unwrap_err();
        assert!(matches!(err, SemError::InvalidMesh(_)));
    }
}
