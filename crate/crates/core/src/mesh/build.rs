use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use crate::error::{Result, SemError};

use super::transfinite::{multilinear, transfinite_element, BoundaryDescriptor};
use super::{BoundaryFace, BoundaryTag, Mesh, ReferenceElement};

/// Cartesian mesh of `prod(elems)` affine elements on the box [lo, hi].
///
/// Elements are numbered with the first direction fastest. All boundary
/// faces start out tagged `Dirichlet(0)`; use [`Mesh::retag`] to change them.
/// For box meshes a face's reference axis and side coincide with the box axis
/// and side it lies on.
pub fn build_box_mesh(lo: &[f64], hi: &[f64], elems: &[usize], order: usize, dim: usize) -> Result<Mesh> {
    if lo.len() < dim || hi.len() < dim || elems.len() < dim {
        return Err(SemError::InvalidMesh(format!("box needs {dim} bounds and element counts")));
    }
    for a in 0..dim {
        if lo[a] >= hi[a] {
            return Err(SemError::DegenerateBox { axis: a });
        }
        if elems[a] == 0 {
            return Err(SemError::InvalidMesh(format!("zero elements along axis {a}")));
        }
    }
    let r = Arc::new(ReferenceElement::new(order, dim)?);
    let mut counts = [1usize; 3];
    counts[..dim].copy_from_slice(&elems[..dim]);
    let num = counts.iter().product::<usize>();
    let mut elem_nodes = Vec::with_capacity(num);
    let mut boundary = Vec::new();
    for e in 0..num {
        let idx = [e % counts[0], (e / counts[0]) % counts[1], e / (counts[0] * counts[1])];
        let mut vertices = Vec::with_capacity(1 << dim);
        for c in 0..(1usize << dim) {
            let mut v = [0.0; 3];
            for a in 0..dim {
                let k = idx[a] + (c >> a & 1);
                v[a] = lo[a] + (hi[a] - lo[a]) * k as f64 / counts[a] as f64;
            }
            vertices.push(v);
        }
        elem_nodes.push((0..r.npe()).map(|l| multilinear(dim, &vertices, r.node_xi(l))).collect());
        for a in 0..dim {
            if idx[a] == 0 {
                boundary.push(BoundaryFace { element: e, face: 2 * a, tag: BoundaryTag::Dirichlet(0) });
            }
            if idx[a] + 1 == counts[a] {
                boundary.push(BoundaryFace { element: e, face: 2 * a + 1, tag: BoundaryTag::Dirichlet(0) });
            }
        }
    }
    Mesh::from_element_nodes(r, &elem_nodes, boundary)
}

/// Square cavity with a circular hole, meshed as concentric rings of eight
/// transfinite elements blending the circle into the outer square.
#[derive(Clone, Copy, Debug)]
pub struct CylinderMeshSpec {
    pub center: [f64; 2],
    pub radius: f64,
    /// The cavity is [-half_width, half_width]^2.
    pub half_width: f64,
    pub rings: usize,
    pub order: usize,
}

/// Boundary data id used for the cylinder surface; the outer walls use 0.
pub const CYLINDER_DATA_ID: u32 = 1;

/// Element layout: ring `m` (outward), sector `j` (counterclockwise), element
/// id `8 m + j`. Reference axis 0 runs radially outward, axis 1 counterclockwise.
pub fn build_cylinder_cavity(spec: &CylinderMeshSpec) -> Result<Mesh> {
    let CylinderMeshSpec { center, radius, half_width: hw, rings, order } = *spec;
    if rings == 0 {
        return Err(SemError::InvalidMesh("cylinder mesh needs at least one ring".into()));
    }
    if radius <= 0.0 || center[0].abs() + radius >= hw || center[1].abs() + radius >= hw {
        return Err(SemError::InvalidMesh("cylinder must lie strictly inside the cavity".into()));
    }
    let r = Arc::new(ReferenceElement::new(order, 2)?);
    let square = move |j: usize| -> [f64; 2] {
        const PTS: [[f64; 2]; 8] =
            [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [-1.0, 1.0], [-1.0, 0.0], [-1.0, -1.0], [0.0, -1.0], [1.0, -1.0]];
        let p = PTS[j % 8];
        [hw * p[0], hw * p[1]]
    };
    // Interface curve s in [0, 1] at sector j, local parameter t in [0, 1].
    let curve = move |s: f64, j: usize, t: f64| -> [f64; 2] {
        let th = FRAC_PI_4 * (j as f64 + t);
        let c = [center[0] + radius * th.cos(), center[1] + radius * th.sin()];
        let (a, b) = (square(j), square(j + 1));
        let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        [(1.0 - s) * c[0] + s * q[0], (1.0 - s) * c[1] + s * q[1]]
    };
    let mut elem_nodes = Vec::with_capacity(8 * rings);
    let mut boundary = Vec::new();
    for m in 0..rings {
        let (s0, s1) = (m as f64 / rings as f64, (m + 1) as f64 / rings as f64);
        for j in 0..8 {
            let v = |s: f64, t: f64| {
                let p = curve(s, j, t);
                [p[0], p[1], 0.0]
            };
            let vertices = [v(s0, 0.0), v(s1, 0.0), v(s0, 1.0), v(s1, 1.0)];
            let edge = |s: f64| BoundaryDescriptor::Curve(Arc::new(move |u: f64| curve(s, j, 0.5 * (u + 1.0))));
            let faces = [edge(s0), edge(s1), BoundaryDescriptor::Straight, BoundaryDescriptor::Straight];
            elem_nodes.push(transfinite_element(&r, &vertices, &faces)?);
            let e = 8 * m + j;
            if m == 0 {
                boundary.push(BoundaryFace { element: e, face: 0, tag: BoundaryTag::Dirichlet(CYLINDER_DATA_ID) });
            }
            if m + 1 == rings {
                boundary.push(BoundaryFace { element: e, face: 1, tag: BoundaryTag::Dirichlet(0) });
            }
        }
    }
    Mesh::from_element_nodes(r, &elem_nodes, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_reference_element_nodes_are_gll_grid() {
        let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[1, 1], 4, 2).unwrap();
        let r = &mesh.reference;
        let el = mesh.element(0);
        assert_eq!(el.nodes.len(), 25);
        for (l, x) in el.nodes.iter().enumerate() {
            let xi = r.node_xi(l);
            assert!((x[0] - xi[0]).abs() < 1e-15 && (x[1] - xi[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn element_counts() {
        let mesh = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[4, 4], 5, 2).unwrap();
        assert_eq!(mesh.num_elements(), 16);
        assert_eq!(mesh.nglobal(), 21 * 21);
        assert_eq!(mesh.boundary.len(), 16);
        let m3 = build_box_mesh(&[0.0; 3], &[1.0, 2.0, 3.0], &[2, 1, 3], 3, 3).unwrap();
        assert_eq!(m3.num_elements(), 6);
        assert_eq!(m3.element(0).nodes.len(), 64);
        assert_eq!(m3.nglobal(), 7 * 4 * 10);
    }

    #[test]
    fn degenerate_box_rejected() {
        let err = build_box_mesh(&[0.0, 1.0], &[1.0, 1.0], &[1, 1], 3, 2).unwrap_err();
        assert!(matches!(err, SemError::DegenerateBox { axis: 1 }));
        assert!(build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[1, 1], 1, 2).is_err());
    }

    #[test]
    fn cylinder_boundary_nodes_on_circle() {
        let spec = CylinderMeshSpec { center: [0.0, 0.0], radius: 0.14, half_width: 1.0, rings: 2, order: 8 };
        let mesh = build_cylinder_cavity(&spec).unwrap();
        assert_eq!(mesh.num_elements(), 16);
        let r = &mesh.reference;
        for bf in &mesh.boundary {
            for l in r.face_nodes(bf.face) {
                let x = mesh.node(mesh.numbering.l2g[bf.element * r.npe() + l]);
                let rad = (x[0] * x[0] + x[1] * x[1]).sqrt();
                match bf.tag {
                    BoundaryTag::Dirichlet(CYLINDER_DATA_ID) => assert!((rad - 0.14).abs() < 1e-12),
                    _ => assert!((x[0].abs().max(x[1].abs()) - 1.0).abs() < 1e-12),
                }
            }
        }
    }
}
