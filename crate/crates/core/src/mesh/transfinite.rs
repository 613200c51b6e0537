//! Gordon-Hall transfinite interpolation of element geometry from its
//! boundary edges (2D) or faces (3D).

use std::sync::Arc;

use crate::basis::{barycentric_weights, lagrange_row};
use crate::error::{Result, SemError};

use super::ReferenceElement;

pub type CurveFn = Arc<dyn Fn(f64) -> [f64; 2] + Send + Sync>;
pub type SurfaceFn = Arc<dyn Fn(f64, f64) -> [f64; 3] + Send + Sync>;

/// Geometry of one element edge (2D) or face (3D).
///
/// Faces are numbered `2 * axis + side`. A face is parameterized by the
/// remaining reference coordinates in increasing axis order, each in [-1, 1].
#[derive(Clone)]
pub enum BoundaryDescriptor {
    /// Straight edge / bilinear face through the element vertices.
    Straight,
    Curve(CurveFn),
    Surface(SurfaceFn),
    /// Values at the face GLL nodes, in tensor order.
    Sampled(Vec<[f64; 3]>),
}

impl std::fmt::Debug for BoundaryDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Straight => write!(f, "Straight"),
            Self::Curve(_) => write!(f, "Curve"),
            Self::Surface(_) => write!(f, "Surface"),
            Self::Sampled(v) => write!(f, "Sampled({} nodes)", v.len()),
        }
    }
}

#[inline]
pub(crate) fn blend(side: usize, xi: f64) -> f64 {
    if side == 0 {
        0.5 * (1.0 - xi)
    } else {
        0.5 * (1.0 + xi)
    }
}

/// Multilinear interpolation of the 2^dim vertices (bit `a` of the vertex
/// index selects the side along axis `a`).
pub(crate) fn multilinear(dim: usize, vertices: &[[f64; 3]], xi: [f64; 3]) -> [f64; 3] {
    let mut x = [0.0; 3];
    for (c, v) in vertices.iter().enumerate().take(1 << dim) {
        let w: f64 = (0..dim).map(|a| blend(c >> a & 1, xi[a])).product();
        for b in 0..3 {
            x[b] += w * v[b];
        }
    }
    x
}

/// Boolean-sum blending of face data at reference point `xi`.
///
/// `face(f, xi)` must return the face-`f` geometry at the projection of `xi`
/// onto that face (the coordinate along the face axis is ignored).
pub(crate) fn gordon_hall(dim: usize, face: &dyn Fn(usize, [f64; 3]) -> [f64; 3], xi: [f64; 3]) -> [f64; 3] {
    let mut x = [0.0; 3];
    for subset in 1usize..(1 << dim) {
        let axes: Vec<usize> = (0..dim).filter(|a| subset >> a & 1 == 1).collect();
        let sign = if axes.len() % 2 == 1 { 1.0 } else { -1.0 };
        for sides in 0usize..(1 << axes.len()) {
            let mut p = xi;
            let mut w = sign;
            for (i, &a) in axes.iter().enumerate() {
                let s = sides >> i & 1;
                w *= blend(s, xi[a]);
                p[a] = if s == 0 { -1.0 } else { 1.0 };
            }
            if w == 0.0 {
                continue;
            }
            let k = axes[0];
            let y = face(2 * k + (sides & 1), p);
            for b in 0..3 {
                x[b] += w * y[b];
            }
        }
    }
    x
}

fn face_params(dim: usize, face: usize, xi: [f64; 3]) -> (f64, f64) {
    let axis = face / 2;
    let mut it = (0..dim).filter(|&a| a != axis).map(|a| xi[a]);
    let s = it.next().unwrap_or(0.0);
    let t = it.next().unwrap_or(0.0);
    (s, t)
}

fn eval_descriptor(
    r: &ReferenceElement,
    vertices: &[[f64; 3]],
    desc: &BoundaryDescriptor,
    face: usize,
    xi: [f64; 3],
) -> [f64; 3] {
    let dim = r.dim;
    let axis = face / 2;
    match desc {
        BoundaryDescriptor::Straight => {
            let mut p = xi;
            p[axis] = if face % 2 == 0 { -1.0 } else { 1.0 };
            multilinear(dim, vertices, p)
        }
        BoundaryDescriptor::Curve(c) => {
            let (s, _) = face_params(dim, face, xi);
            let y = c(s);
            [y[0], y[1], 0.0]
        }
        BoundaryDescriptor::Surface(f) => {
            let (s, t) = face_params(dim, face, xi);
            f(s, t)
        }
        BoundaryDescriptor::Sampled(vals) => {
            let nodes = &r.gll.nodes;
            let bary = barycentric_weights(nodes);
            let (s, t) = face_params(dim, face, xi);
            let rs = lagrange_row(nodes, &bary, s);
            let rt = if dim == 3 { lagrange_row(nodes, &bary, t) } else { vec![1.0] };
            let n = nodes.len();
            let mut x = [0.0; 3];
            for (j, &wt) in rt.iter().enumerate() {
                for (i, &ws) in rs.iter().enumerate() {
                    let v = vals[i + n * j];
                    for b in 0..3 {
                        x[b] += ws * wt * v[b];
                    }
                }
            }
            x
        }
    }
}

/// Fill all GLL geometry nodes of one element from its vertices and
/// per-face boundary descriptors (`2 * dim` of them).
pub fn transfinite_element(
    r: &ReferenceElement,
    vertices: &[[f64; 3]],
    faces: &[BoundaryDescriptor],
) -> Result<Vec<[f64; 3]>> {
    let dim = r.dim;
    if vertices.len() != 1 << dim || faces.len() != 2 * dim {
        return Err(SemError::InvalidMesh("transfinite element needs 2^d vertices and 2d faces".into()));
    }
    let npf = r.n1d().pow(dim as u32 - 1);
    for (f, d) in faces.iter().enumerate() {
        match d {
            BoundaryDescriptor::Curve(_) if dim != 2 => {
                return Err(SemError::InvalidMesh(format!("face {f}: curve descriptor in 3D")))
            }
            BoundaryDescriptor::Surface(_) if dim != 3 => {
                return Err(SemError::InvalidMesh(format!("face {f}: surface descriptor in 2D")))
            }
            BoundaryDescriptor::Sampled(v) if v.len() != npf => {
                return Err(SemError::InvalidMesh(format!("face {f}: expected {npf} samples")))
            }
            _ => {}
        }
    }
    let eval = |f: usize, xi: [f64; 3]| eval_descriptor(r, vertices, &faces[f], f, xi);
    let scale = vertices.iter().flat_map(|v| v.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    let dist = |a: [f64; 3], b: [f64; 3]| (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);

    // Every face must pass through its vertices.
    for (c, &v) in vertices.iter().enumerate() {
        let mut xi = [0.0; 3];
        for (a, x) in xi.iter_mut().enumerate().take(dim) {
            *x = if c >> a & 1 == 1 { 1.0 } else { -1.0 };
        }
        for a in 0..dim {
            let f = 2 * a + (c >> a & 1);
            let y = eval(f, xi);
            if dist(y, v) > tol {
                return Err(SemError::InconsistentCorners(format!(
                    "face {f} misses vertex {c}: {y:?} vs {v:?}"
                )));
            }
        }
    }
    // Adjacent faces must agree along their shared edge.
    if dim == 3 {
        for a in 0..3 {
            for b in a + 1..3 {
                let free = 3 - a - b;
                for sa in 0..2 {
                    for sb in 0..2 {
                        for m in 0..5 {
                            let mut xi = [0.0; 3];
                            xi[a] = if sa == 0 { -1.0 } else { 1.0 };
                            xi[b] = if sb == 0 { -1.0 } else { 1.0 };
                            xi[free] = -1.0 + 0.5 * m as f64;
                            let ya = eval(2 * a + sa, xi);
                            let yb = eval(2 * b + sb, xi);
                            if dist(ya, yb) > tol {
                                return Err(SemError::InconsistentCorners(format!(
                                    "faces {} and {} disagree on their shared edge",
                                    2 * a + sa,
                                    2 * b + sb
                                )));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((0..r.npe()).map(|l| gordon_hall(dim, &eval, r.node_xi(l))).collect())
}

/// 2D convenience wrapper: edges ordered (xi=-1, xi=+1, eta=-1, eta=+1).
pub fn transfinite_quad(r: &ReferenceElement, vertices: &[[f64; 3]; 4], edges: [BoundaryDescriptor; 4]) -> Result<Vec<[f64; 3]>> {
    transfinite_element(r, vertices, &edges)
}

/// 3D convenience wrapper: faces ordered by (axis, side).
pub fn transfinite_hex(r: &ReferenceElement, vertices: &[[f64; 3]; 8], faces: [BoundaryDescriptor; 6]) -> Result<Vec<[f64; 3]>> {
    transfinite_element(r, vertices, &faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn straight(n: usize) -> Vec<BoundaryDescriptor> {
        vec![BoundaryDescriptor::Straight; n]
    }

    #[test]
    fn straight_square_is_affine() {
        let r = ReferenceElement::new(5, 2).unwrap();
        let v = [[1.0, 2.0, 0.0], [3.0, 2.0, 0.0], [1.0, 5.0, 0.0], [3.0, 5.0, 0.0]];
        let nodes = transfinite_element(&r, &v, &straight(4)).unwrap();
        for (l, x) in nodes.iter().enumerate() {
            let xi = r.node_xi(l);
            assert!((x[0] - (2.0 + xi[0])).abs() < 1e-14);
            assert!((x[1] - (3.5 + 1.5 * xi[1])).abs() < 1e-14);
        }
    }

    #[test]
    fn straight_hex_is_trilinear() {
        let r = ReferenceElement::new(3, 3).unwrap();
        let v: Vec<[f64; 3]> = (0..8)
            .map(|c| [(c & 1) as f64 * 2.0, (c >> 1 & 1) as f64, (c >> 2 & 1) as f64 * 0.5 + 0.1 * (c & 1) as f64])
            .collect();
        let nodes = transfinite_element(&r, &v, &straight(6)).unwrap();
        for (l, x) in nodes.iter().enumerate() {
            let y = multilinear(3, &v, r.node_xi(l));
            for b in 0..3 {
                assert!((x[b] - y[b]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quarter_circle_edge_midpoint_on_arc() {
        // Quarter annulus: inner edge straight chord replaced by the unit arc.
        let r = ReferenceElement::new(6, 2).unwrap();
        let arc = |rad: f64| -> CurveFn {
            Arc::new(move |s: f64| {
                let th = 0.25 * PI * (s + 1.0);
                [rad * th.cos(), rad * th.sin()]
            })
        };
        let v = [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 2.0, 0.0]];
        // xi is radial, eta angular.
        let edges = [
            BoundaryDescriptor::Curve(arc(1.0)),
            BoundaryDescriptor::Curve(arc(2.0)),
            BoundaryDescriptor::Straight,
            BoundaryDescriptor::Straight,
        ];
        let nodes = transfinite_element(&r, &v, &edges).unwrap();
        for (l, x) in nodes.iter().enumerate() {
            let [i, j, _] = r.shape_v.unravel(l);
            if i == 0 {
                assert!(((x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0).abs() < 1e-12);
            }
            if i == 0 && j == 3 {
                let h = 0.5f64.sqrt();
                assert!((x[0] - h).abs() < 1e-12 && (x[1] - h).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inconsistent_corner_rejected() {
        let r = ReferenceElement::new(3, 2).unwrap();
        let v = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        let bad: CurveFn = Arc::new(|s: f64| [0.0, 0.5 * (s + 1.0) + 0.1]);
        let edges = [
            BoundaryDescriptor::Curve(bad),
            BoundaryDescriptor::Straight,
            BoundaryDescriptor::Straight,
            BoundaryDescriptor::Straight,
        ];
        assert!(matches!(transfinite_element(&r, &v, &edges), Err(SemError::InconsistentCorners(_))));
    }

    #[test]
    fn sampled_face_reproduces_curve() {
        let r = ReferenceElement::new(8, 2).unwrap();
        let v = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        let bump = |s: f64| [0.5 * (s + 1.0), 1.0 + 0.05 * (1.0 - s * s)];
        let samples: Vec<[f64; 3]> = r.gll.nodes.iter().map(|&s| { let y = bump(s); [y[0], y[1], 0.0] }).collect();
        let a = transfinite_element(&r, &v, &[BoundaryDescriptor::Straight, BoundaryDescriptor::Straight, BoundaryDescriptor::Straight, BoundaryDescriptor::Sampled(samples)]).unwrap();
        let b = transfinite_element(&r, &v, &[BoundaryDescriptor::Straight, BoundaryDescriptor::Straight, BoundaryDescriptor::Straight, BoundaryDescriptor::Curve(Arc::new(bump))]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x[0] - y[0]).abs() < 1e-13 && (x[1] - y[1]).abs() < 1e-13);
        }
    }
}
