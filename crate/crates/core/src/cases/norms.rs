//! Error norms against analytic fields, evaluated with an oversampled
//! Gauss-Legendre rule on every element.

use crate::basis::{gl_rule, interp_matrix_to_points};
use crate::field::{PressureField, VelocityField};
use crate::mesh::{det_inv, Mesh};
use crate::tensor::{apply_tensor, Shape};

/// Analytic velocity, velocity gradient (`g[a][b] = d u_a / d x_b`) and pressure.
pub trait ExactFields {
    fn velocity(&self, x: [f64; 3]) -> [f64; 3];
    fn gradient(&self, x: [f64; 3]) -> [[f64; 3]; 3];
    fn pressure(&self, x: [f64; 3]) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub h1_rel: f64,
    pub l2_rel: f64,
    pub u_l2_rel: f64,
}

/// Relative H1 velocity error and relative L2 pressure error (both pressures
/// taken with zero mean). `extra` points are added to the GL rule per direction.
pub fn error_norms(mesh: &Mesh, u: &VelocityField, p: &PressureField, exact: &dyn ExactFields, extra: usize) -> ErrorNorms {
    let r = &mesh.reference;
    let dim = r.dim;
    let fine = gl_rule(r.order + 1 + extra).expect("positive rule size");
    let iv = interp_matrix_to_points(&r.gll.nodes, &fine.nodes);
    let dv = iv.matmul(&r.d);
    let ip = interp_matrix_to_points(&r.gl.nodes, &fine.nodes);
    let nf = fine.npts();
    let shape_f = Shape::cube(nf, dim);
    let wf: Vec<f64> = (0..shape_f.len())
        .map(|i| {
            let ijk = shape_f.unravel(i);
            (0..dim).map(|a| fine.weights[ijk[a]]).product()
        })
        .collect();
    let npe = r.npe();
    let npp = r.npp();
    let ng = mesh.nglobal();
    let interp_all: Vec<_> = (0..dim).map(|_| &iv).collect();
    let deriv = |k: usize| -> Vec<_> { (0..dim).map(|b| if b == k { &dv } else { &iv }).collect() };
    let pmats: Vec<_> = (0..dim).map(|_| &ip).collect();

    // Sums: error L2, error grad, exact L2, exact grad, pressure moments.
    let (mut eu, mut eg, mut xu, mut xg) = (0.0, 0.0, 0.0, 0.0);
    let mut pts = Vec::new();
    let mut vol = 0.0;
    let (mut pd_int, mut pe_int) = (0.0, 0.0);
    for e in 0..mesh.num_elements() {
        let x = mesh.local_coords(e);
        let xf: Vec<Vec<f64>> = x.iter().map(|xa| apply_tensor(&interp_all, xa, r.shape_v).0).collect();
        let mut jac = vec![vec![vec![0.0; shape_f.len()]; dim]; dim];
        for k in 0..dim {
            for a in 0..dim {
                jac[a][k] = apply_tensor(&deriv(k), &x[a], r.shape_v).0;
            }
        }
        let mut uf = Vec::new();
        let mut duf = Vec::new();
        let mut loc = vec![0.0; npe];
        for a in 0..dim {
            mesh.numbering.gather_element(&u.data[a * ng..(a + 1) * ng], e, &mut loc);
            uf.push(apply_tensor(&interp_all, &loc, r.shape_v).0);
            duf.push((0..dim).map(|k| apply_tensor(&deriv(k), &loc, r.shape_v).0).collect::<Vec<_>>());
        }
        let pf = apply_tensor(&pmats, &p.data[e * npp..(e + 1) * npp], r.shape_p).0;
        for i in 0..shape_f.len() {
            let mut jm = [0.0; 9];
            for a in 0..dim {
                for k in 0..dim {
                    jm[a * dim + k] = jac[a][k][i];
                }
            }
            let (det, inv) = det_inv(dim, &jm[..dim * dim]);
            let w = wf[i] * det;
            let mut xp = [0.0; 3];
            for a in 0..dim {
                xp[a] = xf[a][i];
            }
            let ue = exact.velocity(xp);
            let ge = exact.gradient(xp);
            for a in 0..dim {
                let d = uf[a][i] - ue[a];
                eu += w * d * d;
                xu += w * ue[a] * ue[a];
                for b in 0..dim {
                    let g: f64 = (0..dim).map(|k| inv[k * dim + b] * duf[a][k][i]).sum();
                    let dg = g - ge[a][b];
                    eg += w * dg * dg;
                    xg += w * ge[a][b] * ge[a][b];
                }
            }
            let pe = exact.pressure(xp);
            pts.push((w, pf[i], pe));
            vol += w;
            pd_int += w * pf[i];
            pe_int += w * pe;
        }
    }
    let (pdm, pem) = (pd_int / vol, pe_int / vol);
    let (mut ep, mut xp) = (0.0, 0.0);
    for (w, pd, pe) in pts {
        let d = (pd - pdm) - (pe - pem);
        ep += w * d * d;
        xp += w * (pe - pem) * (pe - pem);
    }
    ErrorNorms {
        h1_rel: ((eu + eg) / (xu + xg)).sqrt(),
        l2_rel: if xp > 0.0 { (ep / xp).sqrt() } else { ep.sqrt() },
        u_l2_rel: (eu / xu).sqrt(),
    }
}
