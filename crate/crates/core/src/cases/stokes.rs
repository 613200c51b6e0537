//! Steady Stokes accuracy study on the square [-1, 1]^2 with an analytic
//! solution, on straight, interior-deformed and sine-mapped meshes.

use std::f64::consts::PI;

use crate::error::Result;
use crate::exec::Exec;
use crate::linsolve::solve_steady_stokes;
use crate::mesh::{build_box_mesh, compute_metrics, sine_deform, sine_deform_interior, Mesh, SineVariant};
use crate::ops::{BoundaryData, BoundaryNodes, Operators};

use super::norms::{error_norms, ExactFields};

const A: f64 = PI / 2.0;

/// u = (-cos(a x) sin(a y), sin(a x) cos(a y)), p = -pi sin(a x) sin(a y), a = pi/2.
pub struct StokesExact;

impl ExactFields for StokesExact {
    fn velocity(&self, x: [f64; 3]) -> [f64; 3] {
        let (cx, sx, cy, sy) = ((A * x[0]).cos(), (A * x[0]).sin(), (A * x[1]).cos(), (A * x[1]).sin());
        [-cx * sy, sx * cy, 0.0]
    }

    fn gradient(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let (cx, sx, cy, sy) = ((A * x[0]).cos(), (A * x[0]).sin(), (A * x[1]).cos(), (A * x[1]).sin());
        [[A * sx * sy, -A * cx * cy, 0.0], [A * cx * cy, -A * sx * sy, 0.0], [0.0; 3]]
    }

    fn pressure(&self, x: [f64; 3]) -> f64 {
        -PI * (A * x[0]).sin() * (A * x[1]).sin()
    }
}

impl BoundaryData for StokesExact {
    fn velocity(&self, _id: u32, x: [f64; 3], _t: f64) -> [f64; 3] {
        ExactFields::velocity(self, x)
    }

    fn force(&self, x: [f64; 3], _t: f64) -> [f64; 3] {
        [-PI * PI * (A * x[0]).cos() * (A * x[1]).sin(), 0.0, 0.0]
    }
}

/// Mesh deformation applied before solving.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Deformation {
    None,
    /// Element interiors only; element edges stay straight.
    Interior,
    /// Every node, including those on element edges and the outer boundary.
    Sine,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    /// Number of elements.
    pub e: usize,
    pub h1_rel: f64,
    pub l2_rel: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct StokesCase {
    pub elems: usize,
    pub order: usize,
    pub deform: Deformation,
    pub alpha: f64,
    pub variant: SineVariant,
    pub tol: f64,
}

pub fn stokes_mesh(case: &StokesCase) -> Result<Mesh> {
    let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[case.elems, case.elems], case.order, 2)?;
    match case.deform {
        Deformation::None => Ok(mesh),
        Deformation::Interior => sine_deform_interior(&mesh, case.alpha, case.variant),
        Deformation::Sine => sine_deform(&mesh, case.alpha, case.variant),
    }
}

pub fn solve_stokes_case(case: &StokesCase, exec: Exec) -> Result<ConvergenceRecord> {
    let mesh = stokes_mesh(case)?;
    let metrics = compute_metrics(&mesh, exec)?;
    let ops = Operators::new(&mesh, &metrics, exec)?;
    let nodes = BoundaryNodes::new(&mesh);
    let (u, p, rep) = solve_steady_stokes(&ops, &nodes, &StokesExact, 1.0, 0.0, case.tol)?;
    log::info!(
        "stokes E={} N={} deform={:?}: {} outer iterations, residual {:e}",
        mesh.num_elements(),
        case.order,
        case.deform,
        rep.iterations,
        rep.residual
    );
    let err = error_norms(&mesh, &u, &p, &StokesExact, 6);
    Ok(ConvergenceRecord { n: case.order, e: mesh.num_elements(), h1_rel: err.h1_rel, l2_rel: err.l2_rel })
}

/// One record per (elements-per-direction, order) pair, in input order.
pub fn run_stokes_convergence(
    elems: &[usize],
    orders: &[usize],
    deform: Deformation,
    alpha: f64,
    variant: SineVariant,
    tol: f64,
    exec: Exec,
) -> Result<Vec<ConvergenceRecord>> {
    let mut out = Vec::new();
    for &el in elems {
        for &n in orders {
            let case = StokesCase { elems: el, order: n, deform, alpha, variant, tol };
            out.push(solve_stokes_case(&case, exec)?);
        }
    }
    Ok(out)
}
