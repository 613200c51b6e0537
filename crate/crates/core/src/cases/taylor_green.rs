//! Decaying Taylor-Green vortex on [-1, 1]^2 with exact time-dependent
//! Dirichlet data, for temporal convergence studies on fixed and moving grids.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::ale::{step, AleState, StepConfig, StepStats};
use crate::error::Result;
use crate::exec::Exec;
use crate::field::PressureField;
use crate::mesh::build_box_mesh;
use crate::motion::MeshMotionStrategy;
use crate::ops::{BoundaryData, Operators};

#[derive(Clone, Copy, Debug)]
pub struct TaylorGreen {
    pub nu: f64,
}

impl TaylorGreen {
    pub fn velocity_at(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let f = (-2.0 * PI * PI * self.nu * t).exp();
        let (cx, sx, cy, sy) = ((PI * x[0]).cos(), (PI * x[0]).sin(), (PI * x[1]).cos(), (PI * x[1]).sin());
        [-cx * sy * f, sx * cy * f, 0.0]
    }

    pub fn pressure_at(&self, x: [f64; 3], t: f64) -> f64 {
        let f = (-4.0 * PI * PI * self.nu * t).exp();
        -0.25 * ((2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos()) * f
    }
}

impl BoundaryData for TaylorGreen {
    fn velocity(&self, _id: u32, x: [f64; 3], t: f64) -> [f64; 3] {
        self.velocity_at(x, t)
    }
}

/// Interior mesh oscillation vanishing on the boundary of [-1, 1]^2:
/// x(Y, t) = Y + eps sin(omega t) sin(pi Y0) sin(pi Y1) (1, 1).
pub fn wobble_motion(eps: f64, omega: f64) -> MeshMotionStrategy {
    MeshMotionStrategy::Prescribed(Arc::new(move |y: [f64; 3], t: f64| {
        let s = eps * omega * (omega * t).cos() * (PI * y[0]).sin() * (PI * y[1]).sin();
        [s, s, 0.0]
    }))
}

#[derive(Clone, Debug)]
pub struct TaylorGreenRun {
    pub elems: usize,
    pub order: usize,
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub motion: MeshMotionStrategy,
    pub tol: f64,
}

/// Initial state with the exact fields at t = 0.
pub fn taylor_green_state(run: &TaylorGreenRun, exec: Exec) -> Result<AleState> {
    let tg = TaylorGreen { nu: run.nu };
    let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[run.elems, run.elems], run.order, 2)?;
    let ng = mesh.nglobal();
    let mut u = vec![0.0; 2 * ng];
    for g in 0..ng {
        let v = tg.velocity_at(mesh.node(g), 0.0);
        u[g] = v[0];
        u[ng + g] = v[1];
    }
    let p = PressureField::from_fn(&mesh, |x| tg.pressure_at(x, 0.0)).data;
    AleState::new(mesh, u, p, 0.0, exec)
}

/// Number of steps so that `steps * dt` reaches `t_end` (rounded).
pub fn step_count(t_end: f64, dt: f64) -> usize {
    (t_end / dt).round().max(1.0) as usize
}

pub fn run_taylor_green(run: &TaylorGreenRun, exec: Exec, mut observe: impl FnMut(&AleState, &StepStats)) -> Result<AleState> {
    let tg = TaylorGreen { nu: run.nu };
    let mut state = taylor_green_state(run, exec)?;
    let cfg = StepConfig { dt: run.dt, nu: run.nu, data: &tg, motion: run.motion.clone(), tol: run.tol, motion_tol: run.tol, exec };
    for _ in 0..step_count(run.t_end, run.dt) {
        let st = step(&mut state, &cfg)?;
        observe(&state, &st);
    }
    Ok(state)
}

/// L2 distance between two final states of runs on the same discretization.
pub fn state_distance(a: &AleState, b: &AleState, exec: Exec) -> Result<f64> {
    let ops: Operators = a.operators(exec)?;
    let d: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect();
    Ok(ops.l2_norm(&d))
}

/// Observed temporal orders from self-convergence: runs at `dt`, `dt/2`,
/// ... (`levels` of them) compared with a reference at `dt / ref_factor`.
/// Returns (dt, error) pairs and the successive orders.
pub fn temporal_self_convergence(
    base: &TaylorGreenRun,
    levels: usize,
    ref_factor: f64,
    exec: Exec,
) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    let reference = run_taylor_green(&TaylorGreenRun { dt: base.dt / ref_factor, ..base.clone() }, exec, |_, _| {})?;
    let mut errs = Vec::new();
    for l in 0..levels {
        let dt = base.dt / 2f64.powi(l as i32);
        let s = run_taylor_green(&TaylorGreenRun { dt, ..base.clone() }, exec, |_, _| {})?;
        errs.push((dt, state_distance(&s, &reference, exec)?));
    }
    let orders = errs.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect();
    Ok((errs, orders))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fields_satisfy_momentum() {
        // u_t + u.grad u + grad p - nu lap u = 0 by central differences.
        let tg = TaylorGreen { nu: 0.05 };
        let h = 1e-4;
        let (x, y, t) = (0.3, -0.6, 0.2);
        let u = |x: f64, y: f64, t: f64| tg.velocity_at([x, y, 0.0], t);
        let p = |x: f64, y: f64| tg.pressure_at([x, y, 0.0], t);
        let u0 = u(x, y, t);
        for a in 0..2 {
            let ut = (u(x, y, t + h)[a] - u(x, y, t - h)[a]) / (2.0 * h);
            let ux = (u(x + h, y, t)[a] - u(x - h, y, t)[a]) / (2.0 * h);
            let uy = (u(x, y + h, t)[a] - u(x, y - h, t)[a]) / (2.0 * h);
            let lap = (u(x + h, y, t)[a] + u(x - h, y, t)[a] + u(x, y + h, t)[a] + u(x, y - h, t)[a] - 4.0 * u0[a]) / (h * h);
            let dp = if a == 0 { (p(x + h, y) - p(x - h, y)) / (2.0 * h) } else { (p(x, y + h) - p(x, y - h)) / (2.0 * h) };
            let res = ut + u0[0] * ux + u0[1] * uy + dp - tg.nu * lap;
            assert!(res.abs() < 1e-5, "{res:e}");
        }
    }
}
