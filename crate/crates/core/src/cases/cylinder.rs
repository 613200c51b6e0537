//! A rigid cylinder translating or rotating inside the closed cavity
//! [-1, 1]^2, with the mesh following the cylinder.

use crate::ale::{step, AleState, StepConfig, StepStats};
use crate::error::Result;
use crate::exec::Exec;
use crate::linsolve::solve_steady_stokes;
use crate::mesh::{build_cylinder_cavity, compute_metrics, CylinderMeshSpec, CYLINDER_DATA_ID};
use crate::motion::MeshMotionStrategy;
use crate::ops::{BoundaryData, BoundaryNodes, Operators};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CylinderMode {
    /// Constant velocity (speed, 0).
    Translate { speed: f64 },
    /// Counter-clockwise rotation about the initial center.
    Rotate { omega: f64 },
}

#[derive(Clone, Debug)]
pub struct CylinderParams {
    pub diameter: f64,
    pub mode: CylinderMode,
    pub re: f64,
    pub dt: f64,
    /// Elements are arranged in rings of 8; the element count is 8 * rings.
    pub rings: usize,
    pub order: usize,
    pub motion: MeshMotionStrategy,
    pub tol: f64,
}

impl Default for CylinderParams {
    fn default() -> Self {
        Self {
            diameter: 0.28,
            mode: CylinderMode::Translate { speed: 1.0 },
            re: 100.0,
            dt: 0.005,
            rings: 2,
            order: 8,
            motion: MeshMotionStrategy::Harmonic,
            tol: 1e-10,
        }
    }
}

impl CylinderParams {
    pub fn nu(&self) -> f64 {
        1.0 / self.re
    }

    pub fn num_elements(&self) -> usize {
        8 * self.rings
    }

    pub fn data(&self) -> CylinderData {
        CylinderData { mode: self.mode, center: [0.0, 0.0] }
    }
}

/// Rigid-body velocity on the cylinder, no slip on the cavity walls.
#[derive(Clone, Copy, Debug)]
pub struct CylinderData {
    pub mode: CylinderMode,
    pub center: [f64; 2],
}

impl CylinderData {
    pub fn center_at(&self, t: f64) -> [f64; 2] {
        match self.mode {
            CylinderMode::Translate { speed } => [self.center[0] + speed * t, self.center[1]],
            CylinderMode::Rotate { .. } => self.center,
        }
    }
}

impl BoundaryData for CylinderData {
    fn velocity(&self, id: u32, x: [f64; 3], _t: f64) -> [f64; 3] {
        if id != CYLINDER_DATA_ID {
            return [0.0; 3];
        }
        match self.mode {
            CylinderMode::Translate { speed } => [speed, 0.0, 0.0],
            CylinderMode::Rotate { omega } => [-omega * (x[1] - self.center[1]), omega * (x[0] - self.center[0]), 0.0],
        }
    }
}

/// Mesh plus the steady Stokes flow for the t = 0 boundary data.
pub fn cylinder_initial_state(p: &CylinderParams, exec: Exec) -> Result<AleState> {
    let mesh = build_cylinder_cavity(&CylinderMeshSpec {
        center: [0.0, 0.0],
        radius: 0.5 * p.diameter,
        half_width: 1.0,
        rings: p.rings,
        order: p.order,
    })?;
    let metrics = compute_metrics(&mesh, exec)?;
    let (u, pr) = {
        let ops = Operators::new(&mesh, &metrics, exec)?;
        let nodes = BoundaryNodes::new(&mesh);
        let (u, pr, _) = solve_steady_stokes(&ops, &nodes, &p.data(), p.nu(), 0.0, p.tol)?;
        (u.data, pr.data)
    };
    AleState::new(mesh, u, pr, 0.0, exec)
}

/// Run `steps` steps, calling `observe` after each.
pub fn run_cylinder(
    p: &CylinderParams,
    steps: usize,
    exec: Exec,
    mut observe: impl FnMut(&AleState, &StepStats) -> Result<()>,
) -> Result<AleState> {
    let data = p.data();
    let mut state = cylinder_initial_state(p, exec)?;
    let cfg = StepConfig { dt: p.dt, nu: p.nu(), data: &data, motion: p.motion.clone(), tol: p.tol, motion_tol: p.tol, exec };
    for _ in 0..steps {
        let st = step(&mut state, &cfg)?;
        observe(&state, &st)?;
    }
    Ok(state)
}
