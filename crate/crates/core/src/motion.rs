//! Mesh velocity from boundary data, Adams-Bashforth position updates and
//! the Euler expansion ODE for the mapping Jacobian.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Result, SemError};
use crate::field::axpy;
use crate::linsolve::{cg_solve_strict, stokes_solve, CgOptions, FrozenStokes, StokesGuess, LinearOperator, Preconditioner, StokesProblem, StokesTolerances};
use crate::ops::{BoundaryData, BoundaryNodes, Operators};

/// Mesh velocity as a function of reference position and time.
pub type PrescribedMotion = Arc<dyn Fn([f64; 3], f64) -> [f64; 3] + Send + Sync>;

#[derive(Clone)]
pub enum MeshMotionStrategy {
    /// Componentwise Laplace problem for w.
    Harmonic,
    /// Steady Stokes problem for w, giving a discretely divergence-free w.
    SteadyStokes,
    /// Analytic w(Y, t), Y the reference position of the node.
    Prescribed(PrescribedMotion),
    /// w = 0 (Eulerian).
    Fixed,
}

impl std::fmt::Debug for MeshMotionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Harmonic => write!(f, "Harmonic"),
            Self::SteadyStokes => write!(f, "SteadyStokes"),
            Self::Prescribed(_) => write!(f, "Prescribed"),
            Self::Fixed => write!(f, "Fixed"),
        }
    }
}

/// Mesh-velocity boundary values: Dirichlet data where prescribed, the fluid
/// velocity on moving (sigma) boundaries, zero normal component on free-slip
/// walls. Unconstrained entries are zero.
pub fn motion_boundary_values(ops: &Operators, nodes: &BoundaryNodes, data: &dyn BoundaryData, u: &[f64], t: f64) -> Vec<f64> {
    let mesh = ops.mesh;
    let ng = mesh.nglobal();
    let dim = mesh.dim();
    let mut w = vec![0.0; dim * ng];
    for g in 0..ng {
        if let Some(id) = nodes.dirichlet[g] {
            let v = data.velocity(id, mesh.node(g), t);
            for a in 0..dim {
                w[a * ng + g] = v[a];
            }
        } else if nodes.sigma[g] {
            for a in 0..dim {
                w[a * ng + g] = u[a * ng + g];
            }
        }
    }
    w
}

struct MaskedLaplacian<'a> {
    ops: &'a Operators<'a>,
    mask: &'a [f64],
}

impl LinearOperator for MaskedLaplacian<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let xm: Vec<f64> = x.iter().zip(self.mask).map(|(a, m)| a * m).collect();
        let k = self.ops.laplacian_apply(&xm, 1.0);
        for ((yi, ki), m) in y.iter_mut().zip(&k).zip(self.mask) {
            *yi = ki * m;
        }
    }
}

/// Previous mesh-velocity solution, used to warm-start the next solve.
#[derive(Clone, Debug, Default)]
pub struct MotionCache {
    pub w: Option<Vec<f64>>,
    /// Pressure of the mesh Stokes problem.
    pub pressure: Option<Vec<f64>>,
    /// Preconditioner factored on an earlier mesh; rebuilt once it stops
    /// paying off.
    pub frozen: Option<FrozenStokes>,
    frozen_unavailable: bool,
}

/// Compute the mesh velocity at time `t` on the current mesh. `u` is the
/// fluid velocity (used on moving boundaries).
pub fn mesh_velocity(
    ops: &Operators,
    nodes: &BoundaryNodes,
    strategy: &MeshMotionStrategy,
    data: &dyn BoundaryData,
    u: &[f64],
    t: f64,
    tol: f64,
    cache: &mut MotionCache,
) -> Result<Vec<f64>> {
    let mesh = ops.mesh;
    let dim = mesh.dim();
    let ng = mesh.nglobal();
    match strategy {
        MeshMotionStrategy::Fixed => Ok(vec![0.0; dim * ng]),
        MeshMotionStrategy::Prescribed(f) => {
            let mut w = vec![0.0; dim * ng];
            for g in 0..ng {
                let v = f(mesh.ref_node(g), t);
                for a in 0..dim {
                    w[a * ng + g] = v[a];
                }
            }
            Ok(w)
        }
        MeshMotionStrategy::Harmonic => {
            let mask = nodes.motion_mask(dim);
            let wb = motion_boundary_values(ops, nodes, data, u, t);
            let mut rhs = ops.laplacian_apply(&wb, 1.0);
            for (r, m) in rhs.iter_mut().zip(&mask) {
                *r = -*r * m;
            }
            let ld = ops.laplacian_diag(1.0);
            let inv: Vec<f64> = mask.iter().enumerate().map(|(i, m)| m / ld[i % ng]).collect();
            let mut w0: Vec<f64> = match &cache.w {
                Some(gs) => gs.iter().zip(&mask).map(|(a, m)| a * m).collect(),
                None => vec![0.0; dim * ng],
            };
            let op = MaskedLaplacian { ops, mask: &mask };
            let opts = CgOptions { tol, maxit: 4000, ..Default::default() };
            cg_solve_strict("mesh Laplace CG", &op, &rhs, &mut w0, &Preconditioner::Jacobi(&inv), opts)?;
            axpy(1.0, &wb, &mut w0);
            cache.w = Some(w0.clone());
            Ok(w0)
        }
        MeshMotionStrategy::SteadyStokes => {
            let mask = nodes.motion_mask(dim);
            let wb = motion_boundary_values(ops, nodes, data, u, t);
            let mut f = ops.stiffness_apply(&wb, 1.0);
            f.iter_mut().for_each(|v| *v = -*v);
            let g: Vec<f64> = ops.divergence_apply(&wb).into_iter().map(|v| -v).collect();
            let mut prob = StokesProblem { ops, mask: &mask, nu: 1.0, sigma: 0.0, pressure_nullspace: true, project_constant: true, frozen: None };
            if cache.frozen.is_none() && !cache.frozen_unavailable {
                cache.frozen = FrozenStokes::build(&prob);
                cache.frozen_unavailable = cache.frozen.is_none();
            }
            prob.frozen = cache.frozen.as_ref();
            let w0 = cache.w.as_ref().map(|w| w.iter().zip(&wb).map(|(a, b)| a - b).collect::<Vec<f64>>());
            let guess = StokesGuess { p: cache.pressure.as_deref(), u0: w0.as_deref() };
            let sol = stokes_solve(&prob, &f, &g, guess, StokesTolerances::new(tol))?;
            if sol.report.iterations > 6 || sol.inner_iterations > 10 * (sol.report.iterations + 2) {
                cache.frozen = None;
            }
            let mut w = sol.u0;
            axpy(1.0, &wb, &mut w);
            cache.pressure = Some(sol.p);
            cache.w = Some(w.clone());
            Ok(w)
        }
    }
}

/// Adams-Bashforth weights for `levels` available history levels (newest
/// first): forward Euler, AB2, AB3.
pub fn ab_coefficients(levels: usize) -> &'static [f64] {
    const AB1: [f64; 1] = [1.0];
    const AB2: [f64; 2] = [1.5, -0.5];
    const AB3: [f64; 3] = [23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0];
    match levels {
        0 => &[],
        1 => &AB1,
        2 => &AB2,
        _ => &AB3,
    }
}

/// x <- x + dt * sum_i c_i w_{n-i}, with `w_hist` newest first (at most three
/// levels used). Positions and velocities are component-major.
pub fn advance_positions_ab3(positions: &[Vec<f64>], w_hist: &[&[f64]], dt: f64) -> Vec<Vec<f64>> {
    let coef = ab_coefficients(w_hist.len());
    let ng = positions.first().map_or(0, |p| p.len());
    positions
        .iter()
        .enumerate()
        .map(|(a, xa)| {
            let mut x = xa.clone();
            for (c, w) in coef.iter().zip(w_hist) {
                axpy(dt * c, &w[a * ng..(a + 1) * ng], &mut x);
            }
            x
        })
        .collect()
}

/// Tracked ALE Jacobian at every element-local GLL node.
#[derive(Clone, Debug)]
pub struct JacobianTrack {
    pub values: Vec<f64>,
    /// J div w at previous levels, newest first.
    history: VecDeque<Vec<f64>>,
}

impl JacobianTrack {
    pub fn new(npoints: usize) -> Self {
        Self { values: vec![1.0; npoints], history: VecDeque::new() }
    }

    /// Preload J div w at earlier levels (newest first), e.g. from an exact
    /// solution, so the first step already uses the full AB3 stencil.
    pub fn seed_history(&mut self, levels: Vec<Vec<f64>>) {
        self.history = levels.into();
        self.history.truncate(2);
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One step of dJ/dt = J div w with the Adams-Bashforth ladder. `div_w` is
/// the pointwise divergence of the current mesh velocity.
pub fn evolve_jacobian(track: &mut JacobianTrack, div_w: &[f64], dt: f64, t: f64) -> Result<()> {
    let f: Vec<f64> = track.values.iter().zip(div_w).map(|(j, d)| j * d).collect();
    track.history.push_front(f);
    track.history.truncate(3);
    let coef = ab_coefficients(track.history.len());
    for (c, h) in coef.iter().zip(&track.history) {
        axpy(dt * c, h, &mut track.values);
    }
    if let Some((i, &j)) = track.values.iter().enumerate().find(|(_, &j)| j <= 0.0 || !j.is_finite()) {
        return Err(SemError::MeshInversion { t, detail: format!("tracked Jacobian {j:e} at local node {i}") });
    }
    Ok(())
}
