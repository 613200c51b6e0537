//! Unsteady ALE Navier-Stokes stepper: BDF2 on d(Mu)/dt, explicit
//! second-order extrapolation of convection, AB3 mesh motion and an
//! incremental pressure-correction split.

use std::collections::VecDeque;

use crate::error::{Result, SemError};
use crate::exec::Exec;
use crate::field::{axpy, dot};
use nalgebra::{Cholesky, Dyn};

use crate::linsolve::{
    cg_solve_strict, factor_operator, CgOptions, Deflation, FnOperator, FrozenStokes, HelmholtzOp, LinearOperator, Preconditioner,
};
use crate::mesh::{compute_metrics, GeometryMetrics, Mesh};
use crate::motion::{advance_positions_ab3, evolve_jacobian, mesh_velocity, JacobianTrack, MeshMotionStrategy, MotionCache};
use crate::ops::{lift_dirichlet, BoundaryData, BoundaryNodes, Operators};

pub struct StepConfig<'a> {
    pub dt: f64,
    pub nu: f64,
    pub data: &'a dyn BoundaryData,
    pub motion: MeshMotionStrategy,
    /// Relative tolerance of the velocity and pressure solves.
    pub tol: f64,
    /// Relative tolerance of the mesh-velocity solve.
    pub motion_tol: f64,
    pub exec: Exec,
}

/// Diagnostics of one step, all at the new time level.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub t: f64,
    pub l2_norm: f64,
    pub acceleration: f64,
    pub helmholtz_iterations: usize,
    pub pressure_iterations: usize,
    pub min_det: f64,
    /// max |J_ale - det(dx/dY)| over all GLL nodes.
    pub jacobian_mismatch: f64,
    /// max |J_ale - 1|.
    pub jacobian_deviation: f64,
    /// Net boundary flux of the new velocity.
    pub compatibility: f64,
    /// Euclidean norm of B u after the correction.
    pub divergence: f64,
    pub volume: f64,
}

pub struct AleState {
    pub t: f64,
    pub step: usize,
    pub mesh: Mesh,
    pub metrics: GeometryMetrics,
    pub nodes: BoundaryNodes,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub jacobian: JacobianTrack,
    mu_prev: Option<Vec<f64>>,
    conv_prev: Option<Vec<f64>>,
    /// Mesh velocities, newest first.
    w_hist: VecDeque<Vec<f64>>,
    motion_cache: MotionCache,
    det0: Vec<f64>,
    /// Factored pressure operator from an earlier mesh, used as the
    /// pressure preconditioner while it stays effective.
    pressure_frozen: Option<Cholesky<f64, Dyn>>,
    /// Mean removed from the stored pressure. On curved meshes the constant
    /// is not in the kernel of the gradient, so the predictor needs it back.
    pressure_offset: f64,
}

fn inversion(t: f64, e: SemError) -> SemError {
    match e {
        SemError::TangledElement { .. } => SemError::MeshInversion { t, detail: e.to_string() },
        other => other,
    }
}

impl AleState {
    /// Start from velocity `u` (component-major on the mesh nodes) and
    /// pressure `p` at time `t`. The current mesh is the reference
    /// configuration for the Jacobian.
    pub fn new(mesh: Mesh, u: Vec<f64>, p: Vec<f64>, t: f64, exec: Exec) -> Result<Self> {
        let metrics = compute_metrics(&mesh, exec)?;
        let nodes = BoundaryNodes::new(&mesh);
        let n = mesh.dim() * mesh.nglobal();
        if u.len() != n || p.len() != mesh.num_elements() * mesh.reference.npp() {
            return Err(SemError::InvalidMesh("initial fields do not match the mesh".into()));
        }
        let det0 = metrics.det.clone();
        Ok(Self {
            t,
            step: 0,
            jacobian: JacobianTrack::new(det0.len()),
            mesh,
            metrics,
            nodes,
            u,
            p,
            mu_prev: None,
            conv_prev: None,
            w_hist: VecDeque::new(),
            motion_cache: MotionCache::default(),
            det0,
            pressure_frozen: None,
            pressure_offset: 0.0,
        })
    }

    pub fn operators(&self, exec: Exec) -> Result<Operators<'_>> {
        Operators::new(&self.mesh, &self.metrics, exec)
    }

    /// Geometric Jacobian det(dx/dY) at every element-local GLL node.
    pub fn geometric_jacobian(&self) -> Vec<f64> {
        self.metrics.det.iter().zip(&self.det0).map(|(d, d0)| d / d0).collect()
    }

    pub fn last_mesh_velocity(&self) -> Option<&[f64]> {
        self.w_hist.front().map(|v| v.as_slice())
    }
}

/// ||u_next - u_prev||_L2 / dt on the mesh of `ops`.
pub fn acceleration_metric(ops: &Operators, u_next: &[f64], u_prev: &[f64], dt: f64) -> f64 {
    let d: Vec<f64> = u_next.iter().zip(u_prev).map(|(a, b)| a - b).collect();
    ops.l2_norm(&d) / dt
}

/// sqrt(<M u, u>).
pub fn l2_norm(ops: &Operators, u: &[f64]) -> f64 {
    ops.l2_norm(u)
}

/// Advance the state by one time step.
pub fn step(state: &mut AleState, cfg: &StepConfig) -> Result<StepStats> {
    let dt = cfg.dt;
    if !(dt > 0.0) || !(cfg.nu > 0.0) {
        return Err(SemError::Config(format!("dt = {dt} and nu = {} must be positive", cfg.nu)));
    }
    let exec = cfg.exec;
    let dim = state.mesh.dim();
    let t1 = state.t + dt;
    let moving = !matches!(cfg.motion, MeshMotionStrategy::Fixed);

    // Level n quantities on the current mesh.
    let (mu_n, conv_n) = {
        let ops = Operators::new(&state.mesh, &state.metrics, exec)?;
        let mu = ops.mass_apply(&state.u);
        let conv = if moving {
            let w = mesh_velocity(
                &ops,
                &state.nodes,
                &cfg.motion,
                cfg.data,
                &state.u,
                state.t,
                cfg.motion_tol,
                &mut state.motion_cache,
            )?;
            let conv = ops.convective_apply(&state.u, Some(&w));
            let divw = ops.pointwise_divergence(&w);
            evolve_jacobian(&mut state.jacobian, &divw, dt, t1)?;
            state.w_hist.push_front(w);
            state.w_hist.truncate(3);
            conv
        } else {
            ops.convective_apply(&state.u, None)
        };
        (mu, conv)
    };

    if moving {
        let hist: Vec<&[f64]> = state.w_hist.iter().map(|v| v.as_slice()).collect();
        let x = advance_positions_ab3(state.mesh.coords(), &hist, dt);
        state.mesh.set_coords(x);
        state.metrics = compute_metrics(&state.mesh, exec).map_err(|e| inversion(t1, e))?;
    }

    let ops = Operators::new(&state.mesh, &state.metrics, exec)?;
    let ng = ops.ng();
    let (beta0, rhs_hist) = match (&state.mu_prev, &state.conv_prev) {
        (Some(mp), Some(cp)) => {
            let mut r: Vec<f64> = mu_n.iter().zip(mp).map(|(a, b)| (2.0 * a - 0.5 * b) / dt).collect();
            for ((ri, c), cp) in r.iter_mut().zip(&conv_n).zip(cp) {
                *ri -= 2.0 * c - cp;
            }
            (1.5, r)
        }
        _ => {
            let r: Vec<f64> = mu_n.iter().zip(&conv_n).map(|(a, c)| a / dt - c).collect();
            (1.0, r)
        }
    };
    let sigma = beta0 / dt;

    let mut rhs = ops.force_dual(cfg.data, t1);
    axpy(1.0, &rhs_hist, &mut rhs);
    let lift = lift_dirichlet(&ops, &state.nodes, cfg.data, t1, cfg.nu, sigma, None);
    axpy(1.0, &lift.rhs1, &mut rhs);
    let p_full: Vec<f64> = state.p.iter().map(|v| v + state.pressure_offset).collect();
    axpy(-1.0, &ops.gradient_apply(&p_full), &mut rhs);

    let mask = state.nodes.fluid_mask(dim);
    rhs.iter_mut().zip(&mask).for_each(|(r, m)| *r *= m);
    let h = HelmholtzOp { ops: &ops, mask: &mask, nu: cfg.nu, sigma };
    let hinv = h.inv_diag();
    let mut ustar: Vec<f64> = state.u.iter().zip(&mask).map(|(a, m)| a * m).collect();
    let opts = CgOptions { tol: cfg.tol, maxit: 5000, ..Default::default() };
    let hrep = cg_solve_strict("Helmholtz CG", &h, &rhs, &mut ustar, &Preconditioner::Jacobi(&hinv), opts)?;
    axpy(1.0, &lift.u_b, &mut ustar);

    // Pressure correction: (B M^-1 B^T) dp = sigma B u*.
    let minv: Vec<f64> = mask.iter().enumerate().map(|(i, m)| m / ops.mass_diag[i % ng]).collect();
    let ed = ops.schur_diag(&minv);
    let einv: Vec<f64> = ed.iter().map(|d| if *d > 0.0 { 1.0 / d } else { 0.0 }).collect();
    let eop = FnOperator(|q: &[f64], y: &mut [f64]| {
        let mut g = ops.gradient_apply(q);
        g.iter_mut().zip(&minv).for_each(|(v, s)| *v *= s);
        y.copy_from_slice(&ops.divergence_apply(&g));
    });
    let rhs_p: Vec<f64> = ops.divergence_apply(&ustar).into_iter().map(|v| sigma * v).collect();
    let np = rhs_p.len();
    let ones = vec![1.0; np];
    let closed = !state.nodes.has_sigma();
    let exact_null = closed && ops.constant_pressure_is_null(&minv);
    let mut dp = vec![0.0; np];
    let e_ones = (closed && !exact_null).then(|| {
        let mut y = vec![0.0; np];
        eop.apply(&ones, &mut y);
        y
    });
    let deflation = e_ones.as_deref().map(|az| Deflation { z: &ones, az });
    let popts = CgOptions { tol: cfg.tol, maxit: 5000, nullspace: exact_null.then_some(ones.as_slice()), deflation };
    if state.pressure_frozen.is_none() && np <= FrozenStokes::MAX_SIZE {
        state.pressure_frozen = factor_operator(&eop, np, closed);
    }
    let ppre = match &state.pressure_frozen {
        Some(c) => Preconditioner::Dense(c),
        None => Preconditioner::Jacobi(&einv),
    };
    let prep = if rhs_p.iter().any(|v| *v != 0.0) {
        cg_solve_strict("pressure correction CG", &eop, &rhs_p, &mut dp, &ppre, popts)?
    } else {
        Default::default()
    };
    if prep.iterations > 25 {
        state.pressure_frozen = None;
    }
    let mut corr = ops.gradient_apply(&dp);
    corr.iter_mut().zip(&minv).for_each(|(v, s)| *v *= s / sigma);
    let mut u_new = ustar;
    axpy(-1.0, &corr, &mut u_new);
    let mut p_new = p_full;
    axpy(1.0, &dp, &mut p_new);
    state.pressure_offset = 0.0;
    if closed {
        let w = &state.metrics.wdet_gl;
        let mean = dot(&p_new, w) / w.iter().sum::<f64>();
        p_new.iter_mut().for_each(|v| *v -= mean);
        if !exact_null {
            state.pressure_offset = mean;
        }
    }

    let geo = state.geometric_jacobian();
    let jv = &state.jacobian.values;
    let stats = StepStats {
        t: t1,
        l2_norm: ops.l2_norm(&u_new),
        acceleration: acceleration_metric(&ops, &u_new, &state.u, dt),
        helmholtz_iterations: hrep.iterations,
        pressure_iterations: prep.iterations,
        min_det: state.metrics.min_det(),
        jacobian_mismatch: jv.iter().zip(&geo).fold(0.0, |m, (a, b)| m.max((a - b).abs())),
        jacobian_deviation: jv.iter().fold(0.0, |m, a| m.max((a - 1.0).abs())),
        compatibility: ops.compatibility_check(&u_new),
        divergence: crate::field::norm(&ops.divergence_apply(&u_new)),
        volume: state.metrics.volume(),
    };
    drop(ops);
    log::info!(
        "t={:.6} |u|={:.6e} accel={:.6e} its={}/{} minJ={:.4e} Jmis={:.3e}",
        stats.t,
        stats.l2_norm,
        stats.acceleration,
        stats.helmholtz_iterations,
        stats.pressure_iterations,
        stats.min_det,
        stats.jacobian_mismatch
    );

    state.mu_prev = Some(mu_n);
    state.conv_prev = Some(conv_n);
    state.u = u_new;
    state.p = p_new;
    state.t = t1;
    state.step += 1;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box_mesh;
    use crate::ops::NoData;

    fn cfg(data: &dyn BoundaryData) -> StepConfig<'_> {
        StepConfig { dt: 0.01, nu: 0.1, data, motion: MeshMotionStrategy::Fixed, tol: 1e-10, motion_tol: 1e-10, exec: Exec::Serial }
    }

    #[test]
    fn zero_state_stays_zero() {
        let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[2, 2], 5, 2).unwrap();
        let n = 2 * mesh.nglobal();
        let np = mesh.num_elements() * mesh.reference.npp();
        let mut s = AleState::new(mesh, vec![0.0; n], vec![0.0; np], 0.0, Exec::Serial).unwrap();
        for _ in 0..5 {
            let st = step(&mut s, &cfg(&NoData)).unwrap();
            assert_eq!(st.l2_norm, 0.0);
        }
        assert!(s.u.iter().chain(&s.p).all(|v| *v == 0.0));
    }

    #[test]
    fn acceleration_examples() {
        let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[2, 2], 4, 2).unwrap();
        let m = compute_metrics(&mesh, Exec::Serial).unwrap();
        let ops = Operators::new(&mesh, &m, Exec::Serial).unwrap();
        let ng = ops.ng();
        let mut a = vec![0.0; 2 * ng];
        a[..ng].iter_mut().for_each(|v| *v = 1.0);
        let z = vec![0.0; 2 * ng];
        assert!((acceleration_metric(&ops, &a, &z, 0.5) - 4.0).abs() < 1e-13);
        assert_eq!(acceleration_metric(&ops, &a, &a, 0.5), 0.0);
        assert!((l2_norm(&ops, &a) - 2.0).abs() < 1e-13);
        let a3: Vec<f64> = a.iter().map(|v| 3.0 * v).collect();
        let lhs = acceleration_metric(&ops, &a3, &z, 0.1);
        assert!((lhs - 3.0 * acceleration_metric(&ops, &a, &z, 0.1)).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_dt_rejected() {
        let mesh = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[1, 1], 3, 2).unwrap();
        let n = 2 * mesh.nglobal();
        let np = mesh.reference.npp();
        let mut s = AleState::new(mesh, vec![0.0; n], vec![0.0; np], 0.0, Exec::Serial).unwrap();
        let mut c = cfg(&NoData);
        c.dt = -0.01;
        assert!(matches!(step(&mut s, &c), Err(SemError::Config(_))));
    }
}
