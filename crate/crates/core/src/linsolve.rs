//! Preconditioned conjugate gradients and a nested Uzawa solver for
//! Stokes-type saddle-point problems.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::field::{axpy, dot, norm, PressureField, VelocityField};
use crate::ops::{lift_dirichlet, BoundaryData, BoundaryNodes, Operators};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("CG breakdown at iteration {iteration}: p^T A p = {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e}, tol {tol:e})")]
    NotConverged { solver: &'static str, iterations: usize, residual: f64, tol: f64 },

    #[error("incompatible boundary data: net flux {flux:e}")]
    Incompatible { flux: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// A linear operator on flat vectors. Masked (Dirichlet) entries are the
/// operator's business: it should map them to zero.
pub trait LinearOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn symmetric(&self) -> bool {
        true
    }
}

/// Wrap a closure as an operator.
pub struct FnOperator<F: Fn(&[f64], &mut [f64])>(pub F);

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.0)(x, y)
    }
}

pub enum Preconditioner<'a> {
    Identity,
    /// Multiply by the given inverse diagonal.
    Jacobi(&'a [f64]),
    /// Solve with a factorized approximation of the operator.
    Dense(&'a Cholesky<f64, Dyn>),
}

impl Preconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Identity => z.copy_from_slice(r),
            Preconditioner::Jacobi(d) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(d.iter()) {
                    *zi = ri * di;
                }
            }
            Preconditioner::Dense(c) => {
                let mut v = DVector::from_column_slice(r);
                c.solve_mut(&mut v);
                z.copy_from_slice(v.as_slice());
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CgOptions<'a> {
    pub tol: f64,
    pub maxit: usize,
    /// Euclidean null vector to project out of residuals and iterates.
    pub nullspace: Option<&'a [f64]>,
    /// Near-null vector solved for exactly at every iteration.
    pub deflation: Option<Deflation<'a>>,
}

/// Deflation vector `z` and its image `A z`.
#[derive(Clone, Copy, Debug)]
pub struct Deflation<'a> {
    pub z: &'a [f64],
    pub az: &'a [f64],
}

impl Deflation<'_> {
    /// Coefficient c with z^T (v - c A z) = 0, i.e. (z^T v) / (z^T A z).
    fn coarse(&self, v: &[f64]) -> f64 {
        dot(self.z, v) / dot(self.z, self.az)
    }

    /// (A z)^T v / (z^T A z).
    fn a_coarse(&self, v: &[f64]) -> f64 {
        dot(self.az, v) / dot(self.z, self.az)
    }
}

impl Default for CgOptions<'_> {
    fn default() -> Self {
        Self { tol: 1e-10, maxit: 2000, nullspace: None, deflation: None }
    }
}

fn project(v: &mut [f64], z: Option<&[f64]>) {
    if let Some(z) = z {
        let c = dot(v, z) / dot(z, z);
        axpy(-c, z, v);
    }
}

/// Solve `A x = b`; `x` holds the initial guess on entry. Stops when the
/// relative residual drops below `tol` or after `maxit` iterations (with
/// `converged = false`).
pub fn cg_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    precond: &Preconditioner,
    opts: CgOptions,
) -> Result<SolveReport, SolveError> {
    let n = b.len();
    let mut bb = b.to_vec();
    project(&mut bb, opts.nullspace);
    let bnorm = norm(&bb);
    let mut report = SolveReport::default();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        report.converged = true;
        return Ok(report);
    }
    project(x, opts.nullspace);
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(&bb) {
        *ri = bi - *ri;
    }
    project(&mut r, opts.nullspace);
    if let Some(d) = opts.deflation {
        let c = d.coarse(&r);
        axpy(c, d.z, x);
        axpy(-c, d.az, &mut r);
    }
    let mut rel = norm(&r) / bnorm;
    report.history.push(rel);
    if rel <= opts.tol {
        report.residual = rel;
        report.converged = true;
        return Ok(report);
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    project(&mut z, opts.nullspace);
    let mut p = z.clone();
    if let Some(d) = opts.deflation {
        axpy(-d.a_coarse(&z), d.z, &mut p);
    }
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=opts.maxit {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(SolveError::Breakdown { iteration: it, curvature: pap });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        project(&mut r, opts.nullspace);
        rel = norm(&r) / bnorm;
        report.history.push(rel);
        report.iterations = it;
        if rel <= opts.tol {
            break;
        }
        precond.apply(&r, &mut z);
        project(&mut z, opts.nullspace);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        if let Some(d) = opts.deflation {
            axpy(-d.a_coarse(&z), d.z, &mut p);
        }
    }
    project(x, opts.nullspace);
    report.residual = rel;
    report.converged = rel <= opts.tol;
    Ok(report)
}

/// Like [`cg_solve`] but treats hitting `maxit` as an error.
pub fn cg_solve_strict(
    solver: &'static str,
    a: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    precond: &Preconditioner,
    opts: CgOptions,
) -> Result<SolveReport, SolveError> {
    let rep = cg_solve(a, b, x, precond, opts)?;
    if !rep.converged {
        return Err(SolveError::NotConverged { solver, iterations: rep.iterations, residual: rep.residual, tol: opts.tol });
    }
    Ok(rep)
}

/// Masked velocity block `sigma M + nu K`.
pub struct HelmholtzOp<'a> {
    pub ops: &'a Operators<'a>,
    pub mask: &'a [f64],
    pub nu: f64,
    pub sigma: f64,
}

impl HelmholtzOp<'_> {
    /// Inverse Jacobi diagonal on free entries (0 on masked ones).
    pub fn inv_diag(&self) -> Vec<f64> {
        let ng = self.ops.ng();
        let k = self.ops.stiffness_diag(self.nu);
        k.iter()
            .enumerate()
            .map(|(i, kd)| {
                let d = kd + self.sigma * self.ops.mass_diag[i % ng];
                self.mask[i] / d
            })
            .collect()
    }
}

impl LinearOperator for HelmholtzOp<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let xm: Vec<f64> = x.iter().zip(self.mask).map(|(a, m)| a * m).collect();
        let mut k = self.ops.stiffness_apply(&xm, self.nu);
        if self.sigma != 0.0 {
            let mx = self.ops.mass_apply(&xm);
            axpy(self.sigma, &mx, &mut k);
        }
        for ((yi, ki), m) in y.iter_mut().zip(&k).zip(self.mask) {
            *yi = ki * m;
        }
    }
}

/// Saddle-point problem `[H B^T; B 0] [u0; p] = [f; g]` with
/// `H = sigma M + nu K` on the masked velocity space.
pub struct StokesProblem<'a> {
    pub ops: &'a Operators<'a>,
    pub mask: &'a [f64],
    pub nu: f64,
    pub sigma: f64,
    /// Pressure is only defined up to a constant (no natural boundary).
    pub pressure_nullspace: bool,
    /// With a pressure nullspace on curved elements the constant is only
    /// nearly null. By default its constraint is then enforced exactly;
    /// setting this projects it out instead, as on affine meshes.
    pub project_constant: bool,
    /// Factorization from a nearby geometry, replacing both Jacobi
    /// preconditioners.
    pub frozen: Option<&'a FrozenStokes>,
}

/// Assemble a symmetric operator column by column and factor it. With
/// `constant_shift` the constant vector is lifted by the mean diagonal so a
/// (near-)null constant mode does not spoil the factorization.
pub fn factor_operator(op: &dyn LinearOperator, n: usize, constant_shift: bool) -> Option<Cholesky<f64, Dyn>> {
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        a.column_mut(j).copy_from_slice(&col);
    }
    let mut a = (&a + a.transpose()) * 0.5;
    if constant_shift {
        let shift = a.trace() / (n * n) as f64;
        a.add_scalar_mut(shift);
    }
    Cholesky::new(a)
}

/// Dense Cholesky factors of the masked velocity block `H` and of the Schur
/// complement `B H^-1 B^T` (shifted along the constant mode when the
/// pressure has one). Only sensible for small problems.
#[derive(Clone, Debug)]
pub struct FrozenStokes {
    h: Cholesky<f64, Dyn>,
    s: Cholesky<f64, Dyn>,
}

impl FrozenStokes {
    /// Largest velocity plus pressure size for which [`FrozenStokes::build`]
    /// is attempted.
    pub const MAX_SIZE: usize = 4000;

    /// Assemble and factor. Returns `None` when the problem is too large or
    /// a factorization fails.
    pub fn build(prob: &StokesProblem) -> Option<Self> {
        let ops = prob.ops;
        let nv = prob.mask.len();
        let np = ops.metrics.wdet_gl.len();
        if nv + np > Self::MAX_SIZE {
            return None;
        }
        let hop = HelmholtzOp { ops, mask: prob.mask, nu: prob.nu, sigma: prob.sigma };
        let mut hm = DMatrix::<f64>::zeros(nv, nv);
        let mut e = vec![0.0; nv];
        let mut col = vec![0.0; nv];
        for j in 0..nv {
            if prob.mask[j] == 0.0 {
                hm[(j, j)] = 1.0;
                continue;
            }
            e[j] = 1.0;
            hop.apply(&e, &mut col);
            e[j] = 0.0;
            hm.column_mut(j).copy_from_slice(&col);
        }
        let hm = (&hm + hm.transpose()) * 0.5;
        let h = Cholesky::new(hm)?;
        let mut sm = DMatrix::<f64>::zeros(np, np);
        let mut q = vec![0.0; np];
        for j in 0..np {
            q[j] = 1.0;
            let bt: Vec<f64> = ops.gradient_apply(&q).iter().zip(prob.mask).map(|(a, m)| a * m).collect();
            q[j] = 0.0;
            let mut v = DVector::from_vec(bt);
            h.solve_mut(&mut v);
            sm.column_mut(j).copy_from_slice(&ops.divergence_apply(v.as_slice()));
        }
        let mut sm = (&sm + sm.transpose()) * 0.5;
        if prob.pressure_nullspace {
            let shift = sm.trace() / (np * np) as f64;
            sm.add_scalar_mut(shift);
        }
        let s = Cholesky::new(sm)?;
        Some(Self { h, s })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StokesTolerances {
    pub outer: f64,
    pub inner: f64,
    pub maxit: usize,
}

impl StokesTolerances {
    pub fn new(tol: f64) -> Self {
        Self { outer: tol, inner: (tol * 1e-2).max(1e-14), maxit: 2000 }
    }
}

/// Solution of a Stokes solve: homogeneous velocity part and pressure.
pub struct StokesSolution {
    pub u0: Vec<f64>,
    pub p: Vec<f64>,
    pub report: SolveReport,
    pub inner_iterations: usize,
}

/// Initial guesses for [`stokes_solve`].
#[derive(Clone, Copy, Debug, Default)]
pub struct StokesGuess<'a> {
    pub p: Option<&'a [f64]>,
    /// Homogeneous velocity, used to start the first inner solve.
    pub u0: Option<&'a [f64]>,
}

/// Uzawa iteration on the pressure Schur complement `S = B H^-1 B^T`, solved
/// by CG preconditioned with `nu (w_q J_q)^-1`; every application of `S`
/// performs an inner CG solve with `H`. The velocity `H^-1 (f - B^T p)` is
/// updated alongside the pressure iterates, so the Schur residual is simply
/// `B u - g`.
///
/// `f` is the velocity right-hand side (already including lifting terms),
/// `g` the continuity right-hand side (`-B u_b`). The outer tolerance is
/// relative to `||g||`, or to the initial residual when `g = 0`. When the
/// pressure has a nullspace the returned pressure has zero quadrature mean.
pub fn stokes_solve(
    prob: &StokesProblem,
    f: &[f64],
    g: &[f64],
    guess: StokesGuess,
    tol: StokesTolerances,
) -> Result<StokesSolution, SolveError> {
    let ops = prob.ops;
    let ng = ops.ng();
    let h = HelmholtzOp { ops, mask: prob.mask, nu: prob.nu, sigma: prob.sigma };
    let hdiag = if prob.frozen.is_some() { Vec::new() } else { h.inv_diag() };
    let hpre = match prob.frozen {
        Some(fz) => Preconditioner::Dense(&fz.h),
        None => Preconditioner::Jacobi(&hdiag),
    };
    let np = g.len();
    let nv = f.len();
    let ones = vec![1.0; np];
    let exact_null = prob.pressure_nullspace && {
        let scale: Vec<f64> = prob.mask.iter().enumerate().map(|(i, m)| m / ops.mass_diag[i % ng]).collect();
        ops.constant_pressure_is_null(&scale)
    };
    let projected = exact_null || (prob.pressure_nullspace && prob.project_constant);
    let null = projected.then_some(ones.as_slice());
    if exact_null {
        let flux: f64 = g.iter().sum();
        let scale = g.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
        if flux.abs() > 1e-6 * scale.max(1.0) {
            return Err(SolveError::Incompatible { flux });
        }
    }
    let inner_opts = CgOptions { tol: tol.inner, maxit: tol.maxit, ..Default::default() };
    let mut inner_its = 0;
    let mut hsolve = |rhs: &[f64], x: &mut [f64]| -> Result<(), SolveError> {
        let rm: Vec<f64> = rhs.iter().zip(prob.mask).map(|(a, m)| a * m).collect();
        let rep = cg_solve_strict("inner velocity CG", &h, &rm, x, &hpre, inner_opts)?;
        inner_its += rep.iterations;
        Ok(())
    };
    // v = H^-1 B^T q
    let hbt = |q: &[f64], hs: &mut dyn FnMut(&[f64], &mut [f64]) -> Result<(), SolveError>| -> Result<Vec<f64>, SolveError> {
        let mut v = vec![0.0; nv];
        hs(&ops.gradient_apply(q), &mut v)?;
        Ok(v)
    };

    let mut p = guess.p.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; np]);
    let mut u = guess.u0.map(|v| v.iter().zip(prob.mask).map(|(a, m)| a * m).collect()).unwrap_or_else(|| vec![0.0; nv]);
    let mut rhs_u = f.to_vec();
    axpy(-1.0, &ops.gradient_apply(&p), &mut rhs_u);
    hsolve(&rhs_u, &mut u)?;
    // Schur residual (B H^-1 f - g) - S p = B u - g.
    let mut r = ops.divergence_apply(&u);
    axpy(-1.0, g, &mut r);
    project(&mut r, null);

    // Near-null constant mode on curved meshes: deflate it.
    let mut defl: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    if prob.pressure_nullspace && !projected {
        let v1 = hbt(&ones, &mut hsolve)?;
        let s1 = ops.divergence_apply(&v1);
        let mu = dot(&ones, &s1);
        if mu > 0.0 {
            let c = dot(&ones, &r) / mu;
            axpy(c, &ones, &mut p);
            axpy(-c, &v1, &mut u);
            axpy(-c, &s1, &mut r);
            defl = Some((v1, s1, mu));
        }
    }

    let gnorm = norm(g);
    let scale = if gnorm > 0.0 { gnorm } else { norm(&r) };
    let m = ops.metrics;
    let spre: Vec<f64> = m.wdet_gl.iter().map(|w| prob.nu.max(1e-300) / w).collect();
    let schur_pre = |r: &[f64]| -> Vec<f64> {
        match prob.frozen {
            Some(fz) => {
                let mut v = DVector::from_column_slice(r);
                fz.s.solve_mut(&mut v);
                v.data.into()
            }
            None => r.iter().zip(&spre).map(|(a, b)| a * b).collect(),
        }
    };
    let mut report = SolveReport::default();
    let mut rel = if scale > 0.0 { norm(&r) / scale } else { 0.0 };
    report.history.push(rel);
    if rel > tol.outer {
        let mut z = schur_pre(&r);
        project(&mut z, null);
        let mut d = z.clone();
        if let Some((_, s1, mu)) = &defl {
            axpy(-dot(s1, &z) / mu, &ones, &mut d);
        }
        let mut rz = dot(&r, &z);
        for it in 1..=tol.maxit {
            let v = hbt(&d, &mut hsolve)?;
            let sd = ops.divergence_apply(&v);
            let dsd = dot(&d, &sd);
            if dsd <= 0.0 || !dsd.is_finite() {
                return Err(SolveError::Breakdown { iteration: it, curvature: dsd });
            }
            let alpha = rz / dsd;
            axpy(alpha, &d, &mut p);
            axpy(-alpha, &v, &mut u);
            axpy(-alpha, &sd, &mut r);
            project(&mut r, null);
            rel = norm(&r) / scale;
            report.history.push(rel);
            report.iterations = it;
            if rel <= tol.outer {
                break;
            }
            z = schur_pre(&r);
            project(&mut z, null);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (di, zi) in d.iter_mut().zip(&z) {
                *di = zi + beta * *di;
            }
            if let Some((_, s1, mu)) = &defl {
                axpy(-dot(s1, &z) / mu, &ones, &mut d);
            }
        }
    }
    report.residual = rel;
    report.converged = rel <= tol.outer;
    if !report.converged {
        return Err(SolveError::NotConverged {
            solver: "Uzawa pressure CG",
            iterations: report.iterations,
            residual: rel,
            tol: tol.outer,
        });
    }
    if prob.pressure_nullspace {
        let wsum: f64 = m.wdet_gl.iter().sum();
        let mean = dot(&p, &m.wdet_gl) / wsum;
        p.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(StokesSolution { u0: u, p, report, inner_iterations: inner_its })
}

/// Steady Stokes `-div(nu (grad u + grad u^T)) + grad p = f`, `div u = 0`
/// with the Dirichlet data of `data` at time `t`. Returns the total velocity
/// and the pressure.
pub fn solve_steady_stokes(
    ops: &Operators,
    nodes: &BoundaryNodes,
    data: &dyn BoundaryData,
    nu: f64,
    t: f64,
    tol: f64,
) -> Result<(VelocityField, PressureField, SolveReport), SolveError> {
    let dim = ops.dim();
    let mask = nodes.fluid_mask(dim);
    let lift = lift_dirichlet(ops, nodes, data, t, nu, 0.0, None);
    let mut f = ops.force_dual(data, t);
    axpy(1.0, &lift.rhs1, &mut f);
    let prob = StokesProblem { ops, mask: &mask, nu, sigma: 0.0, pressure_nullspace: !nodes.has_sigma(), project_constant: false, frozen: None };
    let sol = stokes_solve(&prob, &f, &lift.rhs2, StokesGuess::default(), StokesTolerances::new(tol))?;
    let mut u = sol.u0;
    axpy(1.0, &lift.u_b, &mut u);
    Ok((
        VelocityField::from_data(dim, u),
        PressureField { npp: ops.npp(), data: sol.p },
        sol.report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::mesh::{build_box_mesh, compute_metrics};
    use crate::ops::BoundaryNodes;

    struct Diag(Vec<f64>);
    impl LinearOperator for Diag {
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..x.len() {
                y[i] = self.0[i] * x[i];
            }
        }
    }

    #[test]
    fn identity_one_iteration() {
        let b = vec![1.0, -2.0, 3.0];
        let mut x = vec![0.0; 3];
        let rep = cg_solve(&Diag(vec![1.0; 3]), &b, &mut x, &Preconditioner::Identity, CgOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_example() {
        let mut x = vec![0.0; 2];
        let rep =
            cg_solve(&Diag(vec![2.0, 4.0]), &[2.0, 4.0], &mut x, &Preconditioner::Identity, CgOptions::default()).unwrap();
        assert!(rep.converged);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_breakdown_reported() {
        let mut x = vec![0.0; 2];
        let err = cg_solve(&Diag(vec![1.0, -1.0]), &[0.0, 1.0], &mut x, &Preconditioner::Identity, CgOptions::default());
        assert!(matches!(err, Err(SolveError::Breakdown { iteration: 1, .. })));
    }

    #[test]
    fn maxit_flags_not_converged() {
        let d: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let b = vec![1.0; 50];
        let mut x = vec![0.0; 50];
        let opts = CgOptions { tol: 1e-14, maxit: 3, ..Default::default() };
        let rep = cg_solve(&Diag(d), &b, &mut x, &Preconditioner::Identity, opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn zero_data_stokes_gives_zero() {
        let mesh = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[2, 2], 5, 2).unwrap();
        let m = compute_metrics(&mesh, Exec::Serial).unwrap();
        let ops = Operators::new(&mesh, &m, Exec::Serial).unwrap();
        let mask = BoundaryNodes::new(&mesh).fluid_mask(2);
        let prob = StokesProblem { ops: &ops, mask: &mask, nu: 1.0, sigma: 0.0, pressure_nullspace: true, project_constant: false, frozen: None };
        let f = vec![0.0; 2 * ops.ng()];
        let g = vec![0.0; ops.num_elements() * ops.npp()];
        let sol = stokes_solve(&prob, &f, &g, StokesGuess::default(), StokesTolerances::new(1e-10)).unwrap();
        assert!(sol.u0.iter().all(|&v| v == 0.0));
        assert!(sol.p.iter().all(|&v| v == 0.0));
    }
}
