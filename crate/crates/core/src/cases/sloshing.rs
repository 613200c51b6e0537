//! Viscous standing wave in a tank of width and depth L with a free
//! surface, free-slip side walls and a no-slip bottom.

use std::f64::consts::PI;

use crate::ale::{step, AleState, StepConfig, StepStats};
use crate::error::{Result, SemError};
use crate::exec::Exec;
use crate::field::PressureField;
use crate::mesh::{build_box_mesh, BoundaryTag, Mesh};
use crate::motion::MeshMotionStrategy;
use crate::ops::BoundaryData;

#[derive(Clone, Debug)]
pub struct SloshingParams {
    pub l: f64,
    pub a0: f64,
    pub re: f64,
    pub dim: usize,
    /// Elements per direction.
    pub elems: usize,
    pub order: usize,
    pub dt: f64,
    pub motion: MeshMotionStrategy,
    pub tol: f64,
    pub motion_tol: f64,
}

impl SloshingParams {
    /// Tank of width `l` with amplitude l/5.
    pub fn new(l: f64, re: f64) -> Self {
        Self {
            l,
            a0: l / 5.0,
            re,
            dim: 2,
            elems: 3,
            order: 9,
            dt: 0.002,
            motion: MeshMotionStrategy::SteadyStokes,
            tol: 1e-10,
            motion_tol: 1e-8,
        }
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * self.l
    }

    pub fn k(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    pub fn gravity(&self) -> f64 {
        2.0 * PI * self.wavelength() * (self.k() * self.l).tanh()
    }

    pub fn omega(&self) -> f64 {
        (self.gravity() * self.k() * (self.k() * self.l).tanh()).sqrt()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega()
    }

    pub fn nu(&self) -> f64 {
        self.l * (self.gravity() * self.l).sqrt() / self.re
    }

    /// Free-wave viscous decay rate 2 nu k^2.
    pub fn lamb_rate(&self) -> f64 {
        2.0 * self.nu() * self.k() * self.k()
    }
}

/// Second-order standing-wave elevation at t = 0.
pub fn initial_surface(p: &SloshingParams, x: f64) -> f64 {
    let k = p.k();
    let th = (k * p.l).tanh();
    let sh = (k * p.l).sinh();
    let second = k * p.a0 * p.a0 / (2.0 * th) * (1.0 + (3.0 - th * th) / (4.0 * sh * sh));
    p.a0 * (k * x).cos() - second * (2.0 * k * x).cos()
}

/// Gravity along the last axis; all Dirichlet data homogeneous.
#[derive(Clone, Copy, Debug)]
pub struct SloshingData {
    pub gravity: f64,
    pub dim: usize,
}

impl BoundaryData for SloshingData {
    fn velocity(&self, _id: u32, _x: [f64; 3], _t: f64) -> [f64; 3] {
        [0.0; 3]
    }

    fn force(&self, _x: [f64; 3], _t: f64) -> [f64; 3] {
        let mut f = [0.0; 3];
        f[self.dim - 1] = -self.gravity;
        f
    }
}

/// Tank mesh with the initial surface; the vertical coordinate is stretched
/// linearly so the bottom stays flat.
pub fn sloshing_mesh(p: &SloshingParams) -> Result<Mesh> {
    let d = p.dim;
    let lo = vec![0.0; d];
    let hi = vec![p.l; d];
    let mut mesh = build_box_mesh(&lo, &hi, &vec![p.elems; d], p.order, d)?;
    let l = p.l;
    mesh.map_nodes(|x| {
        let mut y = x;
        y[d - 1] = x[d - 1] * (l + initial_surface(p, x[0])) / l;
        y
    });
    mesh.reset_reference();
    mesh.retag(|bf| match (bf.axis(), bf.side()) {
        (a, 1) if a == d - 1 => BoundaryTag::Sigma,
        (a, 0) if a == d - 1 => BoundaryTag::Dirichlet(0),
        (a, _) => BoundaryTag::FreeSlip(a),
    });
    Ok(mesh)
}

/// Global nodes on the free surface at x = 0 and x = L (at y = 0 in 3D).
pub fn probe_nodes(mesh: &Mesh, l: f64) -> Result<(usize, usize)> {
    let d = mesh.dim();
    let pick = |x0: f64| {
        (0..mesh.nglobal())
            .filter(|&g| {
                let y = mesh.ref_node(g);
                (y[0] - x0).abs() < 1e-9 * l && (d < 3 || y[1].abs() < 1e-9 * l)
            })
            .max_by(|&a, &b| mesh.ref_node(a)[d - 1].total_cmp(&mesh.ref_node(b)[d - 1]))
    };
    match (pick(0.0), pick(l)) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(SemError::InvalidMesh("surface probe nodes not found".into())),
    }
}

/// Antisymmetric wall amplitude (h(0) - h(L)) / 2, which removes the
/// second harmonic and any mean level change.
pub fn wall_amplitude(mesh: &Mesh, probes: (usize, usize), l: f64) -> f64 {
    let d = mesh.dim();
    let h0 = mesh.node(probes.0)[d - 1] - l;
    let hl = mesh.node(probes.1)[d - 1] - l;
    0.5 * (h0 - hl)
}

pub fn sloshing_initial_state(p: &SloshingParams, exec: Exec) -> Result<AleState> {
    let mesh = sloshing_mesh(p)?;
    let d = p.dim;
    let g = p.gravity();
    let pr = PressureField::from_fn(&mesh, |x| g * (p.l + initial_surface(p, x[0]) - x[d - 1])).data;
    let u = vec![0.0; d * mesh.nglobal()];
    AleState::new(mesh, u, pr, 0.0, exec)
}

#[derive(Clone, Debug, Default)]
pub struct SloshingSeries {
    /// (t, a(t) / a(0))
    pub amplitude: Vec<(f64, f64)>,
    pub volume: Vec<f64>,
    pub max_jacobian_deviation: f64,
}

impl SloshingSeries {
    pub fn max_volume_drift(&self) -> f64 {
        let v0 = self.volume[0];
        self.volume.iter().fold(0.0, |m, v| m.max((v - v0).abs() / v0))
    }
}

pub fn run_sloshing(
    p: &SloshingParams,
    steps: usize,
    exec: Exec,
    mut observe: impl FnMut(&AleState, &StepStats) -> Result<()>,
) -> Result<SloshingSeries> {
    let mut state = sloshing_initial_state(p, exec)?;
    let probes = probe_nodes(&state.mesh, p.l)?;
    let a0 = wall_amplitude(&state.mesh, probes, p.l);
    let data = SloshingData { gravity: p.gravity(), dim: p.dim };
    let cfg = StepConfig { dt: p.dt, nu: p.nu(), data: &data, motion: p.motion.clone(), tol: p.tol, motion_tol: p.motion_tol, exec };
    let mut out = SloshingSeries { amplitude: vec![(0.0, 1.0)], volume: vec![state.metrics.volume()], max_jacobian_deviation: 0.0 };
    for _ in 0..steps {
        let st = step(&mut state, &cfg)?;
        out.amplitude.push((st.t, wall_amplitude(&state.mesh, probes, p.l) / a0));
        out.volume.push(st.volume);
        out.max_jacobian_deviation = out.max_jacobian_deviation.max(st.jacobian_deviation);
        observe(&state, &st)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_parameters() {
        let p = SloshingParams::new(1.0, 50.0);
        let w2 = p.gravity() * p.k() * (p.k() * p.l).tanh();
        assert!((p.omega() * p.omega() - w2).abs() <= 1e-12 * w2);
        assert!((p.period() - 1.0).abs() < 0.01);
        assert!((p.lamb_rate() - 1.397).abs() < 1e-3);
    }

    #[test]
    fn surface_examples() {
        let p = SloshingParams::new(1.0, 50.0);
        let (k, th, sh) = (PI, PI.tanh(), PI.sinh());
        let expect = k * 0.04 / (2.0 * th) * (1.0 + (3.0 - th * th) / (4.0 * sh * sh));
        assert!((initial_surface(&p, 0.5) - expect).abs() < 1e-15);
        assert!((initial_surface(&p, 0.5) - 0.0633).abs() < 1e-4);
        let mut q = p.clone();
        q.a0 = 1e-6;
        assert!((initial_surface(&q, 0.3) - 1e-6 * (PI * 0.3).cos()).abs() < 1e-11);
        // Mean over [0, L] is the mean of the second-order term, which is zero
        // for a whole number of its periods.
        let n = 2000;
        let mean: f64 = (0..n).map(|i| initial_surface(&p, (i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-6);
    }

    #[test]
    fn mesh_and_probes() {
        let p = SloshingParams::new(1.0, 50.0);
        let mesh = sloshing_mesh(&p).unwrap();
        let probes = probe_nodes(&mesh, 1.0).unwrap();
        assert!((mesh.node(probes.0)[1] - 1.0 - initial_surface(&p, 0.0)).abs() < 1e-14);
        assert!((wall_amplitude(&mesh, probes, 1.0) - p.a0).abs() < 1e-14);
        assert!(mesh.boundary.iter().filter(|b| b.tag == BoundaryTag::Sigma).count() == 3);
    }
}
