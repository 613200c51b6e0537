//! Scenario runs driven by a [`RunConfig`], writing CSV tables, VTK
//! snapshots and a checksum manifest into an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ale::{AleState, StepStats};
use crate::cases::cylinder::{run_cylinder, CylinderMode, CylinderParams};
use crate::cases::damping::{fit_damping, peak_envelope};
use crate::cases::sloshing::{run_sloshing, SloshingParams};
use crate::cases::stokes::{run_stokes_convergence, ConvergenceRecord};
use crate::cases::taylor_green::{run_taylor_green, step_count, wobble_motion, TaylorGreenRun};
use crate::config::{hex_digest, CylinderModeKind, MotionKind, RunConfig, Scenario};
use crate::error::{Result, SemError};
use crate::exec::Exec;
use crate::field::pressure_at_nodes;
use crate::mesh::write_vtk;
use crate::motion::MeshMotionStrategy;

/// Floats in output files: 17 significant digits, round-trip safe.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub const ERRORS_HEADER: &str = "N,E,h1_rel,l2_rel";
pub const TIMESERIES_HEADER: &str = "t,l2_norm,acceleration";
pub const AMPLITUDE_HEADER: &str = "t,a_over_a0";
pub const DIAGNOSTICS_HEADER: &str =
    "t,min_det,jacobian_mismatch,jacobian_deviation,compatibility,divergence,volume,helmholtz_iterations,pressure_iterations";

/// Files produced by a run, relative to its output directory.
#[derive(Clone, Debug, Default)]
pub struct RunOutcome {
    pub files: Vec<String>,
    pub convergence: Vec<ConvergenceRecord>,
}

fn motion_strategy(kind: MotionKind, cfg: &RunConfig) -> MeshMotionStrategy {
    match kind {
        MotionKind::Fixed => MeshMotionStrategy::Fixed,
        MotionKind::Harmonic => MeshMotionStrategy::Harmonic,
        MotionKind::Stokes => MeshMotionStrategy::SteadyStokes,
        MotionKind::Wobble => wobble_motion(cfg.wobble_eps, cfg.wobble_omega),
    }
}

pub fn cylinder_params(cfg: &RunConfig) -> CylinderParams {
    let d = CylinderParams::default();
    CylinderParams {
        diameter: cfg.diameter,
        mode: match cfg.mode {
            Some(CylinderModeKind::Rotate) => CylinderMode::Rotate { omega: cfg.omega },
            _ => CylinderMode::Translate { speed: cfg.speed },
        },
        re: cfg.re.or(cfg.nu.map(|n| 1.0 / n)).unwrap_or(d.re),
        dt: cfg.dt.unwrap_or(d.dt),
        rings: cfg.rings,
        order: cfg.order().unwrap_or(d.order),
        motion: motion_strategy(cfg.motion.unwrap_or(MotionKind::Harmonic), cfg),
        tol: cfg.tol,
    }
}

pub fn cylinder_horizon(cfg: &RunConfig) -> f64 {
    cfg.t_end.unwrap_or(match cfg.mode {
        Some(CylinderModeKind::Rotate) => 2.0,
        _ => 0.7,
    })
}

pub fn sloshing_params(cfg: &RunConfig) -> SloshingParams {
    let mut p = SloshingParams::new(cfg.length, cfg.re.unwrap_or(50.0));
    p.dim = cfg.dim;
    if let Some(a) = cfg.amplitude {
        p.a0 = a;
    }
    if let Some(e) = cfg.elem_count() {
        p.elems = e;
    }
    if let Some(n) = cfg.order() {
        p.order = n;
    }
    if let Some(dt) = cfg.dt {
        p.dt = dt;
    }
    if let Some(m) = cfg.motion {
        p.motion = motion_strategy(m, cfg);
    }
    p.tol = cfg.tol;
    if let Some(t) = cfg.motion_tol {
        p.motion_tol = t;
    }
    p
}

pub fn sloshing_horizon(cfg: &RunConfig, p: &SloshingParams) -> f64 {
    cfg.t_end.unwrap_or(cfg.periods * p.period())
}

pub fn taylor_green_run(cfg: &RunConfig) -> TaylorGreenRun {
    TaylorGreenRun {
        elems: cfg.elem_count().unwrap_or(2),
        order: cfg.order().unwrap_or(6),
        nu: cfg.nu.or(cfg.re.map(|r| 1.0 / r)).unwrap_or(0.05),
        dt: cfg.dt.unwrap_or(0.02),
        t_end: cfg.t_end.unwrap_or(0.8),
        motion: motion_strategy(cfg.motion.unwrap_or(MotionKind::Fixed), cfg),
        tol: cfg.tol,
    }
}

fn steps_for(t_end: f64, dt: f64) -> usize {
    step_count(t_end, dt)
}

/// Collects per-step tables and writes snapshots while a scenario runs.
struct Recorder<'a> {
    dir: &'a Path,
    snapshot_every: usize,
    timeseries: String,
    diagnostics: String,
    files: Vec<String>,
}

impl<'a> Recorder<'a> {
    fn new(dir: &'a Path, snapshot_every: usize) -> Self {
        Self {
            dir,
            snapshot_every,
            timeseries: format!("{TIMESERIES_HEADER}\n"),
            diagnostics: format!("{DIAGNOSTICS_HEADER}\n"),
            files: Vec::new(),
        }
    }

    fn snapshot(&mut self, state: &AleState) -> Result<()> {
        if self.snapshot_every == 0 || state.step % self.snapshot_every != 0 {
            return Ok(());
        }
        let name = format!("snapshot_{:06}.vtk", state.step);
        let p = pressure_at_nodes(&state.mesh, &state.p);
        let mut buf = Vec::new();
        let title = format!("t = {}", fmt17(state.t));
        match state.last_mesh_velocity() {
            Some(w) => write_vtk(&mut buf, &state.mesh, &title, &[("velocity", &state.u), ("mesh_velocity", w)], &[("pressure", &p)])?,
            None => write_vtk(&mut buf, &state.mesh, &title, &[("velocity", &state.u)], &[("pressure", &p)])?,
        }
        fs::write(self.dir.join(&name), buf)?;
        self.files.push(name);
        Ok(())
    }

    fn record(&mut self, state: &AleState, s: &StepStats) -> Result<()> {
        let _ = writeln!(self.timeseries, "{},{},{}", fmt17(s.t), fmt17(s.l2_norm), fmt17(s.acceleration));
        let _ = writeln!(
            self.diagnostics,
            "{},{},{},{},{},{},{},{},{}",
            fmt17(s.t),
            fmt17(s.min_det),
            fmt17(s.jacobian_mismatch),
            fmt17(s.jacobian_deviation),
            fmt17(s.compatibility),
            fmt17(s.divergence),
            fmt17(s.volume),
            s.helmholtz_iterations,
            s.pressure_iterations
        );
        self.snapshot(state)
    }

    fn finish(mut self) -> Result<Vec<String>> {
        fs::write(self.dir.join("timeseries.csv"), &self.timeseries)?;
        fs::write(self.dir.join("diagnostics.csv"), &self.diagnostics)?;
        self.files.push("timeseries.csv".into());
        self.files.push("diagnostics.csv".into());
        Ok(self.files)
    }
}

fn write_errors(dir: &Path, recs: &[ConvergenceRecord]) -> Result<()> {
    let mut s = format!("{ERRORS_HEADER}\n");
    for r in recs {
        let _ = writeln!(s, "{},{},{},{}", r.n, r.e, fmt17(r.h1_rel), fmt17(r.l2_rel));
    }
    fs::write(dir.join("errors.csv"), s)?;
    Ok(())
}

/// Execute one scenario into `dir` (created if needed) and write its
/// manifest. Tables collected before a failure are still written.
pub fn run(cfg: &RunConfig, dir: &Path, exec: Exec) -> Result<RunOutcome> {
    fs::create_dir_all(dir)?;
    let mut out = RunOutcome::default();
    let result = run_inner(cfg, dir, exec, &mut out);
    write_manifest(cfg, dir, &mut out.files)?;
    result.map(|_| out)
}

fn run_inner(cfg: &RunConfig, dir: &Path, exec: Exec, out: &mut RunOutcome) -> Result<()> {
    match cfg.scenario {
        Scenario::StokesConvergence => {
            let elems = if cfg.elems.is_empty() { vec![2, 4] } else { cfg.elems.clone() };
            let recs = run_stokes_convergence(&elems, &cfg.orders, cfg.deformation, cfg.alpha, cfg.variant, cfg.tol, exec)?;
            write_errors(dir, &recs)?;
            out.files.push("errors.csv".into());
            out.convergence = recs;
            Ok(())
        }
        Scenario::Cylinder => {
            let p = cylinder_params(cfg);
            let steps = steps_for(cylinder_horizon(cfg), p.dt);
            let mut rec = Recorder::new(dir, cfg.snapshot_every);
            let res = run_cylinder(&p, steps, exec, |st, s| rec.record(st, s));
            out.files.extend(rec.finish()?);
            res.map(|_| ())
        }
        Scenario::Sloshing => {
            let p = sloshing_params(cfg);
            let steps = steps_for(sloshing_horizon(cfg, &p), p.dt);
            let mut rec = Recorder::new(dir, cfg.snapshot_every);
            let res = run_sloshing(&p, steps, exec, |st, s| rec.record(st, s));
            out.files.extend(rec.finish()?);
            let series = res?;
            let mut amp = format!("{AMPLITUDE_HEADER}\n");
            for (t, a) in &series.amplitude {
                let _ = writeln!(amp, "{},{}", fmt17(*t), fmt17(*a));
            }
            fs::write(dir.join("amplitude.csv"), amp)?;
            out.files.push("amplitude.csv".into());
            let mut damp = String::from("slope,intercept,r2,lamb_rate,volume_drift\n");
            if let Ok(f) = fit_damping(&peak_envelope(&series.amplitude)) {
                let _ = writeln!(
                    damp,
                    "{},{},{},{},{}",
                    fmt17(f.slope),
                    fmt17(f.intercept),
                    fmt17(f.r2),
                    fmt17(p.lamb_rate()),
                    fmt17(series.max_volume_drift())
                );
            }
            fs::write(dir.join("damping.csv"), damp)?;
            out.files.push("damping.csv".into());
            Ok(())
        }
        Scenario::Custom => {
            let run = taylor_green_run(cfg);
            let mut rec = Recorder::new(dir, cfg.snapshot_every);
            let mut failure = None;
            let res = run_taylor_green(&run, exec, |st, s| {
                if failure.is_none() {
                    failure = rec.record(st, s).err();
                }
            });
            out.files.extend(rec.finish()?);
            res?;
            failure.map_or(Ok(()), Err)
        }
    }
}

fn write_manifest(cfg: &RunConfig, dir: &Path, files: &mut Vec<String>) -> Result<()> {
    files.sort();
    files.dedup();
    let mut s = String::new();
    let _ = writeln!(s, "config_sha256 = {}", cfg.hash());
    let _ = writeln!(s, "scenario = {}", cfg.scenario.name());
    let _ = writeln!(s, "determinism = no random input; identical configurations give byte-identical files");
    let _ = writeln!(s, "files:");
    for f in files.iter() {
        let bytes = fs::read(dir.join(f))?;
        let _ = writeln!(s, "{}  {}", hex_digest(&bytes), f);
    }
    fs::write(dir.join("manifest.txt"), s)?;
    Ok(())
}

/// Run `cfg` once per value of `param`, each into `<out>/<param>_<value>`.
/// For stokes-convergence the records are also merged into `<out>/errors.csv`.
pub fn sweep(cfg: &RunConfig, param: &str, values: &[f64], out: &Path, exec: Exec) -> Result<Vec<PathBuf>> {
    if values.is_empty() {
        return Err(SemError::Config("sweep needs at least one value".into()));
    }
    let cells: Vec<RunConfig> = values.iter().map(|&v| cfg.with_param(param, v)).collect::<Result<_>>()?;
    fs::create_dir_all(out)?;
    let mut dirs = Vec::new();
    let mut merged = Vec::new();
    for (c, v) in cells.iter().zip(values) {
        let d = out.join(format!("{param}_{v}"));
        let o = run(c, &d, exec)?;
        merged.extend(o.convergence);
        dirs.push(d);
    }
    if cfg.scenario == Scenario::StokesConvergence {
        write_errors(out, &merged)?;
        let mut files = vec!["errors.csv".to_string()];
        write_manifest(cfg, out, &mut files)?;
    }
    Ok(dirs)
}

/// Parse `NAME=range` as given to `sweep --param`.
pub fn parse_param(spec: &str) -> Result<(String, Vec<f64>)> {
    let (name, range) = spec
        .split_once('=')
        .ok_or_else(|| SemError::Config(format!("--param expects NAME=a..b:s, got '{spec}'")))?;
    let vals = crate::config::parse_range(range).map_err(|m| SemError::Config(format!("--param {name}: {m}")))?;
    Ok((name.trim().to_string(), vals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt17(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn param_specs() {
        let (n, v) = parse_param("N=6..16:2").unwrap();
        assert_eq!(n, "N");
        assert_eq!(v, vec![6.0, 8.0, 10.0, 12.0, 14.0, 16.0]);
        assert!(parse_param("N6..16").is_err());
    }

    #[test]
    fn scenario_defaults() {
        let c = crate::config::parse_config("scenario = sloshing\nre = 100\n").unwrap();
        let p = sloshing_params(&c);
        assert_eq!((p.elems, p.order, p.dt, p.dim), (3, 9, 0.002, 2));
        assert!((sloshing_horizon(&c, &p) - 5.0 * p.period()).abs() < 1e-12);
        let c = crate::config::parse_config("scenario = cylinder\nmode = rotate\n").unwrap();
        assert_eq!(cylinder_params(&c).mode, CylinderMode::Rotate { omega: 1.0 });
        assert_eq!(cylinder_horizon(&c), 2.0);
    }
}
