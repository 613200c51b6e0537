//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown and repeated keys
//! are rejected, and every error carries the 1-based line number.

use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::cases::stokes::Deformation;
use crate::error::{Result, SemError};
use crate::mesh::SineVariant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    StokesConvergence,
    Cylinder,
    Sloshing,
    /// Taylor-Green vortex on [-1, 1]^2 with exact Dirichlet data.
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::StokesConvergence => "stokes-convergence",
            Scenario::Cylinder => "cylinder",
            Scenario::Sloshing => "sloshing",
            Scenario::Custom => "custom",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotionKind {
    Fixed,
    Harmonic,
    Stokes,
    /// Prescribed interior oscillation (custom scenario only).
    Wobble,
}

impl MotionKind {
    fn name(self) -> &'static str {
        match self {
            MotionKind::Fixed => "fixed",
            MotionKind::Harmonic => "harmonic",
            MotionKind::Stokes => "stokes",
            MotionKind::Wobble => "wobble",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CylinderModeKind {
    Translate,
    Rotate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub dim: usize,
    /// Elements per direction; a list only for stokes-convergence.
    pub elems: Vec<usize>,
    /// Polynomial orders; a list only for stokes-convergence.
    pub orders: Vec<usize>,
    pub deformation: Deformation,
    pub alpha: f64,
    pub variant: SineVariant,
    pub re: Option<f64>,
    pub nu: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    /// Sloshing horizon in wave periods, used when `t_end` is absent.
    pub periods: f64,
    pub mode: Option<CylinderModeKind>,
    pub speed: f64,
    pub omega: f64,
    pub diameter: f64,
    pub rings: usize,
    pub length: f64,
    pub amplitude: Option<f64>,
    pub motion: Option<MotionKind>,
    pub wobble_eps: f64,
    pub wobble_omega: f64,
    pub tol: f64,
    pub motion_tol: Option<f64>,
    /// Steps between field snapshots; 0 disables them.
    pub snapshot_every: usize,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            dim: 2,
            elems: Vec::new(),
            orders: Vec::new(),
            deformation: Deformation::None,
            alpha: 0.1,
            variant: SineVariant::Printed,
            re: None,
            nu: None,
            dt: None,
            t_end: None,
            periods: 5.0,
            mode: None,
            speed: 1.0,
            omega: 1.0,
            diameter: 0.28,
            rings: 2,
            length: 1.0,
            amplitude: None,
            motion: None,
            wobble_eps: 0.15,
            wobble_omega: std::f64::consts::PI,
            tol: 1e-10,
            motion_tol: None,
            snapshot_every: 0,
            out: PathBuf::from("out"),
        }
    }

    /// Canonical text form; `parse_config` of it gives back `self`.
    pub fn serialize(&self) -> String {
        let d = RunConfig::new(self.scenario);
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("scenario", self.scenario.name().into());
        if self.dim != d.dim {
            kv("dim", self.dim.to_string());
        }
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        if !self.elems.is_empty() {
            kv("elems", list(&self.elems));
        }
        if !self.orders.is_empty() {
            kv("order", list(&self.orders));
        }
        if self.deformation != d.deformation {
            kv(
                "deformation",
                match self.deformation {
                    Deformation::None => "none",
                    Deformation::Interior => "interior",
                    Deformation::Sine => "sine",
                }
                .into(),
            );
        }
        if self.variant != d.variant {
            kv("variant", "symmetric".into());
        }
        let fields: [(&str, f64, f64); 9] = [
            ("alpha", self.alpha, d.alpha),
            ("periods", self.periods, d.periods),
            ("speed", self.speed, d.speed),
            ("omega", self.omega, d.omega),
            ("diameter", self.diameter, d.diameter),
            ("length", self.length, d.length),
            ("wobble_eps", self.wobble_eps, d.wobble_eps),
            ("wobble_omega", self.wobble_omega, d.wobble_omega),
            ("tol", self.tol, d.tol),
        ];
        for (k, v, dv) in fields {
            if v != dv {
                kv(k, format!("{v:?}"));
            }
        }
        let opts: [(&str, Option<f64>); 6] = [
            ("re", self.re),
            ("nu", self.nu),
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("amplitude", self.amplitude),
            ("motion_tol", self.motion_tol),
        ];
        for (k, v) in opts {
            if let Some(v) = v {
                kv(k, format!("{v:?}"));
            }
        }
        if let Some(m) = self.mode {
            kv("mode", if m == CylinderModeKind::Rotate { "rotate" } else { "translate" }.into());
        }
        if self.rings != d.rings {
            kv("rings", self.rings.to_string());
        }
        if let Some(m) = self.motion {
            kv("motion", m.name().into());
        }
        if self.snapshot_every != d.snapshot_every {
            kv("snapshot_every", self.snapshot_every.to_string());
        }
        if self.out != d.out {
            kv("out", self.out.display().to_string());
        }
        s
    }

    /// SHA-256 of the canonical form, as lowercase hex.
    pub fn hash(&self) -> String {
        hex_digest(self.serialize().as_bytes())
    }

    /// Single polynomial order for time-dependent scenarios.
    pub fn order(&self) -> Option<usize> {
        self.orders.first().copied()
    }

    pub fn elem_count(&self) -> Option<usize> {
        self.elems.first().copied()
    }

    /// Apply a `--param` style override (`N`, `E`, `dt`, `re`, `nu`, `alpha`).
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let int = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(SemError::Config(format!("parameter {name} needs a positive integer, got {value}")))
            }
        };
        match name {
            "N" | "order" => c.orders = vec![int()?],
            "E" | "elems" => c.elems = vec![int()?],
            "dt" => c.dt = Some(value),
            "re" => c.re = Some(value),
            "nu" => c.nu = Some(value),
            "alpha" => c.alpha = value,
            _ => return Err(SemError::Config(format!("unknown sweep parameter {name}"))),
        }
        validate(&c, &[])?;
        Ok(c)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

const KEYS: &[&str] = &[
    "scenario",
    "dim",
    "elems",
    "order",
    "deformation",
    "alpha",
    "variant",
    "re",
    "nu",
    "dt",
    "t_end",
    "periods",
    "mode",
    "speed",
    "omega",
    "diameter",
    "rings",
    "length",
    "amplitude",
    "motion",
    "wobble_eps",
    "wobble_omega",
    "tol",
    "motion_tol",
    "snapshot_every",
    "out",
];

fn err(line: usize, msg: impl std::fmt::Display) -> SemError {
    SemError::Config(format!("line {line}: {msg}"))
}

fn positive(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| err(line, format!("{key}: cannot parse '{v}' as a number")))?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(err(line, format!("{key} must be positive, got {v}")));
    }
    Ok(x)
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    match v.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        Ok(_) => Err(err(line, format!("{key} must be positive, got {v}"))),
        Err(_) => Err(err(line, format!("{key}: cannot parse '{v}' as a positive integer"))),
    }
}

/// `a..b:s` (inclusive, step `s`), `a..b` (step 1) or a single value.
pub fn parse_range(text: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("cannot parse '{}' as a number", s.trim()));
    let Some((a, rest)) = text.split_once("..") else {
        return Ok(vec![num(text)?]);
    };
    let (b, s) = match rest.split_once(':') {
        Some((b, s)) => (num(b)?, num(s)?),
        None => (num(rest)?, 1.0),
    };
    let a = num(a)?;
    if !(s > 0.0) || b < a {
        return Err(format!("empty range '{text}'"));
    }
    let n = ((b - a) / s + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * s).collect())
}

fn usize_list(line: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in v.split(',') {
        let part = part.trim();
        if part.contains("..") {
            let vals = parse_range(part).map_err(|m| err(line, format!("{key}: {m}")))?;
            for x in vals {
                out.push(count(line, key, &format!("{x}"))?);
            }
        } else {
            out.push(count(line, key, part)?);
        }
    }
    Ok(out)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(err(line, format!("expected 'key = value', got '{body}'")));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(err(line, format!("unknown key '{k}'")));
        }
        if let Some((l0, _, _)) = entries.iter().find(|e| e.1 == k) {
            return Err(err(line, format!("key '{k}' repeated (first on line {l0})")));
        }
        if v.is_empty() {
            return Err(err(line, format!("missing value for '{k}'")));
        }
        entries.push((line, k.to_string(), v.to_string()));
    }
    let Some((sl, _, sv)) = entries.iter().find(|e| e.1 == "scenario") else {
        return Err(SemError::Config("missing required key 'scenario'".into()));
    };
    let scenario = match sv.as_str() {
        "stokes-convergence" => Scenario::StokesConvergence,
        "cylinder" => Scenario::Cylinder,
        "sloshing" => Scenario::Sloshing,
        "custom" => Scenario::Custom,
        other => return Err(err(*sl, format!("unknown scenario '{other}'"))),
    };
    let mut c = RunConfig::new(scenario);
    for (line, k, v) in &entries {
        let (line, v) = (*line, v.as_str());
        match k.as_str() {
            "scenario" => {}
            "dim" => {
                c.dim = match v {
                    "2" => 2,
                    "3" => 3,
                    _ => return Err(err(line, format!("dim must be 2 or 3, got {v}"))),
                }
            }
            "elems" => c.elems = usize_list(line, k, v)?,
            "order" => c.orders = usize_list(line, k, v)?,
            "deformation" => {
                c.deformation = match v {
                    "none" => Deformation::None,
                    "interior" => Deformation::Interior,
                    "sine" => Deformation::Sine,
                    _ => return Err(err(line, format!("deformation must be none, interior or sine, got '{v}'"))),
                }
            }
            "alpha" => c.alpha = positive(line, k, v)?,
            "variant" => {
                c.variant = match v {
                    "printed" => SineVariant::Printed,
                    "symmetric" => SineVariant::Symmetric,
                    _ => return Err(err(line, format!("variant must be printed or symmetric, got '{v}'"))),
                }
            }
            "re" => c.re = Some(positive(line, k, v)?),
            "nu" => c.nu = Some(positive(line, k, v)?),
            "dt" => c.dt = Some(positive(line, k, v)?),
            "t_end" => c.t_end = Some(positive(line, k, v)?),
            "periods" => c.periods = positive(line, k, v)?,
            "mode" => {
                c.mode = Some(match v {
                    "translate" => CylinderModeKind::Translate,
                    "rotate" => CylinderModeKind::Rotate,
                    _ => return Err(err(line, format!("mode must be translate or rotate, got '{v}'"))),
                })
            }
            "speed" => c.speed = positive(line, k, v)?,
            "omega" => c.omega = positive(line, k, v)?,
            "diameter" => c.diameter = positive(line, k, v)?,
            "rings" => c.rings = count(line, k, v)?,
            "length" => c.length = positive(line, k, v)?,
            "amplitude" => c.amplitude = Some(positive(line, k, v)?),
            "motion" => {
                c.motion = Some(match v {
                    "fixed" => MotionKind::Fixed,
                    "harmonic" => MotionKind::Harmonic,
                    "stokes" => MotionKind::Stokes,
                    "wobble" => MotionKind::Wobble,
                    _ => return Err(err(line, format!("motion must be fixed, harmonic, stokes or wobble, got '{v}'"))),
                })
            }
            "wobble_eps" => c.wobble_eps = positive(line, k, v)?,
            "wobble_omega" => c.wobble_omega = positive(line, k, v)?,
            "tol" => c.tol = positive(line, k, v)?,
            "motion_tol" => c.motion_tol = Some(positive(line, k, v)?),
            "snapshot_every" => {
                c.snapshot_every = v.parse().map_err(|_| err(line, format!("snapshot_every: cannot parse '{v}' as an integer")))?
            }
            "out" => c.out = PathBuf::from(v),
            _ => unreachable!(),
        }
    }
    validate(&c, &entries.iter().map(|e| (e.1.as_str(), e.0)).collect::<Vec<_>>())?;
    Ok(c)
}

/// Scenario-level checks. `lines` maps keys to their source lines for
/// error messages.
fn validate(c: &RunConfig, lines: &[(&str, usize)]) -> Result<()> {
    let at = |key: &str, msg: String| match lines.iter().find(|e| e.0 == key) {
        Some((_, l)) => err(*l, msg),
        None => SemError::Config(msg),
    };
    let missing = |key: &str| SemError::Config(format!("scenario {} requires key '{key}'", c.scenario.name()));
    let single = |key: &str, v: &[usize]| -> Result<()> {
        if v.len() > 1 {
            Err(at(key, format!("scenario {} takes a single value for '{key}'", c.scenario.name())))
        } else {
            Ok(())
        }
    };
    if c.re.is_some() && c.nu.is_some() {
        return Err(at("nu", "give either re or nu, not both".into()));
    }
    if c.motion == Some(MotionKind::Wobble) && c.scenario != Scenario::Custom {
        return Err(at("motion", "motion = wobble is only available for the custom scenario".into()));
    }
    if c.dim == 3 && c.scenario != Scenario::Sloshing {
        return Err(at("dim", format!("scenario {} is two-dimensional", c.scenario.name())));
    }
    match c.scenario {
        Scenario::StokesConvergence => {
            if c.orders.is_empty() {
                return Err(missing("order"));
            }
            if c.orders.iter().any(|&n| n < 2) {
                return Err(at("order", "order must be at least 2".into()));
            }
        }
        Scenario::Cylinder => {
            if c.mode.is_none() {
                return Err(missing("mode"));
            }
            single("order", &c.orders)?;
            if !c.elems.is_empty() {
                return Err(at("elems", "the cylinder mesh is sized by 'rings', not 'elems'".into()));
            }
            if c.diameter >= 2.0 {
                return Err(at("diameter", "cylinder diameter must be below the cavity width 2".into()));
            }
        }
        Scenario::Sloshing => {
            if c.re.is_none() {
                return Err(missing("re"));
            }
            single("order", &c.orders)?;
            single("elems", &c.elems)?;
            if c.motion == Some(MotionKind::Fixed) {
                return Err(at("motion", "a free surface needs a moving mesh".into()));
            }
        }
        Scenario::Custom => {
            if c.nu.is_none() && c.re.is_none() {
                return Err(missing("nu"));
            }
            single("order", &c.orders)?;
            single("elems", &c.elems)?;
        }
    }
    if c.scenario != Scenario::StokesConvergence && c.orders.iter().any(|&n| n < 2) {
        return Err(at("order", "order must be at least 2".into()));
    }
    Ok(())
}
