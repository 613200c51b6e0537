use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sem_ale(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sem-ale"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("ALE_SEM_WORKERS", w),
        None => cmd.env_remove("ALE_SEM_WORKERS"),
    };
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const TAYLOR_GREEN: &str = "# short moving-grid run\nscenario = custom\nnu = 0.05\ndt = 0.02\nt_end = 0.1\norder = 5\nelems = 2\nmotion = wobble\nsnapshot_every = 2\n";

#[test]
fn run_writes_outputs_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tg.cfg", TAYLOR_GREEN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, workers) in [(&a, Some("1")), (&b, None)] {
        let out = sem_ale(&["run", "--config", &cfg, "--out", dir.to_str().unwrap()], workers);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ts = fs::read_to_string(a.join("timeseries.csv")).unwrap();
    let mut lines = ts.lines();
    assert_eq!(lines.next(), Some("t,l2_norm,acceleration"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 3);
    // 17 significant digits: one leading digit and 16 after the point.
    let mantissa = row[1].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.len(), 18, "{}", row[1]);
    assert_eq!(ts.lines().count(), 1 + 5);

    assert!(a.join("snapshot_000002.vtk").exists());
    let vtk = fs::read_to_string(a.join("snapshot_000002.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));

    let manifest = fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256"));
    assert!(manifest.contains("timeseries.csv"));
    assert_eq!(manifest, fs::read_to_string(b.join("manifest.txt")).unwrap());
    assert_eq!(ts, fs::read_to_string(b.join("timeseries.csv")).unwrap());
    assert_eq!(fs::read_to_string(&cfg).unwrap(), TAYLOR_GREEN);
}

#[test]
fn validate_accepts_and_rejects() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.cfg", TAYLOR_GREEN);
    let out = sem_ale(&["validate", "--config", &good], None);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("valid custom"));

    let bad = write(tmp.path(), "bad.cfg", "scenario = custom\nnu = 0.05\ndt = -0.01\n");
    let out = sem_ale(&["validate", "--config", &bad], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let unknown = write(tmp.path(), "unknown.cfg", "scenario = custom\nnu = 0.05\nviscosity = 2\n");
    let out = sem_ale(&["run", "--config", &unknown], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = sem_ale(&["validate", "--config", tmp.path().join("missing.cfg").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    let out = sem_ale(&["frobnicate"], None);
    assert_eq!(out.status.code(), Some(1));
    let out = sem_ale(&["validate", "--config", &good], Some("0"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_over_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "stokes.cfg", "scenario = stokes-convergence\norder = 4\nelems = 2\n");
    let dir = tmp.path().join("sweep");
    let out = sem_ale(&["sweep", "--config", &cfg, "--param", "N=4..8:2", "--out", dir.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let errors = fs::read_to_string(dir.join("errors.csv")).unwrap();
    let rows: Vec<&str> = errors.lines().collect();
    assert_eq!(rows[0], "N,E,h1_rel,l2_rel");
    assert_eq!(rows.len(), 4);
    let h1: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(h1[0] > h1[1] && h1[1] > h1[2]);
    assert!(dir.join("N_6").join("manifest.txt").exists());
}

#[test]
fn mesh_inversion_exit_code() {
    // The cylinder is driven into the cavity wall.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "crash.cfg", "scenario = cylinder\nmode = translate\nspeed = 4\norder = 4\ndt = 0.01\nt_end = 0.5\n");
    let out = sem_ale(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("o").join("timeseries.csv").exists());
}
