//! End-to-end tests of the `rcs` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rcs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcs"))
        .current_dir(dir)
        .env_remove("RCS_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn sidecar(p: &Path) -> Value {
    let mut s = p.as_os_str().to_owned();
    s.push(".meta.json");
    serde_json::from_str(&read(PathBuf::from(s))).unwrap()
}

/// A spectrum cheap enough for a test.
const SMALL_SPECTRUM: &[&str] = &[
    "spectrum",
    "-q",
    "--set",
    "n_traj=4",
    "--set",
    "spectrum.points=5",
    "--set",
    "spectrum.shift_min=0.9",
    "--set",
    "spectrum.shift_max=1.1",
];

#[test]
fn spectrum_schema_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcs(dir.path(), &[SMALL_SPECTRUM, &["--out", "s.csv", "--seed", "5"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path().join("s.csv"));
    assert!(!csv.contains('\r'));
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("omega_s,raman_shift,n_s_mean,n_s_stderr,"));
    assert_eq!(lines.len(), 6);
    let meta = sidecar(&dir.path().join("s.csv"));
    assert_eq!(meta["schema_version"], "rcs-output/1");
    assert_eq!(meta["experiment"], "spectrum");
    assert_eq!(meta["seed"], 5);
    assert_eq!(meta["config"]["seed"], 5);
    assert_eq!(meta["config"]["n_traj"], 4);
    assert_eq!(meta["columns"][0], "omega_s");
    // 17 significant digits
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn sidecar_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcs(dir.path(), &[SMALL_SPECTRUM, &["--out", "a.csv", "--seed", "17"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = rcs(dir.path(), &["run", "-q", "--config", "a.csv.meta.json", "--out", "b.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(dir.path().join("a.csv")), read(dir.path().join("b.csv")));
}

#[test]
fn output_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "sweep2d",
        "-q",
        "--set",
        "n_traj=40",
        "--set",
        r#"sweep.axes=[{"param":"model.omega_c","min":0.45,"max":0.55,"count":2},{"param":"model.g","min":0.0,"max":0.04,"count":2}]"#,
    ];
    for (w, name) in [("1", "w1.csv"), ("4", "w4.csv")] {
        let o = rcs(dir.path(), &[&base[..], &["--workers", w, "--out", name]].concat());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = read(dir.path().join("w1.csv"));
    assert_eq!(a, read(dir.path().join("w4.csv")));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with(
        "omega_c,g,deltaQ2,deltax2,Q_over_Q0,deltaQ2_stderr,deltax2_stderr,Q_over_Q0_stderr,n_diverged"
    ));
}

#[test]
fn env_worker_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: &str| {
        Command::new(env!("CARGO_BIN_EXE_rcs"))
            .current_dir(dir.path())
            .env("RCS_WORKERS", env)
            .args(["steady", "--set", "n_traj=8", "--out", "e.csv"])
            .output()
            .unwrap()
    };
    let o = run("3");
    assert!(o.status.success());
    assert!(stderr(&o).contains("3 worker(s)"), "{}", stderr(&o));
    let o = run("zero");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("RCS_WORKERS"));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&[&str], &str)] = &[
        (&["steady", "--set", "model.bogus=1"], "model.bogus"),
        (&["steady", "--set", "model.g=abc"], "model.g"),
        (&["steady", "--set", "model.g=-0.1"], "model.g"),
        (&["steady", "--set", "model=3"], "model"),
        (&["steady", "--set", "n_traj=0"], "n_traj"),
        (&["spectrum", "--set", "probe.gs_Ep0=-1"], "probe.gs_Ep0"),
        (&["spectrum", "--set", "spectrum.points=2"], "spectrum.points"),
        (&["coupling", "--set", "material.V_eff=0"], "material.V_eff"),
        (
            &["sweep2d", "--set", r#"sweep.axes=[{"param":"seed","min":0,"max":1,"count":2}]"#],
            "sweep.axes[0].param",
        ),
        (
            &["sweep2d", "--set", r#"sweep.axes=[{"param":"model.g","min":0,"max":1}]"#],
            "sweep.axes[0]",
        ),
        (&["steady", "--set", "schedule.dt=5"], "schedule.dt"),
    ];
    for (args, key) in cases {
        let o = rcs(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(&format!("`{key}")), "{args:?}: {}", stderr(&o));
    }
    std::fs::write(dir.path().join("c.json"), r#"{"model": {"omega_c": 0.5, "gg": 1}}"#).unwrap();
    let o = rcs(dir.path(), &["steady", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`model.gg`"));
}

#[test]
fn io_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcs(dir.path(), &["coupling", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    std::fs::write(dir.path().join("file"), "x").unwrap();
    let o = rcs(dir.path(), &["coupling", "--out", "file/sub.csv"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn numerical_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcs(dir.path(), &["gaussian", "--set", "gaussian.max_iter=2", "--out", "g.csv"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("did not converge"));
    // every trajectory crosses a tiny overflow threshold: rows are still written
    let o = rcs(
        dir.path(),
        &["steady", "--set", "n_traj=6", "--set", "overflow_threshold=1e-3", "--out", "d.csv"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("instability"));
    let csv = read(dir.path().join("d.csv"));
    assert!(csv.lines().nth(1).unwrap().contains("NaN"));
    assert_eq!(sidecar(&dir.path().join("d.csv"))["results"]["instability"][0]["report"]["n_diverged"], 6);
}

#[test]
fn beyond_threshold_reports_instability() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcs(dir.path(), &["steady", "--set", "n_traj=8", "--set", "model.g=0.06", "--out", "u.csv"]);
    assert!(stderr(&o).contains("instability"), "{}", stderr(&o));
    assert!(stderr(&o).contains("stability threshold 0.05"), "{}", stderr(&o));
    let report = &sidecar(&dir.path().join("u.csv"))["results"]["instability"][0]["report"];
    assert_eq!(report["g_max"], 0.05);
}

#[test]
fn empty_config_is_the_central_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.json"), "{}").unwrap();
    let o = rcs(dir.path(), &["spectrum", "--config", "empty.json", "--dry-run"]);
    assert!(o.status.success());
    let cfg: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cfg["experiment"], "spectrum");
    assert_eq!(cfg["model"]["g"], 0.04);
    assert_eq!(cfg["model"]["g4"], 0.01);
    assert_eq!(cfg["model"]["kappa"], 0.01);
    assert_eq!(cfg["model"]["gamma"], 0.01);
    assert_eq!(cfg["probe"]["gs_Ep0"], 0.04);
    assert_eq!(cfg["probe"]["omega_p"], 5.0);
    assert_eq!(cfg["probe"]["kappa_s"], 0.01);
    assert_eq!(cfg["n_traj"], 15000);
    let wc = cfg["model"]["omega_c"].as_f64().unwrap();
    assert!((wc - 12.0 * 0.04f64.powi(2) + 3.0 * 0.01 - 0.5).abs() < 1e-12);
}

#[test]
fn every_reproduce_target_resolves() {
    let dir = tempfile::tempdir().unwrap();
    for (t, exp) in [
        ("fig2a", "spectrum"),
        ("fig2b", "spectrum"),
        ("fig3", "sweep2d"),
        ("figS1", "spectrum"),
        ("figS2", "sweep2d"),
        ("figS3", "sweep2d"),
    ] {
        let o = rcs(dir.path(), &["reproduce", t, "--dry-run"]);
        assert!(o.status.success(), "{t}: {}", stderr(&o));
        let cfg: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(cfg["experiment"], exp, "{t}");
        assert_eq!(cfg["n_traj"], 15000);
    }
    let o = rcs(dir.path(), &["reproduce", "fig9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn polariton_sweep_shows_avoided_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcs(dir.path(), &["polariton", "-q", "--out", "p.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path().join("p.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap().split(',').take(4).collect::<Vec<_>>(), [
        "omega_c",
        "omega_minus",
        "omega_plus",
        "omega_c_bar"
    ]);
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').take(4).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 201);
    let min_gap = rows.iter().map(|r| r[2] - r[1]).fold(f64::INFINITY, f64::min);
    assert!(min_gap > 0.05, "{min_gap}");
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
}

#[test]
fn gaussian_and_coupling_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcs(dir.path(), &["gaussian", "-q", "--set", "model.g=0", "--set", "model.g4=0", "--out", "g.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = sidecar(&dir.path().join("g.csv"));
    assert_eq!(meta["results"]["iterations"], 1);
    assert!(meta["results"]["deltax2"].as_f64().unwrap().abs() < 2e-3);
    let csv = read(dir.path().join("g.csv"));
    assert!(csv.starts_with("omega,n,f_re,f_im\n"));
    assert_eq!(csv.lines().count(), 1 + 16001);

    let o = rcs(dir.path(), &["coupling", "-q", "--out", "c.csv"]);
    assert!(o.status.success());
    let row: Vec<f64> = read(dir.path().join("c.csv")).lines().nth(1).unwrap().split(',').take(3).map(|x| x.parse().unwrap()).collect();
    assert!((row[0] - 0.0025).abs() < 1e-15);
    assert!(row[1] < 0.01 && 0.01 < row[2]);
    let o = rcs(
        dir.path(),
        &["coupling", "-q", "--set", "material.geometry=volume", "--set", "material.V_eff=1e-18", "--set", "material.V_samp=1e-18", "--set", "material.V_cell=1e-27", "--out", "v.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let e0: f64 = read(dir.path().join("v.csv")).lines().nth(1).unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!((e0 / 6117.0024 - 1.0).abs() < 1e-6, "{e0}");
}
