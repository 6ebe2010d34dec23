//! End-to-end runs of the `replab` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"seed = 17

[model]
epsilon = 1.0
q1 = "0.3*r^epsilon/f"
q2 = "0.5*f^(-2)*sin(r)"
tau = 1.0

[grid]
spacing = 0.03125
f_max = 16.0
absorb_width = 16.0
"#;

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn run(&self, config: &Path, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_replab"))
            .arg("--config")
            .arg(config)
            .args(args)
            .env("REPLAB_OUT", self.out())
            .output()
            .unwrap()
    }

    fn run_dirs(&self, prefix: &str) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = fs::read_dir(self.out())
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
            .collect();
        v.sort();
        v
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn resolvent_sweep_writes_one_row_per_gamma() {
    let sb = Sandbox::new();
    let cfg = sb.config("small.toml", SMALL);
    let csv = sb.dir.path().join("records.csv");
    let o = sb.run(
        &cfg,
        &["resolvent-sweep", "--psi", "gaussian", "--gammas", "0.1,0.01,0.001", "--out", csv.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("lambda,gamma,sign,psi_id,norm_psi_B,norm_phi_Bstar,norm_pf_phi_Bstar,h_form,norm_kinetic_Bstar,bound_ratio,out_residual,in_residual,solve_residual")
    );
    assert_eq!(lines.count(), 3);
    let pointer = fs::read_to_string(format!("{}.manifest", csv.display())).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(pointer.trim()).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "resolvent-sweep");
    assert_eq!(manifest["passed"], true);
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|o| o == "sweep.csv"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let sb = Sandbox::new();
    let cfg = sb.config("bad.toml", &SMALL.replace("epsilon = 1.0", "epsilonn = 1.0"));
    let o = sb.run(&cfg, &["audit"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("model.epsilonn"), "{}", stderr(&o));
    assert!(!sb.out().exists());
}

#[test]
fn sommerfeld_agrees_with_extrapolation_on_the_free_instance() {
    let sb = Sandbox::new();
    let free = SMALL.replace("0.3*r^epsilon/f", "0").replace("0.5*f^(-2)*sin(r)", "0");
    let cfg = sb.config("free.toml", &free);
    let o = sb.run(&cfg, &["sommerfeld", "--compare-extrapolation"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let dir = &sb.run_dirs("sommerfeld-")[0];
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["comparison"]["relative_difference"].as_f64().unwrap() < 1e-2);
    assert_eq!(report["outgoing"]["passed"], true);
    assert_eq!(report["incoming"]["condition_ii"], false);
}

#[test]
fn failed_check_exits_with_two() {
    let sb = Sandbox::new();
    let cfg = sb.config("small.toml", SMALL);
    let o = sb.run(&cfg, &["radiation", "--beta", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}{}", stdout(&o), stderr(&o));
    let dir = &sb.run_dirs("radiation-")[0];
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], false);
}

#[test]
fn errors_leave_a_failure_marker_and_no_tables() {
    let sb = Sandbox::new();
    let cfg = sb.config("small.toml", SMALL);
    let o = sb.run(&cfg, &["lap", "--gammas", "0.1,0.03"]);
    assert_eq!(o.status.code(), Some(1));
    let dir = &sb.run_dirs("lap-")[0];
    assert!(dir.join("FAILED").exists());
    let names: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["FAILED"]);
}

#[test]
fn reruns_are_identical_up_to_the_timestamp() {
    let sb = Sandbox::new();
    let cfg = sb.config("small.toml", SMALL);
    let args = ["lap", "--holder"];
    let first = sb.run(&cfg, &args);
    assert!(first.status.code().is_some_and(|c| c != 1), "{}", stderr(&first));
    let dir = sb.run_dirs("lap-").remove(0);
    let snapshot: Vec<(String, Vec<u8>)> = {
        let mut v: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != "manifest.json")
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect();
        v.sort();
        v
    };
    let manifest = |d: &Path| -> serde_json::Value {
        let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
        m["timestamp"] = 0.into();
        m
    };
    let m1 = manifest(&dir);
    sb.run(&cfg, &args);
    assert_eq!(sb.run_dirs("lap-").len(), 1);
    for (name, bytes) in &snapshot {
        assert_eq!(&fs::read(dir.join(name)).unwrap(), bytes, "{name} changed");
    }
    assert_eq!(manifest(&dir), m1);
    assert!(snapshot.iter().any(|(n, _)| n == "holder_plot.csv"));
}

#[test]
fn classical_orbit_csv_has_documented_columns() {
    let sb = Sandbox::new();
    let cfg = sb.config("small.toml", SMALL);
    let csv = sb.dir.path().join("orbit.csv");
    let o = sb.run(
        &cfg,
        &["classical", "--epsilon", "1", "--x0", "1", "--p0", "0.3", "--T", "200", "--out", csv.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,x,p,E,y_over_t"));
    assert!(stdout(&o).contains("Power"));
}

#[test]
fn geometry_and_audit_pass_on_the_small_instance() {
    let sb = Sandbox::new();
    let cfg = sb.config("small.toml", SMALL);
    for cmd in ["geometry", "audit"] {
        let o = sb.run(&cfg, &[cmd]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}{}", stdout(&o), stderr(&o));
    }
    let dir = &sb.run_dirs("geometry-")[0];
    let text = fs::read_to_string(dir.join("geometry.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("x,r,f,grad_f,lap_f,ell,h"));
}

#[test]
fn missing_config_file_is_named() {
    let sb = Sandbox::new();
    let o = sb.run(&sb.dir.path().join("nope.toml"), &["audit"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.toml"), "{}", stderr(&o));
}
