use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hyperfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperfield"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = hyperfield(&["run", "/nonexistent/run.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read config"));
}

#[test]
fn malformed_config_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "[model]\nkind = free-dirac\n[grid]\nspacing = 1\n").unwrap();
    let out = hyperfield(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(hyperfield(&["evolve"]).status.code(), Some(2));
}

#[test]
fn identity_suite_passes_and_is_reproducible() {
    let a = hyperfield(&["identity-suite", "--seed", "17"]);
    let b = hyperfield(&["identity-suite", "--seed", "17"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    assert!(!String::from_utf8_lossy(&a.stdout).contains("FAIL"));
}

#[test]
fn free_dirac_config_conserves_flat_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = hyperfield(&["run", configs().join("free_dirac.cfg").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 500);
    let drift = summary["e_flat_drift"].as_f64().unwrap();
    assert!(drift < 1e-8, "drift {drift}");
    for f in ["energies.csv", "diagnostics.csv", "fits.json", "summary.json", "checkpoints/final.bin"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn identical_runs_write_identical_csv() {
    let cfg = "[model]\nkind = u1\nq = 0.5\ng = 0.2\nlambda = 0.125\n[grid]\nn = 24\ndx = 0.5\n\
               [time]\nt0 = 3\nt_end = 4\n[data]\nr0 = 1.9\nshape = polynomial\n[diagnostics]\ncadence = 0.25\n";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.cfg");
    std::fs::write(&path, cfg).unwrap();
    let mut csv = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = hyperfield(&["run", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        csv.push(std::fs::read(out_dir.join("diagnostics.csv")).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
}

#[test]
fn decay_report_refits_an_existing_run() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..40)
        .map(|k| {
            let t = 6.0 + 0.5 * k as f64;
            format!("{t},sup_A,{},{}\n", t.powf(-1.5), t.powf(-1.5))
        })
        .collect();
    std::fs::write(dir.path().join("diagnostics.csv"), format!("t_or_s,monitor_id,max_norm,l2_norm\n{rows}")).unwrap();
    let out = hyperfield(&["decay-report", dir.path().to_str().unwrap(), "--window", "6,24"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fits: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fits_refit.json")).unwrap()).unwrap();
    let slope = fits[0]["slope"].as_f64().unwrap();
    assert!((slope + 1.5).abs() < 1e-10, "{slope}");
}

#[test]
fn decay_report_without_diagnostics_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hyperfield(&["decay-report", dir.path().to_str().unwrap()]).status.code(), Some(2));
}
