use hyperfield::config::parse_config;
use hyperfield::run::{run, write_outputs};

const SMALL_U1: &str = "
[model]
kind = u1
q = 0.5
g = 0.2
lambda = 0.125
[grid]
n = 40
dx = 0.25
[time]
t0 = 2
t_end = 4.7
[data]
epsilon = 0.01
r0 = 0.9
[diagnostics]
s_list = 3
residual_times = 3
sobolev = true
bootstrap = true
cadence = 0.25
";

#[test]
fn small_u1_run_fills_every_monitor() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(SMALL_U1).unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let out = run(&cfg, Some(dir.path())).unwrap();
    let summary = write_outputs(dir.path(), &cfg, &out).unwrap();
    assert_eq!(out.energies.len(), 1);
    let e = &out.energies[0];
    assert!(e.e_hyp > 0.0 && e.e_hyp.is_finite());
    assert!((e.e_hyp - e.e_chol).abs() <= 1e-10 * e.e_hyp);
    assert_eq!(out.residuals.len(), 1);
    assert_eq!(out.second_order.len(), 1);
    assert_eq!(out.sobolev.len(), 3);
    assert_eq!(out.bootstrap.len(), 3);
    assert!(summary.peak_gauge_residual.unwrap() < 1e-3);
    for f in ["energies.csv", "diagnostics.csv", "fits.json", "summary.json", "checkpoints/final.bin"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
