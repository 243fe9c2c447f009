//! Acceptance criteria 1-10, one line each.
//!
//! `cargo test -p hyperfield --test acceptance -- 1 4 9` runs a subset.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use hyperfield::clifford::{dirac, Spinor, C64};
use hyperfield::config::{parse_config, ModelChoice, RunConfig};
use hyperfield::diagnostics::{boost_commutator_check, convergence_order};
use hyperfield::evolve::{Model, Stepper};
use hyperfield::grid::{ChannelGrid, Grid3};
use hyperfield::initdata::{solve_helmholtz, Shape, SolverOptions};
use hyperfield::run::{prepare, run};
use hyperfield::state::{ch, FieldState};
use hyperfield::stencil::{Stencil, StencilOrder};
use hyperfield::suite::{algebra_checks, cholesky_checks, energy_checks, Check};

const SEED: u64 = 0;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn u1(g: f64) -> ModelChoice {
    ModelChoice::U1 { q: 0.5, g, lambda: 0.125, v: 1.0 }
}

/// U(1) data on the polynomial profile of radius 1.9 starting at t = 3.
fn u1_config(g: f64, n: usize, dx: f64, t_end: f64) -> RunConfig {
    let mut cfg = RunConfig::with_model(u1(g));
    cfg.n = n;
    cfg.dx = dx;
    cfg.t0 = 3.0;
    cfg.t_end = t_end;
    cfg.data.r0 = 1.9;
    cfg.data.shape = Shape::Polynomial;
    cfg.diagnostics.progress_every = 0;
    cfg.diagnostics.checkpoint_final = false;
    cfg
}

fn worst(checks: &[Check]) -> (bool, f64, usize) {
    let w = checks.iter().map(|c| c.worst).fold(0.0, f64::max);
    (checks.iter().all(|c| c.passed), w, checks.len())
}

fn suite_criterion(checks: Vec<Check>, tol: f64, elapsed: Duration, budget: f64) -> Verdict {
    let (all, w, n) = worst(&checks);
    let fast = elapsed.as_secs_f64() < budget;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    verdict(
        all && w <= tol && fast,
        format!("{n} checks, worst {w:.2e} (tol {tol:.0e}), {:.2}s (budget {budget}s) {failed:?}", elapsed.as_secs_f64()),
    )
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let checks = algebra_checks(&dirac().set);
    suite_criterion(checks, 1e-14, start.elapsed(), 1.0)
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let checks = cholesky_checks(SEED, &dirac().set);
    suite_criterion(checks, 1e-12, start.elapsed(), 1.0)
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let checks = energy_checks(SEED);
    suite_criterion(checks, 1e-10, start.elapsed(), 10.0)
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let m = 0.5;
    let t_end = 8.0;
    let psi0 = Spinor([C64::new(0.6, 0.1), C64::new(-0.2, 0.3), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
    let grid = Grid3::new(8, 0.25).unwrap();
    let mut errors = Vec::new();
    for steps in [20usize, 40, 80] {
        let mut y = FieldState::zeros(grid, 0.0);
        for k in 0..4 {
            y.fields.fill(ch::psi_re(k), |_| psi0.0[k].re);
            y.fields.fill(ch::psi_im(k), |_| psi0.0[k].im);
        }
        let mut stepper = Stepper::new(Model::free_dirac(m), StencilOrder::Fourth, grid);
        for _ in 0..steps {
            stepper.step(&mut y, t_end / steps as f64).unwrap();
        }
        let phase = C64::from_polar(1.0, -m * t_end);
        let mut err = 0.0f64;
        for (l, c) in psi0.0.iter().enumerate() {
            let got = C64::new(y.fields.at(ch::psi_re(l), 2, 5, 7), y.fields.at(ch::psi_im(l), 2, 5, 7));
            err = err.max((got - c * phase).norm());
        }
        errors.push(err);
    }
    let order = convergence_order(&errors).unwrap();
    let order_ok = (order.mean - 4.0).abs() <= 0.2;

    let cfg = config("free_dirac.cfg");
    let out = run(&cfg, None).unwrap();
    let drift = out.e_flat_drift();
    let drift_ok = out.steps == 500 && cfg.dx == 0.25 && drift < 1e-8;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        order_ok && drift_ok && elapsed < 120.0,
        format!(
            "temporal order {:.3} from errors {}; E_flat drift {drift:.2e} over {} steps; {elapsed:.1}s",
            order.mean,
            sci(&order.raw),
            out.steps
        ),
    )
}

fn peak_gauge(cfg: &RunConfig) -> f64 {
    run(cfg, None).unwrap().peak_gauge().expect("gauge monitor runs for U(1)").max
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let mut fine = u1_config(0.2, 96, 0.3, 14.0);
    fine.data.epsilon = 0.01;
    fine.diagnostics.abort_margin = 1.0;
    let mut coarse = fine.clone();
    coarse.n = 48;
    coarse.dx = 0.6;
    let rf = peak_gauge(&fine);
    let rc = peak_gauge(&coarse);
    let ratio = rc / rf;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        rf < 5e-4 && ratio >= 3.0 && elapsed < 1800.0,
        format!("max gauge residual {rf:.2e} at dx 0.3, {rc:.2e} at dx 0.6, ratio {ratio:.1}; {elapsed:.0}s"),
    )
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let s_list = [3.0, 4.0, 5.0, 6.0];
    let m_q = (2.0f64).sqrt() * 0.5;
    let mut curves = Vec::new();
    for g in [0.0, 0.01, 0.1, m_q] {
        let mut cfg = config("mass_uniformity.cfg");
        cfg.model = u1(g);
        let out = run(&cfg, None).unwrap();
        let e: Vec<f64> = s_list
            .iter()
            .map(|s| out.energies.iter().find(|r| (r.s - s).abs() < 1e-12).map_or(f64::NAN, |r| r.e_hyp))
            .collect();
        curves.push(e);
    }
    let mut spread = 0.0f64;
    for k in 0..s_list.len() {
        let col: Vec<f64> = curves.iter().map(|c| c[k]).collect();
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        spread = spread.max((hi - lo) / lo);
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        spread < 0.05 && elapsed < 3600.0,
        format!("max relative spread of E_hyp over m_g {spread:.2e} at s = 3..6, curves {}; {elapsed:.0}s", curves.iter().map(|c| sci(c)).collect::<Vec<_>>().join(" ")),
    )
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let slopes = |g: f64| {
        let mut cfg = config("decay_u1.cfg");
        cfg.model = u1(g);
        cfg.diagnostics.progress_every = 0;
        cfg.diagnostics.checkpoint_times.clear();
        cfg.diagnostics.checkpoint_final = false;
        let out = run(&cfg, None).unwrap();
        let get = |name: &str| out.fits.iter().find(|f| f.name == name).map_or(f64::NAN, |f| f.slope);
        (get("sup_A"), get("sup_chi"), get("sup_psi"))
    };
    let m_q = (2.0f64).sqrt() * 0.5;
    let (a0, chi0, psi0) = slopes(0.0);
    let (a1, chi1, psi1) = slopes(m_q);
    let near = |s: f64, target: f64| (s - target).abs() <= 0.4;
    let ok = near(a0, -1.5) && near(chi0, -1.5) && near(a1, -1.5) && near(chi1, -1.5) && near(psi0, -1.0) && psi1 <= -1.1;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        ok && elapsed < 4.0 * 3600.0,
        format!(
            "n = 128: m_g = 0 slopes A {a0:.3} chi {chi0:.3} psi {psi0:.3}; m_g = m_q slopes A {a1:.3} chi {chi1:.3} psi {psi1:.3}; {elapsed:.0}s"
        ),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let mut a_err = Vec::new();
    let mut chi_err = Vec::new();
    for (n, dx) in [(24usize, 0.5), (48, 0.25), (96, 0.125)] {
        let mut cfg = config("smoke_u1.cfg");
        cfg.n = n;
        cfg.dx = dx;
        cfg.t_end = 4.6;
        cfg.diagnostics.s_list.clear();
        cfg.diagnostics.residual_times = vec![4.0];
        cfg.diagnostics.progress_every = 0;
        cfg.diagnostics.checkpoint_final = false;
        let out = run(&cfg, None).unwrap();
        let r = out.residuals.first().expect("residual at t = 4");
        a_err.push(r.a_tilde_max());
        chi_err.push(r.chi_tilde.max);
    }
    let oa = convergence_order(&a_err).unwrap();
    let oc = convergence_order(&chi_err).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        oa.mean >= 2.0 && oc.mean >= 2.0 && elapsed < 3600.0,
        format!(
            "gauge residual order {:.2} from {}; scalar residual order {:.2} from {}; {elapsed:.0}s",
            oa.mean,
            sci(&oa.raw),
            oc.mean,
            sci(&oc.raw)
        ),
    )
}

/// Smooth, rapidly decaying spinor field with non-trivial time dependence.
fn analytic_spinor(t: f64, x: [f64; 3]) -> Spinor {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let env = (-r2 - (t - 3.0) * (t - 3.0)).exp();
    let w = C64::new(0.0, 0.5 * x[0] + 0.8 * x[1] - 1.1 * t).exp() * env;
    Spinor([w, w * C64::new(-0.4, 0.6), w * x[2], w * C64::new(0.2, 0.0) * (t - x[0])])
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let check = |n: usize, dx: f64, dt: f64| {
        let grid = Grid3::new(n, dx).unwrap();
        boost_commutator_check(analytic_spinor, grid, 3.0, dt, &Stencil::new(StencilOrder::Fourth, dx)).unwrap()
    };
    let coarse = check(24, 0.4, 0.16);
    let fine = check(48, 0.2, 0.08);
    let mut ok = fine.adopted.as_deref() == Some("-1/2 g0 g^a");
    let mut orders = [0.0; 3];
    for a in 0..3 {
        orders[a] = (coarse.lowered[a] / fine.lowered[a]).log2();
        ok &= fine.lowered[a] < 1e-2 * fine.raised[a] && orders[a] > 3.5;
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        ok && elapsed < 60.0,
        format!(
            "adopted {:?}; lowered {} vs raised {}; refinement orders {orders:.2?}; {elapsed:.1}s",
            fine.adopted,
            sci(&fine.lowered),
            sci(&fine.raised)
        ),
    )
}

fn criterion_10() -> Verdict {
    let start = Instant::now();
    let grid = Grid3::new(96, 0.25).unwrap();
    let m2 = 0.5;
    let exact = |x: [f64; 3]| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 4.0).exp();
    let mut f = ChannelGrid::zeros(grid, 1);
    f.fill(0, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        (r2 / 4.0 - 1.5 - m2) * exact(x)
    });
    let opts = SolverOptions { tol: 1e-11, order: StencilOrder::Eighth, ..Default::default() };
    let (a, _) = solve_helmholtz(&f, m2, None, &opts).unwrap();
    let mut want = ChannelGrid::zeros(grid, 1);
    want.fill(0, exact);
    let num: f64 = a.data.iter().zip(&want.data).map(|(u, v)| (u - v) * (u - v)).sum();
    let den: f64 = want.data.iter().map(|v| v * v).sum();
    let rel = (num / den).sqrt();

    let mut detail = format!("manufactured Helmholtz relative L2 error {rel:.2e}");
    let mut ok = rel < 1e-6;
    for name in ["smoke_u1.cfg", "dirac_proca.cfg"] {
        let cfg = config(name);
        let report = prepare(&cfg).unwrap().data_report.expect("coupled model assembles data");
        let tol = 10.0 * cfg.solver.tol;
        ok &= report.first_constraint_max <= tol && report.second_constraint_rel <= tol;
        detail += &format!(
            "; {} constraints {:.2e} / {:.2e} (bound {tol:.0e})",
            cfg.model.kind_name(),
            report.first_constraint_max,
            report.second_constraint_rel
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(ok && elapsed < 120.0, format!("{detail}; {elapsed:.1}s"))
}

fn main() {
    let criteria: [fn() -> Verdict; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).filter(|k| (1..=10).contains(k)).collect();
    let mut failed = 0;
    for (k, f) in criteria.iter().enumerate() {
        let id = k + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let v = f();
        println!("criterion {id}: {} {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
