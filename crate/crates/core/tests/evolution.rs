use hyperfield::clifford::{Spinor, C64};
use hyperfield::diagnostics::convergence_order;
use hyperfield::energetics::e_flat;
use hyperfield::evolve::{Model, Stepper};
use hyperfield::grid::Grid3;
use hyperfield::initdata::{make_lorenz_compatible_u1, render_free_data, FreeDataSpec, Profile, Shape, SolverOptions};
use hyperfield::models::CouplingParams;
use hyperfield::state::{ch, FieldState};
use hyperfield::stencil::StencilOrder;

fn put_spinor(y: &mut FieldState, psi: Spinor) {
    for k in 0..4 {
        y.fields.fill(ch::psi_re(k), |_| psi.0[k].re);
        y.fields.fill(ch::psi_im(k), |_| psi.0[k].im);
    }
}

fn spinor_at(y: &FieldState, i: usize, j: usize, k: usize) -> Spinor {
    Spinor(std::array::from_fn(|c| C64::new(y.fields.at(ch::psi_re(c), i, j, k), y.fields.at(ch::psi_im(c), i, j, k))))
}

fn evolve(model: &Model, y: &mut FieldState, dt: f64, steps: usize) {
    let mut stepper = Stepper::new(model.clone(), StencilOrder::Fourth, y.grid());
    for _ in 0..steps {
        stepper.step(y, dt).unwrap();
    }
}

/// The upper components of a constant spinor rotate as `e^{-imt}`, the lower as `e^{imt}`.
fn constant_spinor_exact(psi0: Spinor, m: f64, t: f64) -> Spinor {
    let (lo, hi) = (C64::from_polar(1.0, -m * t), C64::from_polar(1.0, m * t));
    Spinor([psi0.0[0] * lo, psi0.0[1] * lo, psi0.0[2] * hi, psi0.0[3] * hi])
}

#[test]
fn constant_spinor_is_fourth_order_in_time() {
    let grid = Grid3::new(8, 0.25).unwrap();
    let m = 1.0;
    let psi0 = Spinor([C64::new(0.6, 0.1), C64::new(-0.2, 0.3), C64::new(0.0, 0.4), C64::new(0.5, 0.0)]);
    let t_end = 4.0;
    let mut errors = Vec::new();
    for steps in [20, 40, 80] {
        let mut y = FieldState::zeros(grid, 0.0);
        put_spinor(&mut y, psi0);
        evolve(&Model::free_dirac(m), &mut y, t_end / steps as f64, steps);
        let exact = constant_spinor_exact(psi0, m, t_end);
        errors.push(spinor_at(&y, 3, 5, 1).max_abs_diff(&exact));
    }
    let order = convergence_order(&errors).unwrap();
    assert!((order.mean - 4.0).abs() < 0.2, "{errors:?} -> {order:?}");
}

#[test]
fn klein_gordon_plane_wave_converges_at_fourth_order() {
    let (m, length, t_end) = (0.5, 8.0, 2.0);
    let k = std::f64::consts::TAU / length;
    let omega = (2.0 * k * k + m * m).sqrt();
    let mut errors = Vec::new();
    for n in [16usize, 32, 64] {
        let dx = length / n as f64;
        let grid = Grid3::new(n, dx).unwrap();
        let mut y = FieldState::zeros(grid, 0.0);
        y.fields.fill(ch::CHI, |x| (k * (x[0] + x[1])).cos());
        y.fields.fill(ch::CHIDOT, |x| omega * (k * (x[0] + x[1])).sin());
        let steps = (t_end / (0.25 * dx)).round() as usize;
        evolve(&Model::free_kg(m), &mut y, t_end / steps as f64, steps);
        let mut err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let x = grid.point(i, j, 0);
                let exact = (k * (x[0] + x[1]) - omega * t_end).cos();
                err = err.max((y.fields.at(ch::CHI, i, j, 3) - exact).abs());
            }
        }
        errors.push(err);
    }
    let order = convergence_order(&errors).unwrap();
    assert!((order.mean - 4.0).abs() < 0.3, "{errors:?} -> {order:?}");
}

#[test]
fn second_order_stencils_converge_at_second_order() {
    let (m, length, t_end) = (0.5, 8.0, 1.0);
    let k = std::f64::consts::TAU / length;
    let omega = (k * k + m * m).sqrt();
    let mut errors = Vec::new();
    for n in [16usize, 32, 64] {
        let dx = length / n as f64;
        let grid = Grid3::new(n, dx).unwrap();
        let mut y = FieldState::zeros(grid, 0.0);
        y.fields.fill(ch::CHI, |x| (k * x[2]).cos());
        y.fields.fill(ch::CHIDOT, |x| omega * (k * x[2]).sin());
        let steps = (t_end / (0.25 * dx)).round() as usize;
        let mut stepper = Stepper::new(Model::free_kg(m), StencilOrder::Second, grid);
        for _ in 0..steps {
            stepper.step(&mut y, t_end / steps as f64).unwrap();
        }
        let exact = |z: f64| (k * z - omega * t_end).cos();
        let err = (0..n).map(|kk| (y.fields.at(ch::CHI, 0, 0, kk) - exact(grid.coord(kk))).abs()).fold(0.0, f64::max);
        errors.push(err);
    }
    let order = convergence_order(&errors).unwrap();
    assert!((order.mean - 2.0).abs() < 0.3, "{errors:?} -> {order:?}");
}

#[test]
fn backward_steps_undo_forward_steps() {
    let grid = Grid3::new(16, 0.5).unwrap();
    let spec = FreeDataSpec {
        epsilon: 0.1,
        r0: 2.5,
        psi0: [
            vec![Profile::centered(1.0, 2.5, Shape::Polynomial)],
            vec![],
            vec![Profile { amplitude: C64::new(0.0, 0.5), center: [0.5, 0.0, 0.0], radius: 2.0, shape: Shape::Polynomial }],
            vec![],
        ],
        ..Default::default()
    };
    let mut misfits = Vec::new();
    for steps in [8, 16] {
        let start = render_free_data(&spec, grid, 0.0);
        let mut y = start.clone();
        let dt = 1.0 / steps as f64;
        evolve(&Model::free_dirac(0.3), &mut y, dt, steps);
        evolve(&Model::free_dirac(0.3), &mut y, -dt, steps);
        let misfit = y.fields.data.iter().zip(&start.fields.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        misfits.push(misfit);
    }
    assert!(misfits[1] < 1e-6, "{misfits:?}");
    assert!(misfits[0] / misfits[1] > 12.0, "{misfits:?}");
}

fn small_u1_state(n: usize, dx: f64, p: &CouplingParams) -> FieldState {
    let bump = |a: f64| vec![Profile::centered(a, 1.9, Shape::Polynomial)];
    let spec = FreeDataSpec {
        epsilon: 0.01,
        r0: 1.9,
        a0: [bump(0.5), vec![], vec![]],
        a1: [vec![], bump(0.3), vec![]],
        chi0: bump(1.0),
        chi1: vec![Profile { amplitude: C64::new(0.0, 0.5), ..Profile::centered(1.0, 1.9, Shape::Polynomial) }],
        psi0: [bump(1.0), bump(0.3), vec![], bump(0.5)],
    };
    let mut y = render_free_data(&spec, Grid3::new(n, dx).unwrap(), 3.0);
    make_lorenz_compatible_u1(&mut y, p, &SolverOptions::default()).unwrap();
    y
}

#[test]
fn coupled_charge_drift_is_a_time_stepping_error() {
    let p = CouplingParams::new(0.5, 0.2, 0.125, 1.0).unwrap();
    let mut drifts = Vec::new();
    for steps in [8, 16] {
        let mut y = small_u1_state(24, 0.5, &p);
        let e0 = e_flat(&y);
        evolve(&Model::u1(p), &mut y, 1.0 / steps as f64, steps);
        drifts.push(((e_flat(&y) - e0) / e0).abs());
    }
    assert!(drifts[1] < 1e-5, "{drifts:?}");
    assert!(drifts[0] / drifts[1] > 16.0, "{drifts:?}");
}

#[test]
fn spinor_sourced_potential_scales_quadratically() {
    let p = CouplingParams::new(0.5, 0.2, 0.125, 1.0).unwrap();
    let grid = Grid3::new(24, 0.5).unwrap();
    let spec = FreeDataSpec {
        epsilon: 0.05,
        r0: 1.9,
        psi0: [vec![Profile::centered(1.0, 1.9, Shape::Polynomial)], vec![], vec![Profile::centered(0.4, 1.5, Shape::Bump)], vec![]],
        ..Default::default()
    };
    let opts = SolverOptions { tol: 1e-12, ..Default::default() };
    let potential = |alpha: f64| {
        let mut y = render_free_data(&spec.scaled(alpha), grid, 3.0);
        make_lorenz_compatible_u1(&mut y, &p, &opts).unwrap();
        y.fields.channel(ch::A)
    };
    let (full, half) = (potential(1.0), potential(0.5));
    let peak = full.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak > 0.0);
    let misfit = full.data.iter().zip(&half.data).map(|(a, b)| (a - 4.0 * b).abs()).fold(0.0, f64::max);
    assert!(misfit < 1e-9 * peak, "misfit {misfit} peak {peak}");
}
