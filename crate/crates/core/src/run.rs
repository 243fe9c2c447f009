//! The evolution driver: assembles data, steps the system, feeds the history
//! and slice builders, and records every monitor.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{ModelChoice, RunConfig};
use crate::diagnostics::{
    constraint_monitor, decay_fit, residual_tilde, second_order_residual, sup_norms, BootstrapProbe, BootstrapRow,
    ConstraintNorms, DecayFit, DiracCoupling, Norms, SobolevProbe, SobolevRatio, SupNorms, TildeOptions, TildeResidual,
};
use crate::energetics::{e_flat, energy_estimate_check, energy_report, EnergyReport, EstimateRow};
use crate::error::{Error, Result};
use crate::evolve::{cfl_dt, Model, ModelKind, Stepper};
use crate::geometry::{sc, CompletedSlice, HyperboloidSlice, SliceBuilder, SliceProbe, SupportBall};
use crate::grid::ChannelGrid;
use crate::history::History;
use crate::initdata::{dump_state, make_lorenz_compatible_dp, make_lorenz_compatible_u1, render_free_data, DataReport};
use crate::models::{dp_sources, q_psi};
use crate::state::{ch, FieldState};
use crate::stencil::Stencil;

/// Initial state and model ready to evolve.
pub struct Prepared {
    pub model: Model,
    pub state: FieldState,
    pub data_report: Option<DataReport>,
}

/// Render the configured free data and complete it to constraint-satisfying data.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let spec = cfg.data.free_data(&cfg.model);
    let mut state = render_free_data(&spec, grid, cfg.t0);
    let model = cfg.model.build()?;
    let data_report = match &cfg.model {
        ModelChoice::U1 { .. } => {
            let p = cfg.model.coupling().expect("validated");
            Some(make_lorenz_compatible_u1(&mut state, &p, &cfg.solver)?)
        }
        ModelChoice::DiracProca { .. } => {
            let p = cfg.model.dp().expect("validated");
            Some(make_lorenz_compatible_dp(&mut state, &p, &cfg.solver)?)
        }
        _ => None,
    };
    Ok(Prepared { model, state, data_report })
}

/// One row of `diagnostics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagRow {
    pub t_or_s: f64,
    pub monitor: String,
    pub max: f64,
    pub l2: f64,
}

impl DiagRow {
    fn new(t_or_s: f64, monitor: impl Into<String>, max: f64, l2: f64) -> Self {
        DiagRow { t_or_s, monitor: monitor.into(), max, l2 }
    }

    fn scalar(t_or_s: f64, monitor: impl Into<String>, v: f64) -> Self {
        Self::new(t_or_s, monitor, v, v)
    }

    pub const CSV_HEADER: &'static str = "t_or_s,monitor_id,max_norm,l2_norm";

    pub fn csv_row(&self) -> String {
        format!("{},{},{:e},{:e}", self.t_or_s, self.monitor, self.max, self.l2)
    }
}

/// Everything a run records.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub steps: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Time levels produced, counting the initial one.
    pub snapshots: usize,
    pub e_flat: Vec<(f64, f64)>,
    pub sup: Vec<SupNorms>,
    pub constraint: Vec<(f64, ConstraintNorms)>,
    pub energies: Vec<EnergyReport>,
    pub estimate: Vec<EstimateRow>,
    pub residuals: Vec<TildeResidual>,
    pub second_order: Vec<(f64, Norms)>,
    pub sobolev: Vec<(String, SobolevRatio)>,
    pub bootstrap: Vec<BootstrapRow>,
    pub fits: Vec<DecayFit>,
    pub diagnostics: Vec<DiagRow>,
    pub data_report: Option<DataReport>,
    pub final_state: FieldState,
}

/// Headline numbers written to `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub n: usize,
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    pub e_flat_initial: f64,
    pub e_flat_final: f64,
    /// `max_t |E_flat(t) - E_flat(t0)| / E_flat(t0)`.
    pub e_flat_drift: f64,
    pub peak_gauge_residual: Option<f64>,
    pub peak_gauge_residual_l2: Option<f64>,
    pub slopes: Vec<(String, f64, f64)>,
    pub slices: usize,
    pub min_energy_margin: Option<f64>,
    pub peak_transformed_residual: Option<f64>,
    pub peak_second_order_residual: Option<f64>,
    pub data: Option<DataReport>,
}

impl RunOutcome {
    pub fn peak_gauge(&self) -> Option<ConstraintNorms> {
        self.constraint.iter().map(|c| c.1).reduce(|a, b| ConstraintNorms {
            max: a.max.max(b.max),
            l2: a.l2.max(b.l2),
            coefficient_mismatch: a.coefficient_mismatch.max(b.coefficient_mismatch),
        })
    }

    pub fn e_flat_drift(&self) -> f64 {
        let e0 = self.e_flat.first().map(|e| e.1).unwrap_or(0.0);
        let d = self.e_flat.iter().map(|e| (e.1 - e0).abs()).fold(0.0, f64::max);
        if e0 > 0.0 {
            d / e0
        } else {
            d
        }
    }

    pub fn summary(&self, cfg: &RunConfig) -> Summary {
        let peak = self.peak_gauge();
        Summary {
            model: cfg.model.kind_name().into(),
            n: cfg.n,
            dx: cfg.dx,
            dt: self.dt,
            steps: self.steps,
            t_final: self.t_final,
            e_flat_initial: self.e_flat.first().map(|e| e.1).unwrap_or(0.0),
            e_flat_final: self.e_flat.last().map(|e| e.1).unwrap_or(0.0),
            e_flat_drift: self.e_flat_drift(),
            peak_gauge_residual: peak.map(|p| p.max),
            peak_gauge_residual_l2: peak.map(|p| p.l2),
            slopes: self.fits.iter().map(|f| (f.name.clone(), f.slope, f.half_width)).collect(),
            slices: self.energies.len(),
            min_energy_margin: self.estimate.iter().map(|r| r.margin).reduce(f64::min),
            peak_transformed_residual: self.residuals.iter().map(|r| r.a_tilde_max().max(r.chi_tilde.max)).reduce(f64::max),
            peak_second_order_residual: self.second_order.iter().map(|r| r.1.max).reduce(f64::max),
            data: self.data_report.clone(),
        }
    }
}

/// Copy of the state with `∂_tψ` appended from the first RK stage.
fn snapshot(y: &FieldState, k1: &ChannelGrid) -> ChannelGrid {
    let g = y.grid();
    let plane = g.n * g.n;
    let mut out = ChannelGrid::zeros(g, ch::N_SNAPSHOT);
    for i in 0..g.n {
        let src = &y.fields.data[i * ch::N * plane..(i + 1) * ch::N * plane];
        let dst = &mut out.data[i * ch::N_SNAPSHOT * plane..(i + 1) * ch::N_SNAPSHOT * plane];
        dst[..ch::N * plane].copy_from_slice(src);
        let rate = &k1.data[(i * ch::N + ch::PSI) * plane..(i * ch::N + ch::PSI + 8) * plane];
        dst[ch::PSI_T * plane..].copy_from_slice(rate);
    }
    out
}

fn interp(series: &[(f64, f64)], t: f64) -> f64 {
    match series.iter().position(|e| e.0 >= t) {
        Some(0) => series[0].1,
        Some(k) => {
            let (a, b) = (series[k - 1], series[k]);
            a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
        }
        None => series.last().map(|e| e.1).unwrap_or(0.0),
    }
}

struct Monitors<'a> {
    cfg: &'a RunConfig,
    model: &'a Model,
    stencil: Stencil,
    out: RunOutcome,
    estimate_series: Vec<(f64, f64, f64)>,
    probe_kinds: Vec<ProbeKind>,
}

enum ProbeKind {
    Sobolev,
    Bootstrap,
}

impl Monitors<'_> {
    fn flat(&mut self, y: &FieldState) {
        let t = y.t;
        let active = self.model.active();
        let gauge = match &self.model.kind {
            ModelKind::U1(p) => Some(constraint_monitor(y, Some(p), &self.stencil)),
            ModelKind::DiracProca(_) => Some(constraint_monitor(y, None, &self.stencil)),
            _ => None,
        };
        if let Some(c) = gauge {
            self.out.diagnostics.push(DiagRow::new(t, "gauge_residual", c.max, c.l2));
            self.out.diagnostics.push(DiagRow::scalar(t, "gauge_coefficient_mismatch", c.coefficient_mismatch));
            self.out.constraint.push((t, c));
        }
        let s = sup_norms(y);
        if active.gauge {
            self.out.diagnostics.push(DiagRow::new(t, "sup_A", s.a, s.a_l2));
        }
        if active.scalar {
            self.out.diagnostics.push(DiagRow::new(t, "sup_chi", s.chi, s.chi_l2));
        }
        if active.spinor {
            self.out.diagnostics.push(DiagRow::new(t, "sup_psi", s.psi, s.psi_l2));
        }
        self.out.sup.push(s);
    }

    fn slice_done(&mut self, c: CompletedSlice) -> Result<()> {
        let s = c.slice.s;
        let (gauge_mass, dirac_mass, _) = self.cfg.model.masses();
        let ef = interp(&self.out.e_flat, s);
        let rep = energy_report(&c.slice, ef, dirac_mass, gauge_mass)?;
        let f = self.source_norm(&c.slice)?;
        self.estimate_series.push((s, rep.e_hyp, f));
        self.out.diagnostics.push(DiagRow::scalar(s, "source_norm", f));
        self.out.energies.push(rep);
        for (res, kind) in c.probes.iter().zip(&self.probe_kinds) {
            match kind {
                ProbeKind::Sobolev => {
                    let r = SobolevProbe::ratio(&res.values, s);
                    self.out.diagnostics.push(DiagRow::new(s, format!("{}_ratio", res.name), r.ratio.unwrap_or(f64::NAN), r.denominator));
                    self.out.sobolev.push((res.name.clone(), r));
                }
                ProbeKind::Bootstrap => {
                    let row = BootstrapRow::from_values(&res.name, &res.values, s);
                    for (order, v) in row.per_order.iter().enumerate() {
                        self.out.diagnostics.push(DiagRow::new(s, format!("{}_order{order}", res.name), *v, row.max_single));
                    }
                    self.out.bootstrap.push(row);
                }
            }
        }
        Ok(())
    }

    fn source_norm(&self, slice: &HyperboloidSlice) -> Result<f64> {
        let v = match &self.model.kind {
            ModelKind::U1(p) => slice.integral(|smp| q_psi(&smp.to_point_state(), p).norm_sqr())?,
            ModelKind::DiracProca(_) => slice.integral(|smp| dp_sources(&smp.to_point_state()).1.norm_sqr())?,
            _ => 0.0,
        };
        Ok(v.sqrt())
    }

    fn residuals(&mut self, h: &History, t: f64) -> Result<()> {
        if let ModelKind::U1(p) = &self.model.kind {
            let r = residual_tilde(h, t, p, &TildeOptions::default())?;
            for nu in 0..4 {
                self.out.diagnostics.push(DiagRow::new(t, format!("a_tilde_{nu}"), r.a_tilde[nu].max, r.a_tilde[nu].l2));
                self.out.diagnostics.push(DiagRow::new(t, format!("a_plain_{nu}"), r.a_plain[nu].max, r.a_plain[nu].l2));
            }
            self.out.diagnostics.push(DiagRow::new(t, "chi_tilde", r.chi_tilde.max, r.chi_tilde.l2));
            self.out.diagnostics.push(DiagRow::new(t, "chi_plain", r.chi_plain.max, r.chi_plain.l2));
            self.out.residuals.push(r);
        }
        let coupling = match &self.model.kind {
            ModelKind::U1(p) => Some(DiracCoupling::U1(p)),
            ModelKind::DiracProca(p) => Some(DiracCoupling::DiracProca(p)),
            ModelKind::FreeDirac { .. } => Some(DiracCoupling::Free),
            ModelKind::FreeKg { .. } => None,
        };
        if let Some(c) = coupling {
            let n = second_order_residual(h, t, self.model.dirac_mass(), c)?;
            self.out.diagnostics.push(DiagRow::new(t, "second_order_residual", n.max, n.l2));
            self.out.second_order.push((t, n));
        }
        Ok(())
    }
}

fn build_probes(cfg: &RunConfig, model: &Model) -> (Vec<Arc<dyn SliceProbe>>, Vec<ProbeKind>) {
    let active = model.active();
    let (mq, mg, ml) = cfg.model.masses();
    let mut fields: Vec<(&str, Vec<usize>, f64, bool)> = Vec::new();
    if active.gauge {
        fields.push(("A", (sc::A..sc::A + 4).collect(), mq, false));
    }
    if active.scalar {
        fields.push(("chi", vec![sc::CHI, sc::CHI + 1], ml, false));
    }
    if active.spinor {
        fields.push(("psi", (sc::PSI..sc::PSI + 8).collect(), mg, true));
    }
    let mut probes: Vec<Arc<dyn SliceProbe>> = Vec::new();
    let mut kinds = Vec::new();
    for (name, channels, mass, spinor) in fields {
        if cfg.diagnostics.sobolev {
            probes.push(Arc::new(SobolevProbe { name: format!("sobolev_{name}"), channels: channels.clone() }));
            kinds.push(ProbeKind::Sobolev);
        }
        if cfg.diagnostics.bootstrap {
            kinds.push(ProbeKind::Bootstrap);
            probes.push(Arc::new(BootstrapProbe { name: format!("bootstrap_{name}"), channels, mass, spinor }));
        }
    }
    (probes, kinds)
}

/// Assemble the configured data and evolve it.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let prepared = prepare(cfg)?;
    run_prepared(cfg, prepared, out_dir)
}

/// Evolve prepared data; checkpoints go to `out_dir/checkpoints` when a directory is given.
pub fn run_prepared(cfg: &RunConfig, prepared: Prepared, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let Prepared { model, mut state, data_report } = prepared;
    let grid = state.grid();
    let dt_max = cfl_dt(&grid, cfg.courant)?;
    let span = cfg.t_end - state.t;
    let steps = if span > 0.0 { (span / dt_max - 1e-9).ceil() as usize } else { 0 };
    let dt = if steps > 0 { span / steps as f64 } else { dt_max };
    let t0 = state.t;
    let support = SupportBall { t0, r0: cfg.data.r0 };
    let diag = &cfg.diagnostics;
    let needs_history = !diag.s_list.is_empty() || !diag.residual_times.is_empty();
    let mut history = needs_history.then(|| History::new(diag.history_levels, grid, cfg.order));
    let (probes, probe_kinds) = build_probes(cfg, &model);
    let mut slices = if diag.s_list.is_empty() {
        None
    } else {
        Some(SliceBuilder::new(grid, support, &diag.s_list, probes)?)
    };
    let mut pending_residuals: Vec<f64> = diag
        .residual_times
        .iter()
        .map(|&tr| {
            let k = ((tr - t0) / dt).round().clamp(0.0, steps as f64) as usize;
            k as f64
        })
        .collect();
    pending_residuals.sort_by(f64::total_cmp);
    pending_residuals.dedup();
    let mut level_times: Vec<f64> = Vec::new();
    let cadence = ((diag.cadence / dt).round() as usize).max(1);
    let mut checkpoints: Vec<f64> = diag.checkpoint_times.clone();
    checkpoints.sort_by(f64::total_cmp);
    let checkpoint_dir: Option<PathBuf> = out_dir.map(|d| d.join("checkpoints"));
    if let Some(d) = &checkpoint_dir {
        if !checkpoints.is_empty() || diag.checkpoint_final {
            fs::create_dir_all(d)?;
        }
    }
    let params = serde_json::to_value(cfg)?;

    let mut stepper = Stepper::new(model.clone(), cfg.order, grid);
    let mut mon = Monitors {
        cfg,
        model: &model,
        stencil: Stencil::new(cfg.order, grid.dx),
        out: RunOutcome {
            steps,
            dt,
            t_final: t0,
            snapshots: 0,
            e_flat: Vec::new(),
            sup: Vec::new(),
            constraint: Vec::new(),
            energies: Vec::new(),
            estimate: Vec::new(),
            residuals: Vec::new(),
            second_order: Vec::new(),
            sobolev: Vec::new(),
            bootstrap: Vec::new(),
            fits: Vec::new(),
            diagnostics: Vec::new(),
            data_report,
            final_state: FieldState::zeros(grid, t0),
        },
        estimate_series: Vec::new(),
        probe_kinds,
    };

    let after_push = |h: &History, mon: &mut Monitors, slices: &mut Option<SliceBuilder>, pending: &mut Vec<f64>, times: &[f64]| -> Result<()> {
        if let Some(b) = slices.as_mut() {
            for c in b.advance(h)? {
                mon.slice_done(c)?;
            }
        }
        while let Some(&k) = pending.first() {
            let t = times.get(k as usize).copied();
            match t {
                Some(t) if h.time_weights(t, crate::history::WINDOW, 1).is_ok() => {
                    mon.residuals(h, t)?;
                    pending.remove(0);
                }
                _ => break,
            }
        }
        Ok(())
    };

    let mut gauge_last = f64::NAN;
    for step in 0..=steps {
        let t = state.t;
        let ef = e_flat(&state);
        mon.out.e_flat.push((t, ef));
        if step % cadence == 0 || step == steps {
            mon.flat(&state);
            gauge_last = mon.out.constraint.last().map(|c| c.1.max).unwrap_or(f64::NAN);
            mon.out.diagnostics.push(DiagRow::scalar(t, "e_flat", ef));
        }
        if diag.progress_every > 0 && (step % diag.progress_every == 0 || step == steps) {
            log::info!("t={t:.6} step={step} Eflat={ef:.10e} gauge_res={gauge_last:.3e}");
        }
        while let Some(&tc) = checkpoints.first() {
            if t + 0.5 * dt < tc {
                break;
            }
            checkpoints.remove(0);
            if let Some(d) = &checkpoint_dir {
                dump_state(&d.join(format!("state_t{t:.4}.bin")), &state, params.clone())?;
            }
        }
        if diag.support_abort {
            let radius = support.radius(t);
            if radius + diag.abort_margin * grid.dx > grid.half_width() {
                return Err(Error::SupportBoundary { radius, half_width: grid.half_width(), t });
            }
        }
        level_times.push(t);
        if step == steps {
            if let Some(h) = history.as_mut() {
                let k1 = stepper.eval(&state);
                h.push(t, Arc::new(snapshot(&state, &k1)))?;
                h.finish();
                after_push(h, &mut mon, &mut slices, &mut pending_residuals, &level_times)?;
            }
            break;
        }
        let mut snap = None;
        stepper.step_with(&mut state, dt, |y, k1| {
            if history.is_some() {
                snap = Some(snapshot(y, k1));
            }
        })?;
        if let (Some(h), Some(s)) = (history.as_mut(), snap) {
            h.push(t, Arc::new(s))?;
            after_push(h, &mut mon, &mut slices, &mut pending_residuals, &level_times)?;
        }
        if step + 1 == steps {
            // land exactly on t_end
            state.t = t0 + span;
        }
    }
    if let Some(b) = &slices {
        if !b.is_done() {
            log::warn!("run ended at t={} before every requested slice was complete (needs t={})", state.t, b.t_needed());
        }
    }
    if checkpoint_dir.is_some() && diag.checkpoint_final {
        let d = checkpoint_dir.as_ref().unwrap();
        dump_state(&d.join("final.bin"), &state, params.clone())?;
    }

    let mut out = mon.out;
    out.estimate = energy_estimate_check(&mon.estimate_series);
    for r in &out.estimate {
        out.diagnostics.push(DiagRow::scalar(r.s, "energy_margin", r.margin));
    }
    let active = model.active();
    let mut series: Vec<(&str, Vec<(f64, f64)>)> = Vec::new();
    if active.gauge {
        series.push(("sup_A", out.sup.iter().map(|s| (s.t, s.a)).collect()));
    }
    if active.scalar {
        series.push(("sup_chi", out.sup.iter().map(|s| (s.t, s.chi)).collect()));
    }
    if active.spinor {
        series.push(("sup_psi", out.sup.iter().map(|s| (s.t, s.psi)).collect()));
    }
    for (name, s) in series {
        match decay_fit(name, &s, diag.fit_window) {
            Ok(f) => out.fits.push(f),
            Err(e) => log::debug!("no fit for {name}: {e}"),
        }
    }
    out.steps = steps;
    out.t_final = state.t;
    out.snapshots = level_times.len();
    out.final_state = state;
    Ok(out)
}

/// Write `energies.csv`, `diagnostics.csv`, `fits.json` and `summary.json`.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, out: &RunOutcome) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join("energies.csv"))?;
    writeln!(f, "{}", EnergyReport::CSV_HEADER)?;
    for e in &out.energies {
        writeln!(f, "{}", e.csv_row())?;
    }
    let mut f = fs::File::create(dir.join("diagnostics.csv"))?;
    writeln!(f, "{}", DiagRow::CSV_HEADER)?;
    for r in &out.diagnostics {
        writeln!(f, "{}", r.csv_row())?;
    }
    fs::write(dir.join("fits.json"), serde_json::to_string_pretty(&out.fits)?)?;
    let summary = out.summary(cfg);
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    Ok(summary)
}

/// Re-fit the `sup_*` monitors of an existing `diagnostics.csv`.
pub fn refit(dir: &Path, window: (f64, f64)) -> Result<Vec<DecayFit>> {
    let text = fs::read_to_string(dir.join("diagnostics.csv"))?;
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (no, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Config { line: no + 1, msg: format!("expected 4 columns, found {}", cols.len()) });
        }
        if !cols[1].starts_with("sup_") {
            continue;
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Config { line: no + 1, msg: format!("bad number '{s}'") });
        let (t, v) = (parse(cols[0])?, parse(cols[2])?);
        match series.iter_mut().find(|(n, _)| n == cols[1]) {
            Some((_, s)) => s.push((t, v)),
            None => series.push((cols[1].to_string(), vec![(t, v)])),
        }
    }
    series.iter().map(|(name, s)| decay_fit(name, s, window)).collect()
}
