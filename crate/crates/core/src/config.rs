//! Run configuration: a sectioned `key = value` text format.
//!
//! ```text
//! [model]
//! kind = u1
//! q = 0.5
//! ...
//! [profile]
//! field = psi0.0
//! amplitude = 1.0, 0.5
//! ```
//!
//! `[profile]` may repeat; every other section appears at most once.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::clifford::C64;
use crate::error::{Error, Result};
use crate::evolve::{Model, DEFAULT_COURANT};
use crate::grid::Grid3;
use crate::initdata::{FreeDataSpec, Profile, Shape, SolverOptions};
use crate::models::{CouplingParams, DpParams};
use crate::stencil::StencilOrder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelChoice {
    FreeDirac { mass: f64 },
    FreeKg { mass: f64 },
    DiracProca { m: f64, big_m: f64 },
    U1 { q: f64, g: f64, lambda: f64, v: f64 },
}

impl ModelChoice {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelChoice::FreeDirac { .. } => "free-dirac",
            ModelChoice::FreeKg { .. } => "free-kg",
            ModelChoice::DiracProca { .. } => "dirac-proca",
            ModelChoice::U1 { .. } => "u1",
        }
    }

    pub fn coupling(&self) -> Option<CouplingParams> {
        match *self {
            ModelChoice::U1 { q, g, lambda, v } => CouplingParams::new(q, g, lambda, v).ok(),
            _ => None,
        }
    }

    pub fn dp(&self) -> Option<DpParams> {
        match *self {
            ModelChoice::DiracProca { m, big_m } => DpParams::new(m, big_m).ok(),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<Model> {
        Ok(match *self {
            ModelChoice::FreeDirac { mass } => Model::free_dirac(mass),
            ModelChoice::FreeKg { mass } => Model::free_kg(mass),
            ModelChoice::DiracProca { m, big_m } => Model::dirac_proca(DpParams::new(m, big_m)?),
            ModelChoice::U1 { q, g, lambda, v } => Model::u1(CouplingParams::new(q, g, lambda, v)?),
        })
    }

    /// `(gauge mass, Dirac mass, scalar mass)`.
    pub fn masses(&self) -> (f64, f64, f64) {
        match *self {
            ModelChoice::FreeDirac { mass } => (0.0, mass, 0.0),
            ModelChoice::FreeKg { mass } => (0.0, 0.0, mass),
            ModelChoice::DiracProca { m, big_m } => (m, big_m, 0.0),
            ModelChoice::U1 { .. } => {
                let p = self.coupling().expect("validated couplings");
                (p.m_q(), p.m_g(), p.m_lambda())
            }
        }
    }
}

/// Which initial-data slot a profile feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldSlot {
    /// `A^j` at `t0`, `j = 1..3`.
    A0(usize),
    /// `∂_tA^j` at `t0`.
    A1(usize),
    Chi0,
    Chi1,
    /// Spinor component `0..3`.
    Psi0(usize),
}

impl FieldSlot {
    pub fn parse(s: &str) -> Option<FieldSlot> {
        let idx = |t: &str| t.parse::<usize>().ok();
        match s.split_once('.') {
            Some(("a0", j)) => idx(j).filter(|j| (1..=3).contains(j)).map(FieldSlot::A0),
            Some(("a1", j)) => idx(j).filter(|j| (1..=3).contains(j)).map(FieldSlot::A1),
            Some(("psi0", k)) => idx(k).filter(|k| *k < 4).map(FieldSlot::Psi0),
            None if s == "chi0" => Some(FieldSlot::Chi0),
            None if s == "chi1" => Some(FieldSlot::Chi1),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            FieldSlot::A0(j) => format!("a0.{j}"),
            FieldSlot::A1(j) => format!("a1.{j}"),
            FieldSlot::Chi0 => "chi0".into(),
            FieldSlot::Chi1 => "chi1".into(),
            FieldSlot::Psi0(k) => format!("psi0.{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub field: FieldSlot,
    pub profile: Profile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub epsilon: f64,
    pub r0: f64,
    /// Shape of the default profiles.
    pub shape: Shape,
    /// Explicit profiles; when empty a model-dependent default set is used.
    pub profiles: Vec<ProfileEntry>,
}

impl DataConfig {
    /// Profiles actually used for the given model.
    pub fn effective_profiles(&self, model: &ModelChoice) -> Vec<ProfileEntry> {
        if !self.profiles.is_empty() {
            return self.profiles.clone();
        }
        let r = self.r0;
        let mk = |field, re: f64, im: f64| ProfileEntry {
            field,
            profile: Profile { amplitude: C64::new(re, im), center: [0.0; 3], radius: r, shape: self.shape },
        };
        let spinor = vec![mk(FieldSlot::Psi0(0), 1.0, 0.0), mk(FieldSlot::Psi0(1), 0.3, -0.2), mk(FieldSlot::Psi0(2), 0.0, 0.5)];
        let gauge = vec![mk(FieldSlot::A0(1), 0.5, 0.0), mk(FieldSlot::A1(2), 0.3, 0.0)];
        let scalar = vec![mk(FieldSlot::Chi0, 1.0, 0.2), mk(FieldSlot::Chi1, 0.0, 0.5)];
        match model {
            ModelChoice::FreeDirac { .. } => spinor,
            ModelChoice::FreeKg { .. } => scalar,
            ModelChoice::DiracProca { .. } => [gauge, spinor].concat(),
            ModelChoice::U1 { .. } => [gauge, scalar, spinor].concat(),
        }
    }

    pub fn free_data(&self, model: &ModelChoice) -> FreeDataSpec {
        let mut spec = FreeDataSpec { epsilon: self.epsilon, r0: self.r0, ..Default::default() };
        for e in self.effective_profiles(model) {
            match e.field {
                FieldSlot::A0(j) => spec.a0[j - 1].push(e.profile),
                FieldSlot::A1(j) => spec.a1[j - 1].push(e.profile),
                FieldSlot::Chi0 => spec.chi0.push(e.profile),
                FieldSlot::Chi1 => spec.chi1.push(e.profile),
                FieldSlot::Psi0(k) => spec.psi0[k].push(e.profile),
            }
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Time between rows of the flat-slice monitors.
    pub cadence: f64,
    /// Hyperboloids on which slice energies are evaluated.
    pub s_list: Vec<f64>,
    /// Stored time levels; at least the interpolation window.
    pub history_levels: usize,
    pub fit_window: (f64, f64),
    /// Stored levels at which the transformed and second-order residuals are taken.
    pub residual_times: Vec<f64>,
    pub sobolev: bool,
    pub bootstrap: bool,
    /// Abort when the support ball comes within this many cells of the box edge.
    pub abort_margin: f64,
    /// Disable the support-ball abort, for periodic problems without compact support.
    pub support_abort: bool,
    pub progress_every: usize,
    pub checkpoint_times: Vec<f64>,
    pub checkpoint_final: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            cadence: 0.25,
            s_list: Vec::new(),
            history_levels: crate::history::WINDOW,
            fit_window: (6.0, 24.0),
            residual_times: Vec::new(),
            sobolev: false,
            bootstrap: false,
            abort_margin: 4.0,
            support_abort: true,
            progress_every: 10,
            checkpoint_times: Vec::new(),
            checkpoint_final: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelChoice,
    /// Require `m_g ≤ min(m_q, m_λ)`.
    pub theorem_regime: bool,
    pub n: usize,
    pub dx: f64,
    pub order: StencilOrder,
    pub t0: f64,
    pub t_end: f64,
    pub courant: f64,
    pub data: DataConfig,
    pub solver: SolverOptions,
    pub diagnostics: DiagnosticsConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn with_model(model: ModelChoice) -> Self {
        RunConfig {
            model,
            theorem_regime: true,
            n: 128,
            dx: 0.25,
            order: StencilOrder::Fourth,
            t0: 2.0,
            t_end: 26.0,
            courant: DEFAULT_COURANT,
            data: DataConfig { epsilon: 0.01, r0: 0.9, shape: Shape::Bump, profiles: Vec::new() },
            solver: SolverOptions::default(),
            diagnostics: DiagnosticsConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }

    pub fn grid(&self) -> Result<Grid3> {
        Grid3::new(self.n, self.dx)
    }

    /// Check every cross-field invariant.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        self.grid()?;
        match self.model {
            ModelChoice::U1 { q, g, lambda, v } => {
                let p = CouplingParams::new(q, g, lambda, v)?;
                if self.theorem_regime {
                    p.check_theorem_regime()?;
                }
            }
            ModelChoice::DiracProca { m, big_m } => {
                DpParams::new(m, big_m)?;
            }
            ModelChoice::FreeDirac { mass } | ModelChoice::FreeKg { mass } => {
                if !(mass >= 0.0) {
                    return bad(format!("mass {mass} must be non-negative"));
                }
            }
        }
        if !(self.t_end >= self.t0) {
            return bad(format!("t_end {} precedes t0 {}", self.t_end, self.t0));
        }
        crate::evolve::cfl_dt(&self.grid()?, self.courant)?;
        if self.diagnostics.history_levels < crate::history::WINDOW {
            return bad(format!("history_levels must be at least {}", crate::history::WINDOW));
        }
        if !(self.diagnostics.cadence > 0.0) {
            return bad("diagnostic cadence must be positive".into());
        }
        if !(self.diagnostics.abort_margin >= 0.0) {
            return bad("abort_margin must be non-negative".into());
        }
        if let Some(s) = self.diagnostics.s_list.iter().find(|s| !(**s >= self.t0)) {
            return bad(format!("hyperboloid s = {s} lies below t0 = {}", self.t0));
        }
        if self.diagnostics.fit_window.0 >= self.diagnostics.fit_window.1 {
            return bad("fit_window must be increasing".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return bad("solver tolerance and iteration cap must be positive".into());
        }
        let constant = self.data.effective_profiles(&self.model).iter().any(|e| e.profile.shape == Shape::Constant);
        if constant && (self.diagnostics.support_abort || !matches!(self.model, ModelChoice::FreeDirac { .. } | ModelChoice::FreeKg { .. })) {
            return bad("constant profiles need a free model and support_abort = false".into());
        }
        self.data.free_data(&self.model).validate(self.t0)?;
        Ok(())
    }

    /// The Yukawa tails of the constraint solve need `side ≥ 2r0 + 12/min-mass`.
    pub fn box_too_small_for_tail(&self) -> bool {
        let (mq, _, ml) = self.model.masses();
        let m = match self.model {
            ModelChoice::U1 { .. } => mq.min(ml),
            ModelChoice::DiracProca { .. } => mq,
            _ => return false,
        };
        m > 0.0 && 2.0 * self.n as f64 * self.dx < 2.0 * self.data.r0 + 12.0 / m
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "[model]\nkind = {}", self.model.kind_name());
        match self.model {
            ModelChoice::FreeDirac { mass } | ModelChoice::FreeKg { mass } => {
                let _ = writeln!(s, "mass = {mass:?}");
            }
            ModelChoice::DiracProca { m, big_m } => {
                let _ = writeln!(s, "m = {m:?}\nbig_m = {big_m:?}");
            }
            ModelChoice::U1 { q, g, lambda, v } => {
                let _ = writeln!(s, "q = {q:?}\ng = {g:?}\nlambda = {lambda:?}\nv = {v:?}");
            }
        }
        let _ = writeln!(s, "theorem_regime = {}", self.theorem_regime);
        let _ = writeln!(s, "\n[grid]\nn = {}\ndx = {:?}\norder = {}", self.n, self.dx, self.order.as_int());
        let _ = writeln!(s, "\n[time]\nt0 = {:?}\nt_end = {:?}\ncourant = {:?}", self.t0, self.t_end, self.courant);
        let d = &self.data;
        let _ = writeln!(s, "\n[data]\nepsilon = {:?}\nr0 = {:?}\nshape = {}", d.epsilon, d.r0, d.shape.name());
        let o = &self.solver;
        let _ = writeln!(
            s,
            "\n[solver]\ntol = {:?}\nmax_iter = {}\ntail_cutoff = {:?}\norder = {}",
            o.tol,
            o.max_iter,
            o.tail_cutoff,
            o.order.as_int()
        );
        let g = &self.diagnostics;
        let _ = writeln!(s, "\n[diagnostics]\ncadence = {:?}\ns_list = {}", g.cadence, list(&g.s_list));
        let _ = writeln!(s, "history_levels = {}\nfit_window = {:?}, {:?}", g.history_levels, g.fit_window.0, g.fit_window.1);
        let _ = writeln!(s, "residual_times = {}\nsobolev = {}\nbootstrap = {}", list(&g.residual_times), g.sobolev, g.bootstrap);
        let _ = writeln!(s, "abort_margin = {:?}\nsupport_abort = {}", g.abort_margin, g.support_abort);
        let _ = writeln!(s, "progress_every = {}", g.progress_every);
        let _ = writeln!(s, "checkpoint_times = {}\ncheckpoint_final = {}", list(&g.checkpoint_times), g.checkpoint_final);
        let _ = writeln!(s, "\n[output]\ndir = {}\nseed = {}", self.output_dir.display(), self.seed);
        for e in &d.profiles {
            let p = &e.profile;
            let _ = writeln!(
                s,
                "\n[profile]\nfield = {}\namplitude = {:?}, {:?}\ncenter = {}\nradius = {:?}\nshape = {}",
                e.field.name(),
                p.amplitude.re,
                p.amplitude.im,
                list(&p.center),
                p.radius,
                p.shape.name()
            );
        }
        s
    }
}

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_f64(v: &str, line: usize, key: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| cfg_err(line, format!("{key}: expected a number, found '{v}'")))
}

fn parse_list(v: &str, line: usize, key: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_f64(x, line, key)).collect()
}

fn parse_usize(v: &str, line: usize, key: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| cfg_err(line, format!("{key}: expected a non-negative integer, found '{v}'")))
}

fn parse_bool(v: &str, line: usize, key: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(cfg_err(line, format!("{key}: expected true or false, found '{v}'"))),
    }
}

fn parse_order(v: &str, line: usize, key: &str) -> Result<StencilOrder> {
    let p = parse_usize(v, line, key)?;
    StencilOrder::from_int(p as u32).map_err(|e| cfg_err(line, format!("{key}: {e}")))
}

#[derive(Default)]
struct ProfileDraft {
    line: usize,
    field: Option<FieldSlot>,
    amplitude: Option<C64>,
    center: [f64; 3],
    radius: Option<f64>,
    shape: Option<Shape>,
}

/// Parse, apply defaults and validate.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut section = String::new();
    let mut seen_sections = HashSet::new();
    let mut seen_keys = HashSet::new();
    let mut kind: Option<(String, usize)> = None;
    let mut model_keys: Vec<(String, f64, usize)> = Vec::new();
    let mut cfg = RunConfig::with_model(ModelChoice::FreeDirac { mass: 0.0 });
    let mut solver_order_set = false;
    let mut drafts: Vec<ProfileDraft> = Vec::new();

    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim().to_string();
            const SECTIONS: [&str; 8] = ["model", "grid", "time", "data", "solver", "diagnostics", "output", "profile"];
            if !SECTIONS.contains(&name.as_str()) {
                return Err(cfg_err(line, format!("unknown section [{name}]")));
            }
            if name == "profile" {
                drafts.push(ProfileDraft { line, ..Default::default() });
            } else if !seen_sections.insert(name.clone()) {
                return Err(cfg_err(line, format!("section [{name}] repeated")));
            }
            section = name;
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| cfg_err(line, format!("expected 'key = value', found '{content}'")))?;
        if section.is_empty() {
            return Err(cfg_err(line, format!("key '{key}' appears before any section")));
        }
        let full = if section == "profile" { format!("profile{}.{key}", drafts.len()) } else { format!("{section}.{key}") };
        if !seen_keys.insert(full) {
            return Err(cfg_err(line, format!("key '{key}' repeated in [{section}]")));
        }
        match (section.as_str(), key) {
            ("model", "kind") => kind = Some((value.to_string(), line)),
            ("model", "mass" | "m" | "big_m" | "q" | "g" | "lambda" | "v") => {
                model_keys.push((key.to_string(), parse_f64(value, line, key)?, line))
            }
            ("model", "theorem_regime") => cfg.theorem_regime = parse_bool(value, line, key)?,
            ("grid", "n") => cfg.n = parse_usize(value, line, key)?,
            ("grid", "dx") => cfg.dx = parse_f64(value, line, key)?,
            ("grid", "order") => cfg.order = parse_order(value, line, key)?,
            ("time", "t0") => cfg.t0 = parse_f64(value, line, key)?,
            ("time", "t_end") => cfg.t_end = parse_f64(value, line, key)?,
            ("time", "courant") => cfg.courant = parse_f64(value, line, key)?,
            ("data", "epsilon") => cfg.data.epsilon = parse_f64(value, line, key)?,
            ("data", "r0") => cfg.data.r0 = parse_f64(value, line, key)?,
            ("data", "shape") => {
                cfg.data.shape = Shape::parse(value).ok_or_else(|| cfg_err(line, format!("unknown shape '{value}'")))?
            }
            ("solver", "tol") => cfg.solver.tol = parse_f64(value, line, key)?,
            ("solver", "max_iter") => cfg.solver.max_iter = parse_usize(value, line, key)?,
            ("solver", "tail_cutoff") => cfg.solver.tail_cutoff = parse_f64(value, line, key)?,
            ("solver", "order") => {
                cfg.solver.order = parse_order(value, line, key)?;
                solver_order_set = true;
            }
            ("diagnostics", "cadence") => cfg.diagnostics.cadence = parse_f64(value, line, key)?,
            ("diagnostics", "s_list") => cfg.diagnostics.s_list = parse_list(value, line, key)?,
            ("diagnostics", "history_levels") => cfg.diagnostics.history_levels = parse_usize(value, line, key)?,
            ("diagnostics", "fit_window") => {
                let w = parse_list(value, line, key)?;
                if w.len() != 2 {
                    return Err(cfg_err(line, "fit_window: expected two numbers"));
                }
                cfg.diagnostics.fit_window = (w[0], w[1]);
            }
            ("diagnostics", "residual_times") => cfg.diagnostics.residual_times = parse_list(value, line, key)?,
            ("diagnostics", "sobolev") => cfg.diagnostics.sobolev = parse_bool(value, line, key)?,
            ("diagnostics", "bootstrap") => cfg.diagnostics.bootstrap = parse_bool(value, line, key)?,
            ("diagnostics", "abort_margin") => cfg.diagnostics.abort_margin = parse_f64(value, line, key)?,
            ("diagnostics", "support_abort") => cfg.diagnostics.support_abort = parse_bool(value, line, key)?,
            ("diagnostics", "progress_every") => cfg.diagnostics.progress_every = parse_usize(value, line, key)?,
            ("diagnostics", "checkpoint_times") => cfg.diagnostics.checkpoint_times = parse_list(value, line, key)?,
            ("diagnostics", "checkpoint_final") => cfg.diagnostics.checkpoint_final = parse_bool(value, line, key)?,
            ("output", "dir") => cfg.output_dir = PathBuf::from(value),
            ("output", "seed") => {
                cfg.seed = value.parse::<u64>().map_err(|_| cfg_err(line, format!("seed: expected an integer, found '{value}'")))?
            }
            ("profile", _) => {
                let d = drafts.last_mut().expect("profile section open");
                match key {
                    "field" => {
                        d.field =
                            Some(FieldSlot::parse(value).ok_or_else(|| cfg_err(line, format!("unknown field slot '{value}'")))?)
                    }
                    "amplitude" => {
                        let v = parse_list(value, line, key)?;
                        d.amplitude = Some(match v.as_slice() {
                            [re] => C64::new(*re, 0.0),
                            [re, im] => C64::new(*re, *im),
                            _ => return Err(cfg_err(line, "amplitude: expected 're' or 're, im'")),
                        });
                    }
                    "center" => {
                        let v = parse_list(value, line, key)?;
                        d.center = v.try_into().map_err(|_| cfg_err(line, "center: expected three numbers"))?;
                    }
                    "radius" => d.radius = Some(parse_f64(value, line, key)?),
                    "shape" => {
                        d.shape = Some(Shape::parse(value).ok_or_else(|| cfg_err(line, format!("unknown shape '{value}'")))?)
                    }
                    _ => return Err(cfg_err(line, format!("unknown key '{key}' in [profile]"))),
                }
            }
            _ => return Err(cfg_err(line, format!("unknown key '{key}' in [{section}]"))),
        }
    }

    let (kind, kind_line) = kind.ok_or_else(|| cfg_err(0, "[model] kind is required"))?;
    let take = |name: &str, default: Option<f64>| -> Result<f64> {
        model_keys
            .iter()
            .find(|(k, _, _)| k == name)
            .map(|(_, v, _)| *v)
            .or(default)
            .ok_or_else(|| cfg_err(kind_line, format!("model '{kind}' needs key '{name}'")))
    };
    let allowed: &[&str] = match kind.as_str() {
        "free-dirac" | "free-kg" => &["mass"],
        "dirac-proca" => &["m", "big_m"],
        "u1" => &["q", "g", "lambda", "v"],
        _ => return Err(cfg_err(kind_line, format!("unknown model kind '{kind}'"))),
    };
    if let Some((k, _, l)) = model_keys.iter().find(|(k, _, _)| !allowed.contains(&k.as_str())) {
        return Err(cfg_err(*l, format!("key '{k}' does not apply to model '{kind}'")));
    }
    cfg.model = match kind.as_str() {
        "free-dirac" => ModelChoice::FreeDirac { mass: take("mass", Some(0.0))? },
        "free-kg" => ModelChoice::FreeKg { mass: take("mass", Some(0.0))? },
        "dirac-proca" => ModelChoice::DiracProca { m: take("m", None)?, big_m: take("big_m", None)? },
        _ => ModelChoice::U1 { q: take("q", None)?, g: take("g", None)?, lambda: take("lambda", None)?, v: take("v", Some(1.0))? },
    };
    if !solver_order_set {
        cfg.solver.order = cfg.order;
    }
    for d in drafts {
        let field = d.field.ok_or_else(|| cfg_err(d.line, "[profile] needs 'field'"))?;
        let profile = Profile {
            amplitude: d.amplitude.ok_or_else(|| cfg_err(d.line, "[profile] needs 'amplitude'"))?,
            center: d.center,
            radius: d.radius.unwrap_or(cfg.data.r0),
            shape: d.shape.unwrap_or(cfg.data.shape),
        };
        cfg.data.profiles.push(ProfileEntry { field, profile });
    }
    cfg.validate().map_err(|e| match e {
        Error::Config { .. } => e,
        other => cfg_err(kind_line, format!("invalid configuration: {other}")),
    })?;
    if cfg.box_too_small_for_tail() {
        log::warn!("box side {} is below 2r0 + 12/min-mass; constraint tails may be truncated", 2.0 * cfg.n as f64 * cfg.dx);
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_config("[model]\nkind = free-dirac\n").unwrap();
        assert_eq!(c.model, ModelChoice::FreeDirac { mass: 0.0 });
        assert_eq!(c.courant, DEFAULT_COURANT);
        assert_eq!((c.n, c.dx, c.t0, c.t_end), (128, 0.25, 2.0, 26.0));
        assert_eq!(c.diagnostics.history_levels, 6);
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = parse_config("[model]\nkind = u1\n\n[grid]\nnn = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 5, .. }), "{e}");
    }

    #[test]
    fn type_mismatch_reports_line() {
        let e = parse_config("[model]\nkind = free-dirac\n[grid]\ndx = fast\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 4, .. }), "{e}");
    }

    #[test]
    fn heavy_spinor_rejected_in_theorem_regime() {
        let text = "[model]\nkind = u1\nq = 0.5\ng = 2.0\nlambda = 0.125\n";
        let e = parse_config(text).unwrap_err();
        assert!(e.to_string().contains("m_g"), "{e}");
        let ok = format!("{text}theorem_regime = false\n");
        assert!(parse_config(&ok).is_ok());
    }

    #[test]
    fn round_trip_with_profiles() {
        let text = "[model]\nkind = dirac-proca\nm = 0.7\nbig_m = 0.1\n[grid]\nn = 48\ndx = 0.3\n[diagnostics]\ns_list = 3, 4.5\n\
                    [profile]\nfield = psi0.2\namplitude = 0.1, -0.3\ncenter = 0.1, 0, 0\nradius = 0.5\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.data.profiles.len(), 1);
        let again = parse_config(&c.to_text()).unwrap();
        assert_eq!(c, again);
    }
}
