//! Plain-text run configuration.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! section.key = value   # trailing comment
//! ```
//!
//! Keys are case-insensitive. Floats accept the forms `1.5`, `1e-3`, `pi`,
//! `2pi` and `2*pi`. Booleans are `true`/`false`. Every key not listed in
//! [`SimConfig::entries`] is rejected. Unset keys keep their defaults, which
//! together form the canonical small-data case.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::coupling::BreachPolicy;
use crate::error::{Error, Result};
use crate::grid::Quadrature;
use crate::kinetics::CflPolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    March,
    Picard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KineticFamily {
    Maxwellian,
    ShiftedMaxwellian,
    BallIndicatorSmoothed,
    TwoStream,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FluidFamily {
    Zero,
    SingleMode,
    RandomBandlimited,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub d: usize,
    pub n_x: usize,
    pub length: f64,
    pub n_v: usize,
    pub v_max: f64,
    pub quadrature: Quadrature,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub t_w: f64,
    pub n_windows: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub mode: Mode,
    pub tol_picard: f64,
    pub max_iter: usize,
    pub cn_diffusion: bool,
    pub conservative_correction: bool,
    pub dealias: bool,
    pub freeze_fluid: bool,
    pub cfl_max: f64,
    pub cfl_policy: CflPolicy,
    pub c_guard: f64,
    pub breach_policy: BreachPolicy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitConfig {
    pub kinetic: KineticFamily,
    /// Total mass of `f₀`.
    pub mass: f64,
    pub thermal_width: f64,
    /// Mean velocity along `e₁` for the shifted Maxwellian.
    pub drift: f64,
    /// Relative density perturbation `1 + ε cos(2π m x₁/L)`.
    pub perturbation: f64,
    pub perturbation_mode: u32,
    pub ball_radius: f64,
    pub ball_smoothing: f64,
    /// Beam velocities `±stream_speed·e₁` for two_stream.
    pub stream_speed: f64,
    pub fluid: FluidFamily,
    pub fluid_amplitude: f64,
    pub fluid_mode: u32,
    pub fluid_bandwidth: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagConfig {
    pub tol_ineq_factor: f64,
    pub tol_energy: f64,
    pub tol_mass: f64,
    pub tol_momentum: f64,
    pub boundary_threshold: f64,
    /// Ball radius for the density sup bound; `None` selects `h_v + e^t ∫‖u‖_∞`.
    pub sup_radius: Option<f64>,
    pub k_max: u32,
    pub gradient_orders: Vec<u32>,
    pub c0: f64,
    pub norm_order: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    pub stride: usize,
    /// Significant digits in CSV output.
    pub precision: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub solver: SolverConfig,
    pub init: InitConfig,
    pub diag: DiagConfig,
    pub output: OutputConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig {
                d: 1,
                n_x: 32,
                length: 2.0 * PI,
                n_v: 128,
                v_max: 6.0,
                quadrature: Quadrature::Midpoint,
            },
            time: TimeConfig { dt: 1e-3, t_final: 1.0, t_w: 0.05, n_windows: 20 },
            solver: SolverConfig {
                mode: Mode::March,
                tol_picard: 1e-10,
                max_iter: 10,
                cn_diffusion: false,
                conservative_correction: false,
                dealias: false,
                freeze_fluid: false,
                cfl_max: 5.0,
                cfl_policy: CflPolicy::Warn,
                c_guard: 1.0,
                breach_policy: BreachPolicy::Warn,
            },
            init: InitConfig {
                kinetic: KineticFamily::Maxwellian,
                mass: 0.01 * PI,
                thermal_width: 1.0,
                drift: 0.0,
                perturbation: 0.5,
                perturbation_mode: 1,
                ball_radius: 1.0,
                ball_smoothing: 0.1,
                stream_speed: 1.5,
                fluid: FluidFamily::SingleMode,
                fluid_amplitude: 0.5,
                fluid_mode: 0,
                fluid_bandwidth: 2,
                seed: 1,
            },
            diag: DiagConfig {
                tol_ineq_factor: 10.0,
                tol_energy: 1e-3,
                tol_mass: 1e-6,
                tol_momentum: 5e-6,
                boundary_threshold: 1e-4,
                sup_radius: None,
                k_max: 6,
                gradient_orders: vec![0, 2, 4],
                c0: 8.0,
                norm_order: 5.0,
            },
            output: OutputConfig { dir: "out".into(), stride: 100, precision: 17 },
        }
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let value = if let Some(head) = t.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        if head.is_empty() {
            PI
        } else {
            head.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))? * PI
        }
    } else {
        t.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_int<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim().parse::<T>().map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{s}` is not true/false")),
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<u32>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_int::<u32>).collect()
}

fn fmt_list(v: &[u32]) -> String {
    v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
}

fn choice<T: Copy>(s: &str, options: &[(&str, T)]) -> std::result::Result<T, String> {
    let key = s.trim().to_ascii_lowercase();
    options.iter().find(|(n, _)| *n == key).map(|&(_, v)| v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        format!("`{s}` is not one of {}", names.join(", "))
    })
}

fn name_of<T: Copy + PartialEq>(v: T, options: &[(&'static str, T)]) -> &'static str {
    options.iter().find(|(_, x)| *x == v).map(|(n, _)| *n).unwrap_or("?")
}

const MODES: &[(&str, Mode)] = &[("march", Mode::March), ("picard", Mode::Picard)];
const QUADS: &[(&str, Quadrature)] = &[("midpoint", Quadrature::Midpoint), ("trapezoid", Quadrature::Trapezoid)];
const CFL: &[(&str, CflPolicy)] = &[("warn", CflPolicy::Warn), ("error", CflPolicy::Error)];
const BREACH: &[(&str, BreachPolicy)] = &[("warn", BreachPolicy::Warn), ("halt", BreachPolicy::Halt)];
const KINETIC: &[(&str, KineticFamily)] = &[
    ("maxwellian", KineticFamily::Maxwellian),
    ("shifted_maxwellian", KineticFamily::ShiftedMaxwellian),
    ("ball_indicator_smoothed", KineticFamily::BallIndicatorSmoothed),
    ("two_stream", KineticFamily::TwoStream),
    ("zero", KineticFamily::Zero),
];
const FLUID: &[(&str, FluidFamily)] = &[
    ("zero", FluidFamily::Zero),
    ("single_mode", FluidFamily::SingleMode),
    ("random_bandlimited", FluidFamily::RandomBandlimited),
];

/// Every recognised key, in echo order.
pub const KEYS: &[&str] = &[
    "grid.d",
    "grid.n_x",
    "grid.length",
    "grid.n_v",
    "grid.v_max",
    "grid.quadrature",
    "time.dt",
    "time.t_final",
    "time.t_w",
    "time.n_windows",
    "solver.mode",
    "solver.tol_picard",
    "solver.max_iter",
    "solver.cn_diffusion",
    "solver.conservative_correction",
    "solver.dealias",
    "solver.freeze_fluid",
    "solver.cfl_max",
    "solver.cfl_policy",
    "solver.c_guard",
    "solver.breach_policy",
    "init.kinetic",
    "init.mass",
    "init.thermal_width",
    "init.drift",
    "init.perturbation",
    "init.perturbation_mode",
    "init.ball_radius",
    "init.ball_smoothing",
    "init.stream_speed",
    "init.fluid",
    "init.fluid_amplitude",
    "init.fluid_mode",
    "init.fluid_bandwidth",
    "init.seed",
    "diag.tol_ineq_factor",
    "diag.tol_energy",
    "diag.tol_mass",
    "diag.tol_momentum",
    "diag.boundary_threshold",
    "diag.sup_radius",
    "diag.k_max",
    "diag.gradient_orders",
    "diag.c0",
    "diag.norm_order",
    "output.dir",
    "output.stride",
    "output.precision",
];

impl SimConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let key = key.trim().to_ascii_lowercase();
        let (g, t, s, i, d, o) =
            (&mut self.grid, &mut self.time, &mut self.solver, &mut self.init, &mut self.diag, &mut self.output);
        match key.as_str() {
            "grid.d" => g.d = parse_int(value)?,
            "grid.n_x" => g.n_x = parse_int(value)?,
            "grid.length" => g.length = parse_f64(value)?,
            "grid.n_v" => g.n_v = parse_int(value)?,
            "grid.v_max" => g.v_max = parse_f64(value)?,
            "grid.quadrature" => g.quadrature = choice(value, QUADS)?,
            "time.dt" => t.dt = parse_f64(value)?,
            "time.t_final" => t.t_final = parse_f64(value)?,
            "time.t_w" => t.t_w = parse_f64(value)?,
            "time.n_windows" => t.n_windows = parse_int(value)?,
            "solver.mode" => s.mode = choice(value, MODES)?,
            "solver.tol_picard" => s.tol_picard = parse_f64(value)?,
            "solver.max_iter" => s.max_iter = parse_int(value)?,
            "solver.cn_diffusion" => s.cn_diffusion = parse_bool(value)?,
            "solver.conservative_correction" => s.conservative_correction = parse_bool(value)?,
            "solver.dealias" => s.dealias = parse_bool(value)?,
            "solver.freeze_fluid" => s.freeze_fluid = parse_bool(value)?,
            "solver.cfl_max" => s.cfl_max = parse_f64(value)?,
            "solver.cfl_policy" => s.cfl_policy = choice(value, CFL)?,
            "solver.c_guard" => s.c_guard = parse_f64(value)?,
            "solver.breach_policy" => s.breach_policy = choice(value, BREACH)?,
            "init.kinetic" => i.kinetic = choice(value, KINETIC)?,
            "init.mass" => i.mass = parse_f64(value)?,
            "init.thermal_width" => i.thermal_width = parse_f64(value)?,
            "init.drift" => i.drift = parse_f64(value)?,
            "init.perturbation" => i.perturbation = parse_f64(value)?,
            "init.perturbation_mode" => i.perturbation_mode = parse_int(value)?,
            "init.ball_radius" => i.ball_radius = parse_f64(value)?,
            "init.ball_smoothing" => i.ball_smoothing = parse_f64(value)?,
            "init.stream_speed" => i.stream_speed = parse_f64(value)?,
            "init.fluid" => i.fluid = choice(value, FLUID)?,
            "init.fluid_amplitude" => i.fluid_amplitude = parse_f64(value)?,
            "init.fluid_mode" => i.fluid_mode = parse_int(value)?,
            "init.fluid_bandwidth" => i.fluid_bandwidth = parse_int(value)?,
            "init.seed" => i.seed = parse_int(value)?,
            "diag.tol_ineq_factor" => d.tol_ineq_factor = parse_f64(value)?,
            "diag.tol_energy" => d.tol_energy = parse_f64(value)?,
            "diag.tol_mass" => d.tol_mass = parse_f64(value)?,
            "diag.tol_momentum" => d.tol_momentum = parse_f64(value)?,
            "diag.boundary_threshold" => d.boundary_threshold = parse_f64(value)?,
            "diag.sup_radius" => {
                d.sup_radius = match value.trim() {
                    "auto" => None,
                    v => Some(parse_f64(v)?),
                }
            }
            "diag.k_max" => d.k_max = parse_int(value)?,
            "diag.gradient_orders" => d.gradient_orders = parse_list(value)?,
            "diag.c0" => d.c0 = parse_f64(value)?,
            "diag.norm_order" => d.norm_order = parse_f64(value)?,
            "output.dir" => o.dir = value.trim().to_string(),
            "output.stride" => o.stride = parse_int(value)?,
            "output.precision" => o.precision = parse_int(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// `(key, value)` for every key; parsing the echo reproduces `self`.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (g, t, s, i, d, o) = (&self.grid, &self.time, &self.solver, &self.init, &self.diag, &self.output);
        let f = |x: f64| format!("{x:?}");
        let values = vec![
            g.d.to_string(),
            g.n_x.to_string(),
            f(g.length),
            g.n_v.to_string(),
            f(g.v_max),
            name_of(g.quadrature, QUADS).into(),
            f(t.dt),
            f(t.t_final),
            f(t.t_w),
            t.n_windows.to_string(),
            name_of(s.mode, MODES).into(),
            f(s.tol_picard),
            s.max_iter.to_string(),
            s.cn_diffusion.to_string(),
            s.conservative_correction.to_string(),
            s.dealias.to_string(),
            s.freeze_fluid.to_string(),
            f(s.cfl_max),
            name_of(s.cfl_policy, CFL).into(),
            f(s.c_guard),
            name_of(s.breach_policy, BREACH).into(),
            name_of(i.kinetic, KINETIC).into(),
            f(i.mass),
            f(i.thermal_width),
            f(i.drift),
            f(i.perturbation),
            i.perturbation_mode.to_string(),
            f(i.ball_radius),
            f(i.ball_smoothing),
            f(i.stream_speed),
            name_of(i.fluid, FLUID).into(),
            f(i.fluid_amplitude),
            i.fluid_mode.to_string(),
            i.fluid_bandwidth.to_string(),
            i.seed.to_string(),
            f(d.tol_ineq_factor),
            f(d.tol_energy),
            f(d.tol_mass),
            f(d.tol_momentum),
            f(d.boundary_threshold),
            d.sup_radius.map_or("auto".into(), f),
            d.k_max.to_string(),
            fmt_list(&d.gradient_orders),
            f(d.c0),
            f(d.norm_order),
            o.dir.clone(),
            o.stride.to_string(),
            o.precision.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// Config text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Every violated precondition, each naming its key.
    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        let mut req = |ok: bool, msg: String| {
            if !ok {
                e.push(msg)
            }
        };
        let g = &self.grid;
        req((1..=3).contains(&g.d), format!("grid.d = {} must be 1, 2 or 3", g.d));
        req(g.n_x.is_multiple_of(2), format!("grid.n_x = {} must be even", g.n_x));
        req(g.n_x >= 4 && g.n_x.is_power_of_two(), format!("grid.n_x = {} must be a power of two, at least 4", g.n_x));
        req(g.length > 0.0, format!("grid.length = {} must be positive", g.length));
        req(g.n_v >= 4 && g.n_v.is_multiple_of(2), format!("grid.n_v = {} must be even and at least 4", g.n_v));
        req(g.v_max > 0.0, format!("grid.v_max = {} must be positive", g.v_max));
        let t = &self.time;
        req(t.dt > 0.0, format!("time.dt = {} must be positive", t.dt));
        req(t.t_final > 0.0, format!("time.t_final = {} must be positive", t.t_final));
        req(t.t_w > 0.0, format!("time.t_w = {} must be positive", t.t_w));
        req(t.n_windows >= 1, "time.n_windows must be at least 1".into());
        let s = &self.solver;
        req(s.tol_picard > 0.0, format!("solver.tol_picard = {} must be positive", s.tol_picard));
        req(s.max_iter >= 1, "solver.max_iter must be at least 1".into());
        req(s.cfl_max > 0.0, format!("solver.cfl_max = {} must be positive", s.cfl_max));
        req(s.c_guard > 0.0, format!("solver.c_guard = {} must be positive", s.c_guard));
        let i = &self.init;
        req(i.mass >= 0.0, format!("init.mass = {} must be non-negative", i.mass));
        req(i.thermal_width > 0.0, format!("init.thermal_width = {} must be positive", i.thermal_width));
        req(
            (0.0..1.0).contains(&i.perturbation.abs()),
            format!("init.perturbation = {} must lie in (-1, 1) to keep f0 >= 0", i.perturbation),
        );
        req(i.ball_radius > 0.0, format!("init.ball_radius = {} must be positive", i.ball_radius));
        req(i.ball_smoothing > 0.0, format!("init.ball_smoothing = {} must be positive", i.ball_smoothing));
        req(i.stream_speed >= 0.0, format!("init.stream_speed = {} must be non-negative", i.stream_speed));
        req(i.fluid_bandwidth >= 1, "init.fluid_bandwidth must be at least 1".into());
        if g.n_x >= 4 {
            req(
                (i.fluid_mode as usize) < g.n_x / 2,
                format!("init.fluid_mode = {} must be below n_x/2 = {}", i.fluid_mode, g.n_x / 2),
            );
            req(
                (i.perturbation_mode as usize) < g.n_x / 2,
                format!("init.perturbation_mode = {} must be below n_x/2", i.perturbation_mode),
            );
            req(
                (i.fluid_bandwidth as usize) < g.n_x / 2,
                format!("init.fluid_bandwidth = {} must be below n_x/2", i.fluid_bandwidth),
            );
        }
        let d = &self.diag;
        req(d.tol_ineq_factor >= 0.0, "diag.tol_ineq_factor must be non-negative".into());
        req(d.tol_energy > 0.0, "diag.tol_energy must be positive".into());
        req(d.tol_mass > 0.0, "diag.tol_mass must be positive".into());
        req(d.tol_momentum > 0.0, "diag.tol_momentum must be positive".into());
        req(
            d.boundary_threshold > 0.0 && d.boundary_threshold < 1.0,
            "diag.boundary_threshold must lie in (0, 1)".into(),
        );
        if let Some(r) = d.sup_radius {
            let hv = 2.0 * g.v_max / g.n_v.max(1) as f64;
            req(r >= 0.5 * hv, format!("diag.sup_radius = {r} is below h_v/2 = {}", 0.5 * hv));
        }
        req(d.k_max >= 1 && d.k_max <= 9, format!("diag.k_max = {} must lie in 1..=9", d.k_max));
        req(d.gradient_orders.iter().all(|&k| k <= 9), "diag.gradient_orders entries must be at most 9".into());
        req(d.c0 > 0.0, "diag.c0 must be positive".into());
        req(d.norm_order >= 0.0 && d.norm_order <= 9.0, "diag.norm_order must lie in [0, 9]".into());
        let o = &self.output;
        req(!o.dir.is_empty(), "output.dir must not be empty".into());
        req(o.stride >= 1, "output.stride must be at least 1".into());
        req((1..=17).contains(&o.precision), "output.precision must lie in 1..=17".into());
        e
    }
}

/// Parses config text over the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    let mut problems = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("expected `section.key = value`, got `{line}`"),
        })?;
        let key = key.trim().to_ascii_lowercase();
        if key.is_empty() || !key.contains('.') {
            return Err(Error::Parse { line: line_no, msg: format!("malformed key `{key}`") });
        }
        if seen.contains(&key) {
            problems.push(format!("line {line_no}: duplicate key `{key}`"));
            continue;
        }
        seen.push(key.clone());
        if let Err(msg) = cfg.set(&key, value) {
            problems.push(format!("line {line_no}: {key}: {msg}"));
        }
    }
    problems.extend(cfg.validate());
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Validation(problems))
    }
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}
