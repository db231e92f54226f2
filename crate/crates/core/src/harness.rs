//! Run driver and verification suites shared by the CLI and the tests.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{FluidFamily, KineticFamily, Mode, SimConfig};
use crate::coupling::{
    constant_guess, march, picard_run, picard_solve, picard_solve_from, window_steps, x_norm_diff, CoupledState,
    CouplingOptions, PicardOptions, PicardReport, Trajectory,
};
use crate::diagnostics::{
    boundary_mass_monitor, check_conservation, check_density_norm_classes, check_density_sup_bound,
    check_energy_identity, check_gradient_moment_growth, check_moment_interpolation, check_moment_recurrence,
    InequalityRecord, Sample, SampleSpec,
};
use crate::error::{Error, Result};
use crate::fluid::{
    gradient_energy, leray_project, relative_divergence, sobolev_norms, stokes_step, FluidState, SourceFields,
    StokesOptions,
};
use crate::grid::{make_phase_grid, PhaseGrid, SpatialGrid};
use crate::init::{build_initial_condition, InitReport};
use crate::kinetics::{advance_frozen, mass, momentum, total_moment, DistributionFunction, VlasovOptions};
use crate::output::{fmt_num, write_diagnostics, Manifest};
use crate::snapshot::{decode, encode, write_snapshot, Snapshot};

/// The canonical small-data case.
pub fn canonical_config() -> SimConfig {
    SimConfig::default()
}

pub fn coupling_options(cfg: &SimConfig) -> CouplingOptions {
    let s = &cfg.solver;
    CouplingOptions {
        vlasov: VlasovOptions {
            cfl_max: s.cfl_max,
            cfl_policy: s.cfl_policy,
            conservative_correction: s.conservative_correction,
        },
        stokes: StokesOptions { crank_nicolson: s.cn_diffusion, dealias: s.dealias },
        freeze_fluid: s.freeze_fluid,
        breach_threshold: cfg.diag.boundary_threshold,
        breach_policy: s.breach_policy,
        c_guard: s.c_guard,
    }
}

pub fn sample_spec(cfg: &SimConfig) -> SampleSpec {
    SampleSpec {
        k_max: cfg.diag.k_max,
        gradient_orders: cfg.diag.gradient_orders.clone(),
        norm_order: cfg.diag.norm_order,
    }
}

pub fn picard_options(cfg: &SimConfig) -> PicardOptions {
    PicardOptions { t_w: cfg.time.t_w, dt: cfg.time.dt, tol: cfg.solver.tol_picard, max_iter: cfg.solver.max_iter }
}

pub fn initial_state(cfg: &SimConfig) -> Result<(CoupledState, InitReport)> {
    let (f, fluid, report) = build_initial_condition(cfg)?;
    Ok((CoupledState::new(f, fluid)?, report))
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub picard: Vec<PicardReport>,
    pub init: InitReport,
}

pub fn simulate(cfg: &SimConfig) -> Result<RunOutput> {
    let (state, init) = initial_state(cfg)?;
    let opts = coupling_options(cfg);
    let spec = sample_spec(cfg);
    let (trajectory, picard) = match cfg.solver.mode {
        Mode::March => (march(&state, cfg.time.t_final, cfg.time.dt, cfg.output.stride, &opts, &spec)?, Vec::new()),
        Mode::Picard => picard_run(&state, &picard_options(cfg), cfg.time.n_windows, &opts, &spec)?,
    };
    Ok(RunOutput { trajectory, picard, init })
}

/// Relative inequality tolerance `factor·(dt + h_x² + h_v²)`.
pub fn relative_tolerance(cfg: &SimConfig, dt: f64, grid: &PhaseGrid) -> f64 {
    crate::diagnostics::tol_ineq(cfg.diag.tol_ineq_factor, dt, grid, 1.0)
}

/// Ball radius for the density sup bound over `samples`. Unless configured,
/// it is `h_v + e^t ∫₀^t ‖u‖_∞`, which contains every backward velocity foot.
pub fn sup_radius(cfg: &SimConfig, grid: &PhaseGrid, samples: &[Sample]) -> f64 {
    if let Some(r) = cfg.diag.sup_radius {
        return r;
    }
    let mut integral = 0.0;
    for w in samples.windows(2) {
        integral += 0.5 * (w[1].t - w[0].t) * (w[0].u_linf + w[1].u_linf);
    }
    let t = samples.last().map_or(0.0, |s| s.t);
    grid.velocity.spacing() + t.exp() * integral
}

/// All diagnostic records at snapshot time, on the trajectory prefix up to
/// `samples[idx]`.
pub fn evaluate_checks(
    cfg: &SimConfig,
    traj: &Trajectory,
    idx: usize,
    state: &CoupledState,
) -> Result<Vec<InequalityRecord>> {
    let prefix = &traj.samples[..=idx];
    let grid = &*state.f.grid;
    let tol_rel = relative_tolerance(cfg, traj.dt, grid);
    let mut out = check_conservation(prefix, cfg.diag.tol_mass, cfg.diag.tol_momentum);
    let energy = check_energy_identity(prefix, cfg.diag.tol_energy, 1e-10);
    out.push(energy.residual);
    out.push(energy.monotone);
    out.extend(check_moment_interpolation(&state.f, tol_rel)?);
    for k in 1..=cfg.diag.k_max {
        out.push(check_moment_recurrence(prefix, k, tol_rel)?);
    }
    let r = sup_radius(cfg, grid, prefix);
    out.push(check_density_sup_bound(&traj.f0, prefix, r, tol_rel)?);
    for &k in &cfg.diag.gradient_orders {
        out.push(check_gradient_moment_growth(prefix, k, cfg.diag.c0, tol_rel)?.record);
    }
    out.extend(check_density_norm_classes(prefix));
    let t = state.time;
    out.push(InequalityRecord::new(
        t,
        "boundary_mass",
        boundary_mass_monitor(&state.f),
        cfg.diag.boundary_threshold,
        0.0,
        0.0,
    ));
    out.push(InequalityRecord::new(
        t,
        "relative_divergence",
        relative_divergence(&state.fluid.grid, &state.fluid.u),
        1e-10,
        0.0,
        0.0,
    ));
    out.push(InequalityRecord::informational(t, "clipped_mass", prefix.last().map_or(0.0, |s| s.clipped_mass)));
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub records: Vec<InequalityRecord>,
    pub picard: Vec<PicardReport>,
    pub warnings: Vec<String>,
    pub out_dir: PathBuf,
}

impl RunSummary {
    pub fn final_value(&self, name: &str) -> f64 {
        self.records.iter().rev().find(|r| r.name == name).map_or(f64::NAN, |r| r.lhs)
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass) && self.picard.iter().all(|p| p.converged)
    }
}

/// Runs `cfg`, writing snapshots, `diagnostics.csv` and `manifest.txt`.
pub fn run(cfg: &SimConfig, out_dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let out = simulate(cfg)?;
    let sim_secs = started.elapsed().as_secs_f64();
    let traj = &out.trajectory;
    let mut records = Vec::new();
    for (n, (idx, state)) in traj.snapshots.iter().enumerate() {
        records.extend(evaluate_checks(cfg, traj, *idx, state)?);
        if let Some(rep) = n.checked_sub(1).and_then(|w| out.picard.get(w)) {
            records.push(InequalityRecord::new(state.time, "picard_alpha_est", rep.alpha_est, 1.0, 0.0, 0.0));
            records.push(InequalityRecord::new(
                state.time,
                "picard_residual",
                rep.residuals.last().copied().unwrap_or(f64::NAN),
                cfg.solver.tol_picard,
                0.0,
                0.0,
            ));
        }
        let grid = &*state.f.grid;
        write_snapshot(&out_dir.join(format!("f_{n:05}.vsg")), &Snapshot::from_distribution(&state.f))?;
        write_snapshot(&out_dir.join(format!("u_{n:05}.vsg")), &Snapshot::from_velocity(grid, &state.fluid))?;
    }
    write_diagnostics(&out_dir.join("diagnostics.csv"), &records, cfg.output.precision)?;

    let mut manifest = Manifest { config_text: cfg.to_text(), ..Default::default() };
    manifest.push("program", concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")));
    manifest.push("dependencies", "rustfft 6, rayon 1, rand_chacha 0.3");
    manifest.push("snapshots", traj.snapshots.len());
    manifest.push("steps", traj.samples.len().saturating_sub(1));
    manifest.push("effective_dt", format!("{:?}", traj.dt));
    manifest.push("initial_moments", format!("{:?}", out.init.moments));
    manifest.push("initial_boundary_mass", format!("{:?}", out.init.boundary_mass));
    manifest.push("wall_seconds_simulation", format!("{sim_secs:.3}"));
    manifest.push("wall_seconds_total", format!("{:.3}", started.elapsed().as_secs_f64()));
    for w in &traj.warnings {
        manifest.push("warning", w);
    }
    manifest.write(&out_dir.join("manifest.txt"))?;
    Ok(RunSummary { records, picard: out.picard, warnings: traj.warnings.clone(), out_dir: out_dir.to_path_buf() })
}

/// One verification result.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub record: InequalityRecord,
}

pub const SUITES: &[&str] = &["oracles", "conservation", "inequalities", "contraction"];

pub fn verify_suite(name: &str) -> Result<Vec<Check>> {
    let tag = |suite: &'static str, v: Vec<InequalityRecord>| -> Vec<Check> {
        v.into_iter().map(|record| Check { suite, record }).collect()
    };
    match name {
        "oracles" => Ok(tag("oracles", oracle_suite()?)),
        "conservation" => Ok(tag("conservation", conservation_suite()?)),
        "inequalities" => Ok(tag("inequalities", inequality_suite()?)),
        "contraction" => Ok(tag("contraction", contraction_suite()?)),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(verify_suite(s)?);
            }
            Ok(out)
        }
        other => Err(Error::UnknownSuite(other.to_string())),
    }
}

pub fn checks_csv(checks: &[Check], digits: usize) -> String {
    let mut out = String::from("suite,t,name,lhs,rhs,margin,pass\n");
    for c in checks {
        out.push_str(c.suite);
        out.push(',');
        out.push_str(&crate::output::record_row(&c.record, digits));
        out.push('\n');
    }
    out
}

pub fn margin_table(checks: &[Check]) -> String {
    let mut out = format!("{:<13} {:<36} {:>12} {:>12} {:>12}  pass\n", "suite", "check", "lhs", "rhs", "margin");
    for c in checks {
        let r = &c.record;
        out.push_str(&format!(
            "{:<13} {:<36} {:>12} {:>12} {:>12}  {}\n",
            c.suite,
            r.name,
            fmt_num(r.lhs, 4),
            fmt_num(r.rhs, 4),
            fmt_num(r.margin, 4),
            if r.pass { "ok" } else { "FAIL" }
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// closed-form references

/// `f₀ = Π_a (1 + ½cos x_a) · e^{−|v|²/2} / ((2π)^{d/2} L^d)` on `L = 2π`,
/// unit mass.
pub fn reference_gaussian(d: usize) -> impl Fn(&[f64; 3], &[f64; 3]) -> f64 {
    let norm = (2.0 * PI).powf(d as f64 / 2.0) * (2.0 * PI).powi(d as i32);
    move |x, v| {
        let mut s = 1.0 / norm;
        for a in 0..d {
            s *= (1.0 + 0.5 * x[a].cos()) * (-0.5 * v[a] * v[a]).exp();
        }
        s
    }
}

/// Drag-only exact solution `e^{dt} f₀(x − v(e^t − 1), v e^t)`.
pub fn drag_only_exact<F>(f0: F, d: usize, t: f64) -> impl Fn(&[f64; 3], &[f64; 3]) -> f64
where
    F: Fn(&[f64; 3], &[f64; 3]) -> f64,
{
    let e = t.exp();
    let amp = (d as f64 * t).exp();
    move |x, v| {
        let mut xf = [0.0; 3];
        let mut vf = [0.0; 3];
        for a in 0..d {
            xf[a] = x[a] - v[a] * (e - 1.0);
            vf[a] = v[a] * e;
        }
        amp * f0(&xf, &vf)
    }
}

/// L¹ distance between `f` and a closed form over the phase grid.
pub fn l1_error<F>(f: &DistributionFunction, exact: F) -> f64
where
    F: Fn(&[f64; 3], &[f64; 3]) -> f64 + Sync,
{
    use rayon::prelude::*;
    let grid = &*f.grid;
    let nv = grid.velocity.total();
    let w = grid.v_weights();
    let per_x: Vec<f64> = (0..grid.spatial.total())
        .into_par_iter()
        .map(|ix| {
            let x = grid.spatial.point(ix);
            let row = f.row(ix);
            let pts = grid.v_points();
            crate::sum::pairwise_sum_by(nv, &|j| w[j] * (row[j] - exact(&x, &pts[j])).abs())
        })
        .collect();
    crate::sum::pairwise_sum(&per_x) * grid.spatial.cell_volume()
}

/// Drag-only run with `u ≡ 0` frozen; returns the L¹ error at `t_final`.
pub fn drag_only_error(d: usize, n: usize, dt: f64, t_final: f64) -> Result<f64> {
    let grid = Arc::new(make_phase_grid(d, n, 2.0 * PI, n, 6.0)?);
    let f0 = DistributionFunction::from_fn(grid.clone(), reference_gaussian(d));
    let u = FluidState::zeros(grid.spatial.clone());
    let (steps, dt) = window_steps(t_final, dt)?;
    let (f, _) = advance_frozen(&f0, &u, dt, steps, &VlasovOptions::default())?;
    drop(f0);
    Ok(l1_error(&f, drag_only_exact(reference_gaussian(d), d, f.time)))
}

fn drag_only_config(kinetic: KineticFamily) -> SimConfig {
    let mut cfg = canonical_config();
    cfg.init.kinetic = kinetic;
    cfg.init.fluid = FluidFamily::Zero;
    cfg.solver.freeze_fluid = true;
    cfg
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn seeded_field(grid: &SpatialGrid, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..grid.dim()).map(|_| (0..grid.total()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

// ---------------------------------------------------------------------------
// suites

/// Constant in the drag-only moment error bound `C·(dt² + h_v²)`.
const DRAG_MOMENT_C: f64 = 1e-3;

fn oracle_suite() -> Result<Vec<InequalityRecord>> {
    let mut out = Vec::new();

    // Stokes modewise decay, implicit Euler and Crank–Nicolson.
    let sg = SpatialGrid::new(2, 16, 2.0 * PI)?;
    for cn in [false, true] {
        let dt = 0.01;
        let mut state = FluidState::from_fn(sg.clone(), |x| [(2.0 * x[1]).sin(), 0.0, 0.0]);
        let opts = StokesOptions { crank_nicolson: cn, dealias: false };
        let zero = SourceFields::zeros(&sg);
        for _ in 0..10 {
            state = stokes_step(&state, &zero, dt, &opts)?;
        }
        let factor = if cn { ((1.0 - 2.0 * dt) / (1.0 + 2.0 * dt)).powi(10) } else { (1.0 + 4.0 * dt).powi(-10) };
        let exact = FluidState::from_fn(sg.clone(), |x| [factor * (2.0 * x[1]).sin(), 0.0, 0.0]);
        let name = if cn { "stokes_mode_decay_cn" } else { "stokes_mode_decay_ie" };
        out.push(InequalityRecord::new(0.1, name, max_abs_diff(&state.u, &exact.u), 1e-12, factor, 0.0));
    }

    // Leray projection idempotence and divergence after coupled Stokes steps.
    let g3 = SpatialGrid::new(3, 8, 2.0 * PI)?;
    let w = seeded_field(&g3, 7);
    let p1 = leray_project(&g3, &w);
    let p2 = leray_project(&g3, &p1);
    let scale = p1.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    out.push(InequalityRecord::new(0.0, "leray_idempotence", max_abs_diff(&p1, &p2) / scale, 1e-12, 0.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let src =
        SourceFields { rho: (0..g3.total()).map(|_| rng.gen_range(0.0..1.0)).collect(), rho_v: seeded_field(&g3, 12) };
    let mut state = FluidState { u: p1, ..FluidState::zeros(g3.clone()) };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        state = stokes_step(&state, &src, 0.01, &StokesOptions::default())?;
        worst = worst.max(relative_divergence(&g3, &state.u));
    }
    out.push(InequalityRecord::new(0.2, "stokes_divergence_max", worst, 1e-10, 0.0, 0.0));

    // Drag-only transport against the closed form.
    let err = drag_only_error(1, 64, 1e-3, 0.5)?;
    out.push(InequalityRecord::new(0.5, "drag_only_l1_error_d1_n64", err, 1e-3, 0.0, 0.0));

    // Drag-only moment decay: P(t) = e^{−t}P(0), M₂(t) = e^{−2t}M₂(0) and
    // ½M₂(t) + ∫₀^t M₂ = ½M₂(0).
    let mut cfg = drag_only_config(KineticFamily::ShiftedMaxwellian);
    cfg.init.drift = 1.0;
    cfg.time.t_final = 0.5;
    cfg.output.stride = 500;
    let traj = simulate(&cfg)?.trajectory;
    let first = &traj.samples[0];
    let last = traj.samples.last().expect("samples");
    // Discrete moment error is bounded by C·(dt² + h_v²); streaming leaves
    // velocity moments unchanged, so h_x does not enter.
    let h_v = traj.f0.grid.velocity.spacing();
    let tol = DRAG_MOMENT_C * (traj.dt * traj.dt + h_v * h_v);
    let p_err = (last.kinetic_momentum[0] / first.kinetic_momentum[0] - (-last.t).exp()).abs();
    out.push(InequalityRecord::new(last.t, "drag_only_momentum_decay", p_err, tol, DRAG_MOMENT_C, 0.0));
    let m2_err = (last.moments[2] / first.moments[2] - (-2.0 * last.t).exp()).abs();
    out.push(InequalityRecord::new(last.t, "drag_only_second_moment_decay", m2_err, tol, DRAG_MOMENT_C, 0.0));
    let energy = check_energy_identity(&traj.samples, tol, 1e-10);
    out.push(InequalityRecord { name: "drag_only_energy_identity".into(), ..energy.residual });

    // Gaussian tail with v_max = 6σ.
    let g = Arc::new(make_phase_grid(1, 8, 2.0 * PI, 64, 6.0)?);
    let gauss = DistributionFunction::from_fn(g, |_, v| (-0.5 * v[0] * v[0]).exp());
    out.push(InequalityRecord::new(0.0, "gaussian_boundary_mass", boundary_mass_monitor(&gauss), 1e-7, 0.0, 0.0));

    // Ball indicator, d = 3: bound constant (4π/3 + 1)(4π/9)^{1/3} ≈ 5.80.
    let g = Arc::new(make_phase_grid(3, 4, 1.0, 40, 2.0)?);
    let ball =
        DistributionFunction::from_fn(g, |_, v| if v[0] * v[0] + v[1] * v[1] + v[2] * v[2] <= 1.0 { 1.0 } else { 0.0 });
    let [rec, _] = check_moment_interpolation(&ball, 0.0)?;
    let exact_const = (4.0 * PI / 3.0 + 1.0) * (4.0 * PI / 9.0f64).powf(1.0 / 3.0);
    let rel = (rec.rhs.cbrt() / exact_const - 1.0).abs();
    out.push(InequalityRecord::new(0.0, "ball_interp_bound_constant", rel, 0.05, exact_const, 0.0));
    out.push(InequalityRecord { name: "ball_interp_m0_l3".into(), ..rec });

    // Maxwellian margins stable under velocity refinement.
    let margin = |nv: usize| -> Result<[f64; 2]> {
        let g = Arc::new(make_phase_grid(1, 8, 2.0 * PI, nv, 6.0)?);
        let f = DistributionFunction::from_fn(g, |x, v| (1.0 + 0.5 * x[0].cos()) * (-0.5 * v[0] * v[0]).exp());
        let [a, b] = check_moment_interpolation(&f, 0.0)?;
        Ok([a.margin / a.rhs, b.margin / b.rhs])
    };
    let (coarse, fine) = (margin(64)?, margin(128)?);
    for (i, name) in ["maxwellian_margin_refinement_m0", "maxwellian_margin_refinement_m1"].iter().enumerate() {
        let change = (coarse[i] / fine[i] - 1.0).abs();
        out.push(InequalityRecord::new(0.0, *name, change, 0.01, 0.0, 0.0));
    }

    // Single-mode H² closed form.
    let a = 0.7;
    let u = FluidState::from_fn(sg.clone(), |x| [a * (3.0 * x[1]).sin(), 0.0, 0.0]);
    let n = sobolev_norms(&sg, &u.u);
    let expected = a * (1.0f64 + 9.0 + 81.0).sqrt() * 2.0 * PI / 2f64.sqrt();
    out.push(InequalityRecord::new(0.0, "single_mode_h2_norm", (n.h2 / expected - 1.0).abs(), 1e-12, 0.0, 0.0));

    // Snapshot round trip.
    let g = Arc::new(make_phase_grid(2, 4, 2.0 * PI, 6, 3.0)?);
    let f = DistributionFunction::from_fn(g, reference_gaussian(2));
    let s = Snapshot::from_distribution(&f);
    let back = decode(&encode(&s)?)?;
    out.push(InequalityRecord::new(
        0.0,
        "snapshot_round_trip_mismatch",
        if back.bit_eq(&s) { 0.0 } else { 1.0 },
        0.0,
        0.0,
        0.0,
    ));
    Ok(out)
}

fn final_records(cfg: &SimConfig) -> Result<(Trajectory, Vec<InequalityRecord>)> {
    let traj = simulate(cfg)?.trajectory;
    let (idx, state) = traj.snapshots.last().expect("snapshot").clone();
    let recs = evaluate_checks(cfg, &traj, idx, &state)?;
    Ok((traj, recs))
}

fn find(recs: &[InequalityRecord], name: &str) -> InequalityRecord {
    recs.iter().find(|r| r.name == name).cloned().expect("record exists")
}

/// Record `min_ratio ≤ coarse/fine`.
fn ratio_record(t: f64, name: &str, coarse: f64, fine: f64, min_ratio: f64) -> InequalityRecord {
    let ratio = if fine > 0.0 { coarse / fine } else { f64::INFINITY };
    InequalityRecord::new(t, name, min_ratio, ratio, ratio, 0.0)
}

fn conservation_suite() -> Result<Vec<InequalityRecord>> {
    let mut out = Vec::new();
    let cfg = canonical_config();
    let (_, recs) = final_records(&cfg)?;
    for name in
        ["mass_drift", "momentum_drift", "momentum_drift_coef2", "energy_identity_residual", "energy_monotone_rise"]
    {
        out.push(find(&recs, name));
    }
    let mut coarse = cfg.clone();
    coarse.time.dt *= 2.0;
    let (_, coarse_recs) = final_records(&coarse)?;
    let t = cfg.time.t_final;
    out.push(ratio_record(
        t,
        "momentum_drift_dt_ratio",
        find(&coarse_recs, "momentum_drift").lhs,
        find(&recs, "momentum_drift").lhs,
        1.8,
    ));
    out.push(ratio_record(
        t,
        "energy_residual_dt_ratio",
        find(&coarse_recs, "energy_identity_residual").lhs,
        find(&recs, "energy_identity_residual").lhs,
        1.8,
    ));

    let mut corrected = cfg.clone();
    corrected.solver.conservative_correction = true;
    corrected.diag.tol_mass = 1e-12;
    let (_, cr) = final_records(&corrected)?;
    out.push(InequalityRecord { name: "mass_drift_corrected".into(), ..find(&cr, "mass_drift") });

    let zero = {
        let mut z = cfg.clone();
        z.init.kinetic = KineticFamily::Zero;
        z.init.fluid = FluidFamily::Zero;
        z.time.t_final = 0.1;
        z
    };
    let (_, zr) = final_records(&zero)?;
    for name in ["mass_drift", "momentum_drift"] {
        let r = find(&zr, name);
        out.push(InequalityRecord::new(r.t, format!("zero_data_{name}"), r.lhs, 0.0, 0.0, 0.0));
    }
    Ok(out)
}

fn inequality_suite() -> Result<Vec<InequalityRecord>> {
    let mut out = Vec::new();
    let base = canonical_config();

    // Interpolation bounds at every snapshot for three families.
    for (fam, tag) in [
        (KineticFamily::BallIndicatorSmoothed, "indicator"),
        (KineticFamily::Maxwellian, "maxwellian"),
        (KineticFamily::TwoStream, "two_stream"),
    ] {
        let mut cfg = base.clone();
        cfg.init.kinetic = fam;
        let traj = simulate(&cfg)?.trajectory;
        let tol_rel = relative_tolerance(&cfg, traj.dt, &traj.f0.grid);
        let mut worst: [Option<InequalityRecord>; 2] = [None, None];
        for (_, state) in &traj.snapshots {
            let pair = check_moment_interpolation(&state.f, tol_rel)?;
            for (slot, rec) in worst.iter_mut().zip(pair) {
                let replace = match slot {
                    None => true,
                    Some(w) => !rec.pass && w.pass || (rec.pass == w.pass && rec.margin / rec.rhs < w.margin / w.rhs),
                };
                if replace {
                    *slot = Some(rec);
                }
            }
        }
        for rec in worst.into_iter().flatten() {
            out.push(InequalityRecord { name: format!("{}_{tag}_worst_snapshot", rec.name), ..rec });
        }
    }

    // Moment recurrence, gradient growth and density norms on the canonical case.
    let cfg = base.clone();
    let (traj, recs) = final_records(&cfg)?;
    for k in 1..=6 {
        out.push(find(&recs, &format!("moment_recurrence_k{k}")));
    }
    for k in [0, 2, 4] {
        let mut r = find(&recs, &format!("gradient_moment_growth_k{k}"));
        let rep = check_gradient_moment_growth(&traj.samples, k, cfg.diag.c0, 0.0)?;
        r.constant_used = rep.empirical_c0;
        out.push(r);
    }
    out.extend(check_density_norm_classes(&traj.samples));

    // Reproducibility of the canonical records.
    let (_, again) = final_records(&cfg)?;
    let identical = recs.len() == again.len()
        && recs
            .iter()
            .zip(&again)
            .all(|(a, b)| a.lhs.to_bits() == b.lhs.to_bits() && a.rhs.to_bits() == b.rhs.to_bits() && a.name == b.name);
    out.push(InequalityRecord::new(
        cfg.time.t_final,
        "records_bit_reproducible",
        if identical { 0.0 } else { 1.0 },
        0.0,
        0.0,
        0.0,
    ));

    // Density sup bound on the drag-only Gaussian with r = h_v, checked at
    // every snapshot up to T = 1.
    let mut dcfg = drag_only_config(KineticFamily::Maxwellian);
    dcfg.output.stride = 50;
    let traj = simulate(&dcfg)?.trajectory;
    let r = traj.f0.grid.velocity.spacing();
    let mut worst: Option<InequalityRecord> = None;
    for (idx, _) in &traj.snapshots {
        let rec = check_density_sup_bound(&traj.f0, &traj.samples[..=*idx], r, 0.0)?;
        let replace = worst.as_ref().is_none_or(|w| rec.margin < w.margin);
        if replace {
            worst = Some(rec);
        }
    }
    let w = worst.expect("snapshots");
    out.push(InequalityRecord { name: "density_sup_bound_drag_only_min_margin".into(), pass: w.margin > 0.0, ..w });
    Ok(out)
}

fn contraction_suite() -> Result<Vec<InequalityRecord>> {
    let mut out = Vec::new();
    let cfg = canonical_config();
    let opts = coupling_options(&cfg);
    let (init, _) = initial_state(&cfg)?;
    let base = picard_options(&cfg);

    let mut alphas = Vec::new();
    let mut first = None;
    for (i, t_w) in [base.t_w, base.t_w / 2.0, base.t_w / 4.0].into_iter().enumerate() {
        let popts = PicardOptions { t_w, ..base.clone() };
        let outcome = picard_solve(&init, &popts, &opts, None)?;
        let rep = &outcome.report;
        alphas.push(rep.alpha_est);
        if i == 0 {
            out.push(InequalityRecord::new(
                t_w,
                "picard_converged",
                if rep.converged { 0.0 } else { 1.0 },
                0.0,
                0.0,
                0.0,
            ));
            out.push(InequalityRecord::new(t_w, "picard_iterates", rep.iterates as f64, 10.0, 0.0, 0.0));
            let strict = InequalityRecord::new(t_w, "picard_alpha_est", rep.alpha_est, 1.0, 0.0, 0.0);
            out.push(InequalityRecord { pass: rep.alpha_est < 1.0, ..strict });
            out.push(InequalityRecord::new(
                t_w,
                "picard_ratios_finite",
                if rep.contraction_ratios.iter().all(|r| r.is_finite()) { 0.0 } else { 1.0 },
                0.0,
                0.0,
                0.0,
            ));
            first = Some(outcome);
        }
    }
    let first = first.expect("first window");
    out.push(InequalityRecord::new(base.t_w / 2.0, "alpha_halving_1", alphas[1], alphas[0], 0.0, 0.0));
    out.push(InequalityRecord::new(base.t_w / 4.0, "alpha_halving_2", alphas[2], alphas[1], 0.0, 0.0));

    // Uniqueness witness: a different initial guess reaches the same point.
    let (n_sub, dt) = window_steps(base.t_w, base.dt)?;
    let mut other = FluidState::zeros(init.fluid.grid.clone());
    other.u[0].iter_mut().for_each(|x| *x = -0.25);
    let guess = constant_guess(&other, n_sub, dt);
    let second = picard_solve_from(&init, guess, &base, &opts, None)?;
    let diff = x_norm_diff(&first.velocity, &second.velocity, dt);
    out.push(InequalityRecord::new(base.t_w, "picard_uniqueness_x_diff", diff, 2.0 * base.tol, 0.0, 0.0));

    // Picard fixed point against the time march over the same window.
    let spec = sample_spec(&cfg);
    let traj = march(&init, base.t_w, base.dt, usize::MAX, &opts, &spec)?;
    let (_, end) = traj.snapshots.last().expect("snapshot");
    let d_march = sobolev_norms(
        &end.fluid.grid,
        &end.fluid
            .u
            .iter()
            .zip(&first.state.fluid.u)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect())
            .collect::<Vec<Vec<f64>>>(),
    )
    .h1;
    out.push(InequalityRecord::new(base.t_w, "picard_vs_march_h1", d_march, dt, 0.0, 0.0));

    // Two windows of T_w against one window of 2T_w.
    let one = picard_solve(&first.state, &base, &opts, None)?;
    let double = picard_solve(&init, &PicardOptions { t_w: 2.0 * base.t_w, ..base.clone() }, &opts, None)?;
    let d_win = sobolev_norms(
        &one.state.fluid.grid,
        &one.state
            .fluid
            .u
            .iter()
            .zip(&double.state.fluid.u)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect())
            .collect::<Vec<Vec<f64>>>(),
    )
    .h1;
    out.push(InequalityRecord::new(2.0 * base.t_w, "window_consistency_h1", d_win, base.t_w * base.t_w, 0.0, 0.0));

    // Energy bound on the iterate: ‖u‖²_{L∞L²} + 2‖∇u‖²_{L²L²} ≤ ‖u₀‖² + ∫∫|v|²f₀.
    let series = &first.velocity;
    let sup_l2 = series.iter().map(|s| 2.0 * s.energy()).fold(0.0, f64::max);
    let grad: f64 = series.iter().skip(1).map(|s| dt * gradient_energy(&s.grid, &s.u)).sum();
    let lhs = sup_l2 + 2.0 * grad;
    let rhs = 2.0 * init.fluid.energy() + total_moment(&init.f, 2.0);
    out.push(InequalityRecord::new(base.t_w, "picard_energy_bound", lhs, rhs, 0.0, 1e-10 * rhs));

    // Decoupled limit.
    let mut zcfg = cfg.clone();
    zcfg.init.kinetic = KineticFamily::Zero;
    let (zinit, _) = initial_state(&zcfg)?;
    let z = picard_solve(&zinit, &base, &opts, None)?;
    out.push(InequalityRecord::new(base.t_w, "decoupled_alpha_est", z.report.alpha_est, 0.0, 0.0, 0.0));
    out.push(InequalityRecord::new(base.t_w, "decoupled_iterates", z.report.iterates as f64, 2.0, 0.0, 0.0));
    Ok(out)
}

/// Mass drift of a trajectory (exposed for tests scripting their own runs).
pub fn mass_drift(traj: &Trajectory) -> f64 {
    let m0 = mass(&traj.f0);
    traj.snapshots.iter().map(|(_, s)| ((mass(&s.f) - m0) / m0).abs()).fold(0.0, f64::max)
}

/// Total momentum `∫∫v f + ∫u` of a state.
pub fn total_momentum(state: &CoupledState) -> Vec<f64> {
    momentum(&state.f).iter().zip(state.fluid.momentum()).map(|(a, b)| a + b).collect()
}

/// Runs `cfg` once per value of `param`, each in its own subdirectory, and
/// writes `summary.csv`.
pub fn sweep(cfg: &SimConfig, param: &str, values: &[String], out_dir: &Path) -> Result<String> {
    std::fs::create_dir_all(out_dir)?;
    let digits = cfg.output.precision;
    let mut summary = String::from(
        "param,value,mass_drift,momentum_drift,energy_residual,alpha_est,picard_iterates,picard_converged,all_pass\n",
    );
    for value in values {
        let mut c = cfg.clone();
        c.set(param, value).map_err(|m| Error::Validation(vec![format!("{param}: {m}")]))?;
        let problems = c.validate();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let dir_name: String = format!("{param}={value}")
            .chars()
            .map(|ch| if ch.is_ascii_alphanumeric() || "._=-".contains(ch) { ch } else { '_' })
            .collect();
        let dir = out_dir.join(dir_name);
        c.output.dir = dir.to_string_lossy().into_owned();
        let result = run(&c, &dir)?;
        // Contraction of the first window, whatever the run mode.
        let (init, _) = initial_state(&c)?;
        let first = picard_solve(&init, &picard_options(&c), &coupling_options(&c), None)?;
        summary.push_str(&format!(
            "{param},{value},{},{},{},{},{},{},{}\n",
            fmt_num(result.final_value("mass_drift"), digits),
            fmt_num(result.final_value("momentum_drift"), digits),
            fmt_num(result.final_value("energy_identity_residual"), digits),
            fmt_num(first.report.alpha_est, digits),
            first.report.iterates,
            first.report.converged,
            result.all_pass()
        ));
    }
    std::fs::write(out_dir.join("summary.csv"), &summary)?;
    Ok(summary)
}
