//! The fixed-point map 𝒯 and the two drivers built on it.
//!
//! Within one substep both solvers read the state at the left end point:
//! the Vlasov step uses the trial velocity `u*_i` and the Stokes step is fed
//! the moments of `f_i`. At a fixed point of 𝒯 the window therefore
//! reproduces [`march`] exactly.

use crate::diagnostics::{boundary_mass_monitor, sample, EnergyLedger, Sample, SampleSpec};
use crate::error::{Error, Result};
use crate::fluid::{sobolev_norms, stokes_step, FluidState, SourceFields, StokesOptions};
use crate::kinetics::{density_and_momentum, total_moment, vlasov_step, DistributionFunction, VlasovOptions};

/// Kinetic and fluid phase at a common time.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub f: DistributionFunction,
    pub fluid: FluidState,
    pub time: f64,
    pub ledger: EnergyLedger,
}

impl CoupledState {
    pub fn new(f: DistributionFunction, mut fluid: FluidState) -> Result<Self> {
        if fluid.grid != f.grid.spatial {
            return Err(Error::GridMismatch("fluid and kinetic spatial grids differ".into()));
        }
        fluid.time = f.time;
        let e_kin = 0.5 * total_moment(&f, 2.0);
        let e_fluid = fluid.energy();
        let ledger = EnergyLedger { t: f.time, e_kin, e_fluid, d_visc: 0.0, d_drag: 0.0, e_total_0: e_kin + e_fluid };
        Ok(Self { time: f.time, f, fluid, ledger })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BreachPolicy {
    Halt,
    Warn,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingOptions {
    pub vlasov: VlasovOptions,
    pub stokes: StokesOptions,
    /// Keep the fluid fixed at its initial state (kinetic-only runs).
    pub freeze_fluid: bool,
    /// Largest admissible boundary-shell mass fraction.
    pub breach_threshold: f64,
    pub breach_policy: BreachPolicy,
    /// Constant in the window guard `c_guard·T_w·‖m₀f₀‖²_{L³} ≤ ½`.
    pub c_guard: f64,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            vlasov: VlasovOptions::default(),
            stokes: StokesOptions::default(),
            freeze_fluid: false,
            breach_threshold: 1e-4,
            breach_policy: BreachPolicy::Warn,
            c_guard: 1.0,
        }
    }
}

/// Per-substep callback: `(f_i, u_i, clipped mass so far)`.
pub type Observer<'a> = dyn FnMut(&DistributionFunction, &FluidState, f64) -> Result<()> + 'a;

/// Output of one application of 𝒯.
#[derive(Clone, Debug)]
pub struct TOutput {
    /// `u = 𝒯(u*)` at the substep times, starting with the initial fluid.
    pub velocity: Vec<FluidState>,
    pub f: DistributionFunction,
    pub clipped_mass: f64,
    pub warnings: Vec<String>,
}

fn sources(f: &DistributionFunction) -> Result<SourceFields> {
    let (rho, rho_v) = density_and_momentum(f)?;
    Ok(SourceFields { rho, rho_v })
}

fn check_breach(f: &DistributionFunction, opts: &CouplingOptions, warnings: &mut Vec<String>) -> Result<()> {
    let fraction = boundary_mass_monitor(f);
    if fraction > opts.breach_threshold {
        match opts.breach_policy {
            BreachPolicy::Halt => return Err(Error::BoundaryBreach { fraction, threshold: opts.breach_threshold }),
            BreachPolicy::Warn => warnings.push(format!(
                "t = {}: boundary mass fraction {fraction:.3e} exceeds {:.3e}",
                f.time, opts.breach_threshold
            )),
        }
    }
    Ok(())
}

/// One coupled substep from `(f, u)`: the Vlasov step runs under `u_trial`,
/// the Stokes step is driven by the moments of `f`.
fn substep(
    f: &DistributionFunction,
    fluid: &FluidState,
    u_trial: &FluidState,
    dt: f64,
    opts: &CouplingOptions,
    warnings: &mut Vec<String>,
) -> Result<(DistributionFunction, FluidState, f64)> {
    let next_fluid = if opts.freeze_fluid {
        let mut s = fluid.clone();
        s.time += dt;
        s
    } else {
        stokes_step(fluid, &sources(f)?, dt, &opts.stokes)?
    };
    let (next_f, report) = vlasov_step(f, u_trial, dt, &opts.vlasov)?;
    warnings.extend(report.warnings);
    check_breach(&next_f, opts, warnings)?;
    Ok((next_f, next_fluid, report.clipped_mass))
}

/// Applies 𝒯 to the trial series `u_star` (`n_sub + 1` states spaced `dt`).
pub fn apply_t(
    u_star: &[FluidState],
    init: &CoupledState,
    dt: f64,
    opts: &CouplingOptions,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<TOutput> {
    if u_star.len() < 2 {
        return Err(Error::InvalidArgument("trial series needs at least two states".into()));
    }
    let n_sub = u_star.len() - 1;
    let mut warnings = Vec::new();
    let mut f = init.f.clone();
    let mut fluid = init.fluid.clone();
    let mut velocity = Vec::with_capacity(n_sub + 1);
    velocity.push(fluid.clone());
    let mut clipped = 0.0;
    for trial in &u_star[..n_sub] {
        if let Some(obs) = observer.as_mut() {
            obs(&f, &fluid, clipped)?;
        }
        let (nf, nu, c) = substep(&f, &fluid, trial, dt, opts, &mut warnings)?;
        f = nf;
        fluid = nu;
        clipped += c;
        velocity.push(fluid.clone());
    }
    if let Some(obs) = observer.as_mut() {
        obs(&f, &fluid, clipped)?;
    }
    Ok(TOutput { velocity, f, clipped_mass: clipped, warnings })
}

fn difference(a: &FluidState, b: &FluidState) -> Vec<Vec<f64>> {
    a.u.iter().zip(&b.u).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
}

/// `max_i ‖w_i‖_{H¹} + (Σ_{i≥1} dt‖w_i‖²_{H²})^{1/2}` for `w = a − b`.
pub fn x_norm_diff(a: &[FluidState], b: &[FluidState], dt: f64) -> f64 {
    let mut h1_max = 0.0f64;
    let mut h2_sq = 0.0;
    for (i, (p, q)) in a.iter().zip(b).enumerate() {
        let n = sobolev_norms(&p.grid, &difference(p, q));
        h1_max = h1_max.max(n.h1);
        if i > 0 {
            h2_sq += dt * n.h2 * n.h2;
        }
    }
    h1_max + h2_sq.sqrt()
}

/// X-norm of a single series.
pub fn x_norm(a: &[FluidState], dt: f64) -> f64 {
    let zero: Vec<FluidState> = a.iter().map(|s| FluidState::zeros(s.grid.clone())).collect();
    x_norm_diff(a, &zero, dt)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardReport {
    /// Number of applications of 𝒯.
    pub iterates: usize,
    /// `‖u_{n+1} − u_n‖_X` for each application.
    pub residuals: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub alpha_est: f64,
    pub window: f64,
    pub n_sub: usize,
    pub converged: bool,
    pub guard_value: f64,
    pub warnings: Vec<String>,
}

/// Largest consecutive ratio from the second onward, skipping ratios whose
/// numerator is below `floor`; all ratios are used when fewer than two
/// survive.
pub fn estimate_alpha(ratios: &[f64], residuals: &[f64], floor: f64) -> f64 {
    let usable: Vec<f64> = ratios
        .iter()
        .enumerate()
        .filter(|&(i, r)| residuals[i + 1] > floor && r.is_finite())
        .map(|(_, &r)| r)
        .collect();
    let tail = if usable.len() >= 2 { &usable[1..] } else { &usable[..] };
    tail.iter().copied().fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    /// State at the end of the window from the last iterate.
    pub state: CoupledState,
    pub report: PicardReport,
    /// Fluid series of the last iterate.
    pub velocity: Vec<FluidState>,
    /// Samples of the last iterate, when a spec was given.
    pub samples: Vec<Sample>,
}

/// Substep count and step for a window.
pub fn window_steps(t_w: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_w > 0.0 && t_w.is_finite() && dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("window {t_w} and step {dt} must be positive")));
    }
    let n = (t_w / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n, t_w / n as f64))
}

/// `c_guard·T_w·‖m₀f₀‖²_{L³}`.
pub fn guard_value(f: &DistributionFunction, t_w: f64, c_guard: f64) -> Result<f64> {
    let (rho, _) = density_and_momentum(f)?;
    let cube: Vec<f64> = rho.iter().map(|r| r.abs().powi(3)).collect();
    let l3 = f.grid.spatial.integrate(&cube).cbrt();
    Ok(c_guard * t_w * l3 * l3)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardOptions {
    pub t_w: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
}

/// Constant-in-window extension of `fluid` over `n_sub` substeps.
pub fn constant_guess(fluid: &FluidState, n_sub: usize, dt: f64) -> Vec<FluidState> {
    (0..=n_sub)
        .map(|i| {
            let mut s = fluid.clone();
            s.time = fluid.time + i as f64 * dt;
            s
        })
        .collect()
}

/// Picard iteration from the constant extension of `init.fluid`.
pub fn picard_solve(
    init: &CoupledState,
    popts: &PicardOptions,
    opts: &CouplingOptions,
    spec: Option<&SampleSpec>,
) -> Result<PicardOutcome> {
    let (n_sub, dt) = window_steps(popts.t_w, popts.dt)?;
    picard_solve_from(init, constant_guess(&init.fluid, n_sub, dt), popts, opts, spec)
}

/// Picard iteration from an explicit initial guess.
pub fn picard_solve_from(
    init: &CoupledState,
    guess: Vec<FluidState>,
    popts: &PicardOptions,
    opts: &CouplingOptions,
    spec: Option<&SampleSpec>,
) -> Result<PicardOutcome> {
    let (n_sub, dt) = window_steps(popts.t_w, popts.dt)?;
    if guess.len() != n_sub + 1 {
        return Err(Error::InvalidArgument(format!("guess has {} states, expected {}", guess.len(), n_sub + 1)));
    }
    if popts.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    let guard = guard_value(&init.f, popts.t_w, opts.c_guard)?;
    if guard > 0.5 {
        warnings.push(format!("window guard {guard:.3e} exceeds 1/2; contraction is not expected"));
    }

    let mut current = guess;
    let mut residuals = Vec::new();
    let mut samples = Vec::new();
    let mut last: Option<TOutput> = None;
    let mut converged = false;
    for _ in 0..popts.max_iter {
        samples.clear();
        let out = match spec {
            Some(sp) => {
                let mut obs = |f: &DistributionFunction, u: &FluidState, c: f64| -> Result<()> {
                    samples.push(sample(f, u, sp, c)?);
                    Ok(())
                };
                apply_t(&current, init, dt, opts, Some(&mut obs))?
            }
            None => apply_t(&current, init, dt, opts, None)?,
        };
        let r = x_norm_diff(&out.velocity, &current, dt);
        residuals.push(r);
        current = out.velocity.clone();
        last = Some(out);
        if !r.is_finite() {
            warnings.push("non-finite Picard residual".into());
            break;
        }
        if r <= popts.tol {
            converged = true;
            break;
        }
    }
    let out = last.expect("at least one iterate");
    warnings.extend(out.warnings.iter().cloned());
    let contraction_ratios: Vec<f64> =
        residuals.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    let floor = 1e-13 * x_norm(&current, dt).max(1.0);
    let alpha_est = estimate_alpha(&contraction_ratios, &residuals, floor);
    let fluid = current.last().cloned().expect("non-empty series");
    let mut state = CoupledState::new(out.f, fluid)?;
    state.ledger = advance_ledger(init.ledger, &samples);
    Ok(PicardOutcome {
        state,
        report: PicardReport {
            iterates: residuals.len(),
            residuals,
            contraction_ratios,
            alpha_est,
            window: popts.t_w,
            n_sub,
            converged,
            guard_value: guard,
            warnings,
        },
        velocity: current,
        samples,
    })
}

fn advance_ledger(mut ledger: EnergyLedger, samples: &[Sample]) -> EnergyLedger {
    for w in samples.windows(2) {
        ledger = ledger.advance(&w[0], &w[1]);
    }
    ledger
}

/// Samples and selected full states of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// `(index into samples, state)` at the snapshot times.
    pub snapshots: Vec<(usize, CoupledState)>,
    pub f0: DistributionFunction,
    pub dt: f64,
    pub warnings: Vec<String>,
}

/// Alternating time march `vlasov_step` / `stokes_step` to `t_final`.
/// Snapshots are kept every `stride` steps and at the end.
pub fn march(
    init: &CoupledState,
    t_final: f64,
    dt: f64,
    stride: usize,
    opts: &CouplingOptions,
    spec: &SampleSpec,
) -> Result<Trajectory> {
    let (steps, dt) = window_steps(t_final, dt)?;
    let stride = stride.max(1);
    let mut warnings = Vec::new();
    let mut state = init.clone();
    let mut samples = vec![sample(&state.f, &state.fluid, spec, 0.0)?];
    let mut snapshots = vec![(0, state.clone())];
    let mut clipped = 0.0;
    for step in 1..=steps {
        let (f, fluid, c) = substep(&state.f, &state.fluid, &state.fluid, dt, opts, &mut warnings)?;
        clipped += c;
        let s = sample(&f, &fluid, spec, clipped)?;
        let ledger = state.ledger.advance(samples.last().expect("initial sample"), &s);
        state = CoupledState { time: f.time, f, fluid, ledger };
        samples.push(s);
        if step % stride == 0 || step == steps {
            snapshots.push((samples.len() - 1, state.clone()));
        }
    }
    Ok(Trajectory { samples, snapshots, f0: init.f.clone(), dt, warnings })
}

/// Consecutive Picard windows; a snapshot is kept at every window end.
pub fn picard_run(
    init: &CoupledState,
    popts: &PicardOptions,
    n_windows: usize,
    opts: &CouplingOptions,
    spec: &SampleSpec,
) -> Result<(Trajectory, Vec<PicardReport>)> {
    let (_, dt) = window_steps(popts.t_w, popts.dt)?;
    let mut state = init.clone();
    let mut samples = vec![sample(&state.f, &state.fluid, spec, 0.0)?];
    let mut snapshots = vec![(0, state.clone())];
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    let mut clipped_total = 0.0;
    for _ in 0..n_windows {
        let out = picard_solve(&state, popts, opts, Some(spec))?;
        warnings.extend(out.report.warnings.iter().cloned());
        let converged = out.report.converged;
        reports.push(out.report);
        let base = clipped_total;
        for mut s in out.samples.into_iter().skip(1) {
            s.clipped_mass += base;
            clipped_total = s.clipped_mass;
            samples.push(s);
        }
        state = out.state;
        snapshots.push((samples.len() - 1, state.clone()));
        if !converged {
            warnings.push(format!("Picard window ending at t = {} did not converge; stopping", state.time));
            break;
        }
    }
    Ok((Trajectory { samples, snapshots, f0: init.f.clone(), dt, warnings }, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_phase_grid;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn small_state(amp: f64, u0: f64) -> CoupledState {
        let g = Arc::new(make_phase_grid(1, 16, 2.0 * PI, 32, 6.0).unwrap());
        let f = DistributionFunction::from_fn(g.clone(), |x, v| {
            amp * (1.0 + 0.5 * x[0].cos()) * (-0.5 * v[0] * v[0]).exp()
        });
        let fluid = FluidState::constant(g.spatial.clone(), &[u0]);
        CoupledState::new(f, fluid).unwrap()
    }

    fn mode_state() -> CoupledState {
        let g = Arc::new(make_phase_grid(2, 8, 2.0 * PI, 8, 4.0).unwrap());
        let f = DistributionFunction::zeros(g.clone());
        let fluid = FluidState::from_fn(g.spatial.clone(), |x| [x[1].sin(), 0.0, 0.0]);
        CoupledState::new(f, fluid).unwrap()
    }

    #[test]
    fn decoupled_map_ignores_trial_velocity() {
        let init = mode_state();
        let dt = 0.01;
        let a = constant_guess(&init.fluid, 5, dt);
        let b = constant_guess(&FluidState::zeros(init.fluid.grid.clone()), 5, dt);
        let opts = CouplingOptions::default();
        let ta = apply_t(&a, &init, dt, &opts, None).unwrap();
        let tb = apply_t(&b, &init, dt, &opts, None).unwrap();
        assert_eq!(x_norm_diff(&ta.velocity, &tb.velocity, dt), 0.0);
        // pure implicit-Euler decay of the k = 1 mode
        let factor = (1.0f64 + dt).powi(-5);
        let last = ta.velocity.last().unwrap();
        for (ix, val) in last.u[0].iter().enumerate() {
            let x = last.grid.point(ix);
            assert!((val - factor * x[1].sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_data_converges_at_once() {
        let g = Arc::new(make_phase_grid(1, 8, 2.0 * PI, 16, 4.0).unwrap());
        let init =
            CoupledState::new(DistributionFunction::zeros(g.clone()), FluidState::zeros(g.spatial.clone())).unwrap();
        let popts = PicardOptions { t_w: 0.05, dt: 0.01, tol: 1e-12, max_iter: 5 };
        let out = picard_solve(&init, &popts, &CouplingOptions::default(), None).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.iterates, 1);
        assert_eq!(out.report.alpha_est, 0.0);
    }

    #[test]
    fn picard_fixed_point_matches_march() {
        let init = small_state(0.05, 0.3);
        let popts = PicardOptions { t_w: 0.05, dt: 0.005, tol: 1e-13, max_iter: 20 };
        let opts = CouplingOptions::default();
        let out = picard_solve(&init, &popts, &opts, None).unwrap();
        assert!(out.report.converged, "{:?}", out.report.residuals);
        assert!(out.report.alpha_est < 1.0);
        let traj = march(&init, 0.05, 0.005, 100, &opts, &SampleSpec::default()).unwrap();
        let (_, end) = traj.snapshots.last().unwrap();
        let diff = end.f.values.iter().zip(&out.state.f.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
        let du = end.fluid.u[0].iter().zip(&out.state.fluid.u[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(du < 1e-10, "{du}");

        // fixed point reproduces itself
        let again = apply_t(&out.velocity, &init, 0.005, &opts, None).unwrap();
        assert!(x_norm_diff(&again.velocity, &out.velocity, 0.005) <= 1e-12);
    }

    #[test]
    fn apply_t_is_bit_deterministic() {
        let init = small_state(0.05, 0.3);
        let guess = constant_guess(&init.fluid, 4, 0.01);
        let opts = CouplingOptions::default();
        let a = apply_t(&guess, &init, 0.01, &opts, None).unwrap();
        let b = apply_t(&guess, &init, 0.01, &opts, None).unwrap();
        assert_eq!(a.f.values, b.f.values);
        for (p, q) in a.velocity.iter().zip(&b.velocity) {
            assert_eq!(p.u, q.u);
        }
    }

    #[test]
    fn zero_trajectory_stays_zero() {
        let g = Arc::new(make_phase_grid(1, 8, 2.0 * PI, 16, 4.0).unwrap());
        let init =
            CoupledState::new(DistributionFunction::zeros(g.clone()), FluidState::zeros(g.spatial.clone())).unwrap();
        let traj = march(&init, 0.1, 0.01, 3, &CouplingOptions::default(), &SampleSpec::default()).unwrap();
        assert_eq!(traj.samples.len(), 11);
        for (_, s) in &traj.snapshots {
            assert!(s.f.values.iter().all(|&x| x == 0.0));
            assert!(s.fluid.u.iter().flatten().all(|&x| x == 0.0));
        }
        assert_eq!(traj.snapshots.len(), 5);
    }

    #[test]
    fn breach_halts_when_requested() {
        let g = Arc::new(make_phase_grid(1, 8, 2.0 * PI, 32, 4.0).unwrap());
        let f = DistributionFunction::from_fn(g.clone(), |_, v| (-2.0 * (v[0] - 3.5).powi(2)).exp());
        let init = CoupledState::new(f, FluidState::zeros(g.spatial.clone())).unwrap();
        let opts = CouplingOptions { breach_policy: BreachPolicy::Halt, ..Default::default() };
        assert!(matches!(
            march(&init, 0.02, 0.01, 1, &opts, &SampleSpec::default()),
            Err(Error::BoundaryBreach { .. })
        ));
        let warn = march(&init, 0.02, 0.01, 1, &CouplingOptions::default(), &SampleSpec::default()).unwrap();
        assert!(!warn.warnings.is_empty());
    }

    #[test]
    fn alpha_filter() {
        let residuals = [1.0, 1e-3, 2e-6, 1e-20, 1e-20];
        let ratios: Vec<f64> = residuals.windows(2).map(|w| w[1] / w[0]).collect();
        let a = estimate_alpha(&ratios, &residuals, 1e-15);
        assert!((a - 2e-3).abs() < 1e-15);
    }
}
