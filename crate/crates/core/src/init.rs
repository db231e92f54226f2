//! Initial-condition families.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{FluidFamily, InitConfig, KineticFamily, SimConfig};
use crate::diagnostics::boundary_mass_monitor;
use crate::error::{Error, Result};
use crate::fluid::{leray_project, relative_divergence, FluidState};
use crate::grid::{PhaseGrid, SpatialGrid, VelocityGrid, DEFAULT_NODE_BUDGET};
use crate::kinetics::{mass, total_moments, DistributionFunction};

/// Values recorded while building the initial pair.
#[derive(Clone, Debug, PartialEq)]
pub struct InitReport {
    /// `∫∫|v|^k f₀` for `k = 0..=k_max`.
    pub moments: Vec<f64>,
    pub boundary_mass: f64,
    pub relative_divergence: f64,
}

pub fn build_grid(cfg: &SimConfig) -> Result<Arc<PhaseGrid>> {
    let g = &cfg.grid;
    let spatial = SpatialGrid::new(g.d, g.n_x, g.length)?;
    let velocity = VelocityGrid::new(g.d, g.n_v, g.v_max, g.quadrature)?;
    Ok(Arc::new(PhaseGrid::new(spatial, velocity, DEFAULT_NODE_BUDGET)?))
}

fn gauss(v: &[f64; 3], center: f64, sigma: f64, d: usize) -> f64 {
    let mut r2 = (v[0] - center).powi(2);
    for x in &v[1..d] {
        r2 += x * x;
    }
    (-0.5 * r2 / (sigma * sigma)).exp()
}

/// Unnormalised velocity profile of a family.
fn velocity_profile(init: &InitConfig, d: usize) -> impl Fn(&[f64; 3]) -> f64 + '_ {
    move |v: &[f64; 3]| {
        let sigma = init.thermal_width;
        match init.kinetic {
            KineticFamily::Maxwellian => gauss(v, 0.0, sigma, d),
            KineticFamily::ShiftedMaxwellian => gauss(v, init.drift, sigma, d),
            KineticFamily::TwoStream => {
                0.5 * (gauss(v, init.stream_speed, sigma, d) + gauss(v, -init.stream_speed, sigma, d))
            }
            KineticFamily::BallIndicatorSmoothed => {
                let r = v[..d].iter().map(|x| x * x).sum::<f64>().sqrt();
                0.5 * (1.0 - ((r - init.ball_radius) / init.ball_smoothing).tanh())
            }
            KineticFamily::Zero => 0.0,
        }
    }
}

/// `f₀(x, v) = c·(1 + ε cos(2πm x₁/L))·g(v)` with `c` fixing the discrete mass.
pub fn build_distribution(grid: Arc<PhaseGrid>, init: &InitConfig) -> DistributionFunction {
    let d = grid.dim();
    let wave = 2.0 * PI * init.perturbation_mode as f64 / grid.spatial.length();
    let profile = velocity_profile(init, d);
    let mut f =
        DistributionFunction::from_fn(grid, |x, v| (1.0 + init.perturbation * (wave * x[0]).cos()) * profile(v));
    let m = mass(&f);
    if m > 0.0 {
        let c = init.mass / m;
        f.values.iter_mut().for_each(|x| *x *= c);
    }
    f
}

/// Fluid initial field, Leray-projected.
///
/// `single_mode` with mode 0 is the constant field `A e₁`; with mode `m ≥ 1`
/// it is `A sin(2πm x₂/L) e₁` when `d ≥ 2`. In one dimension only the mean
/// survives the projection. `random_bandlimited` draws uniform Fourier
/// coefficients for integer wavevectors with `|k_i| ≤ bandwidth` and scales
/// the projected field to `‖u‖_∞ = A`.
pub fn build_fluid(grid: &SpatialGrid, init: &InitConfig) -> FluidState {
    let d = grid.dim();
    let a = init.fluid_amplitude;
    let wave = 2.0 * PI / grid.length();
    let raw = match init.fluid {
        FluidFamily::Zero => FluidState::zeros(grid.clone()),
        FluidFamily::SingleMode => {
            let m = init.fluid_mode as f64;
            FluidState::from_fn(grid.clone(), |x| {
                let shape = if m == 0.0 {
                    1.0
                } else if d == 1 {
                    (m * wave * x[0]).sin()
                } else {
                    (m * wave * x[1]).sin()
                };
                [a * shape, 0.0, 0.0]
            })
        }
        FluidFamily::RandomBandlimited => {
            let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
            let b = init.fluid_bandwidth as i64;
            let mut modes = Vec::new();
            let ranges: Vec<i64> = (-b..=b).collect();
            let count = ranges.len().pow(d as u32);
            for flat in 0..count {
                let mut k = [0i64; 3];
                let mut rest = flat;
                for kk in k.iter_mut().take(d) {
                    *kk = ranges[rest % ranges.len()];
                    rest /= ranges.len();
                }
                let mut coef = [[0.0; 2]; 3];
                for c in coef.iter_mut().take(d) {
                    c[0] = rng.gen_range(-1.0..1.0);
                    c[1] = rng.gen_range(-1.0..1.0);
                }
                modes.push((k, coef));
            }
            FluidState::from_fn(grid.clone(), |x| {
                let mut out = [0.0; 3];
                for (k, coef) in &modes {
                    let phase: f64 = (0..d).map(|i| k[i] as f64 * wave * x[i]).sum();
                    let (s, c) = phase.sin_cos();
                    for comp in 0..d {
                        out[comp] += coef[comp][0] * c + coef[comp][1] * s;
                    }
                }
                out
            })
        }
    };
    let mut u = leray_project(grid, &raw.u);
    if init.fluid == FluidFamily::RandomBandlimited {
        let sup = u.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        if sup > 0.0 {
            u.iter_mut().flatten().for_each(|x| *x *= a / sup);
        }
    }
    FluidState { u, ..FluidState::zeros(grid.clone()) }
}

/// Builds `(f₀, u₀)` and checks the velocity truncation against the
/// configured boundary threshold.
pub fn build_initial_condition(cfg: &SimConfig) -> Result<(DistributionFunction, FluidState, InitReport)> {
    let grid = build_grid(cfg)?;
    let f = build_distribution(grid.clone(), &cfg.init);
    let fluid = build_fluid(&grid.spatial, &cfg.init);
    let boundary_mass = boundary_mass_monitor(&f);
    if boundary_mass > cfg.diag.boundary_threshold {
        return Err(Error::BoundaryBreach { fraction: boundary_mass, threshold: cfg.diag.boundary_threshold });
    }
    let report = InitReport {
        moments: total_moments(&f, cfg.diag.k_max),
        boundary_mass,
        relative_divergence: relative_divergence(&grid.spatial, &fluid.u),
    };
    Ok((f, fluid, report))
}
