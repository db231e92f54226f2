//! Unsteady Stokes flow with drag source on the torus, Fourier pseudospectral.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::sum::pairwise_sum;

/// Fluid velocity (one field per component) and zero-mean pressure.
#[derive(Clone, Debug)]
pub struct FluidState {
    pub grid: SpatialGrid,
    pub u: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub time: f64,
}

impl FluidState {
    pub fn zeros(grid: SpatialGrid) -> Self {
        let n = grid.total();
        let d = grid.dim();
        Self { u: vec![vec![0.0; n]; d], p: vec![0.0; n], grid, time: 0.0 }
    }

    /// Spatially constant velocity `value` (length `d`).
    pub fn constant(grid: SpatialGrid, value: &[f64]) -> Self {
        let mut s = Self::zeros(grid);
        for (comp, &c) in s.u.iter_mut().zip(value) {
            comp.iter_mut().for_each(|x| *x = c);
        }
        s
    }

    pub fn from_fn<F>(grid: SpatialGrid, f: F) -> Self
    where
        F: Fn(&[f64; 3]) -> [f64; 3],
    {
        let mut s = Self::zeros(grid);
        for i in 0..s.grid.total() {
            let val = f(&s.grid.point(i));
            for a in 0..s.grid.dim() {
                s.u[a][i] = val[a];
            }
        }
        s
    }

    /// `∫ u dx` per component.
    pub fn momentum(&self) -> Vec<f64> {
        self.u.iter().map(|c| self.grid.integrate(c)).collect()
    }

    /// `½ ∫ |u|² dx`.
    pub fn energy(&self) -> f64 {
        0.5 * self
            .u
            .iter()
            .map(|c| {
                let sq: Vec<f64> = c.iter().map(|x| x * x).collect();
                self.grid.integrate(&sq)
            })
            .sum::<f64>()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.u.iter().flatten().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("fluid velocity"))
        }
    }
}

/// Drag source data `(ρ, ρV)` from the kinetic phase.
#[derive(Clone, Debug)]
pub struct SourceFields {
    pub rho: Vec<f64>,
    pub rho_v: Vec<Vec<f64>>,
}

impl SourceFields {
    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self { rho: vec![0.0; grid.total()], rho_v: vec![vec![0.0; grid.total()]; grid.dim()] }
    }

    fn check(&self, grid: &SpatialGrid) -> Result<()> {
        if self.rho.len() != grid.total()
            || self.rho_v.len() != grid.dim()
            || self.rho_v.iter().any(|c| c.len() != grid.total())
        {
            return Err(Error::GridMismatch("source fields do not match the spatial grid".into()));
        }
        if self.rho.iter().chain(self.rho_v.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("drag source"));
        }
        Ok(())
    }

    /// Drag force density `F = ρV − ρu`.
    pub fn force(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.rho_v
            .iter()
            .zip(u)
            .map(|(rv, ua)| rv.iter().zip(ua).zip(&self.rho).map(|((m, v), r)| m - r * v).collect())
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StokesOptions {
    /// Crank–Nicolson diffusion instead of implicit Euler.
    pub crank_nicolson: bool,
    /// Apply 2/3-rule truncation to the drag source spectrum.
    pub dealias: bool,
}

fn spectra(grid: &SpatialGrid, w: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    w.iter().map(|c| grid.forward(c)).collect()
}

fn project_modes(grid: &SpatialGrid, spec: &mut [Vec<Complex64>]) {
    let d = grid.dim();
    for flat in 1..grid.total() {
        if grid.is_nyquist(flat) {
            for comp in spec.iter_mut() {
                comp[flat] = Complex64::new(0.0, 0.0);
            }
            continue;
        }
        let k = grid.wavevector(flat);
        let k2: f64 = k[..d].iter().map(|x| x * x).sum();
        let mut kdotw = Complex64::new(0.0, 0.0);
        for a in 0..d {
            kdotw += spec[a][flat] * k[a];
        }
        let s = kdotw / k2;
        for a in 0..d {
            spec[a][flat] -= s * k[a];
        }
    }
}

/// Leray projection `ŵ_k ↦ (I − k kᵀ/|k|²) ŵ_k` for `k ≠ 0`; the mean mode
/// is left unchanged and modes with a Nyquist index are removed, which keeps
/// the discrete projector real and idempotent.
pub fn leray_project(grid: &SpatialGrid, w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut spec = spectra(grid, w);
    project_modes(grid, &mut spec);
    spec.into_iter().map(|s| grid.inverse_real(s)).collect()
}

/// Spectral divergence and gradient L² norms, `(‖∇·u‖, ‖∇u‖)`. The divergence
/// uses the same wave vectors as the projection, Nyquist modes included.
pub fn divergence_norms(grid: &SpatialGrid, u: &[Vec<f64>]) -> (f64, f64) {
    let d = grid.dim();
    let spec = spectra(grid, u);
    let mut div = Vec::with_capacity(grid.total());
    let mut grad = Vec::with_capacity(grid.total());
    for flat in 0..grid.total() {
        let k = grid.wavevector(flat);
        let k2: f64 = k[..d].iter().map(|x| x * x).sum();
        let mut dv = Complex64::new(0.0, 0.0);
        let mut g = 0.0;
        for a in 0..d {
            dv += spec[a][flat] * k[a];
            g += k2 * spec[a][flat].norm_sqr();
        }
        div.push(dv.norm_sqr());
        grad.push(g);
    }
    let w = grid.parseval_weight();
    ((w * pairwise_sum(&div)).sqrt(), (w * pairwise_sum(&grad)).sqrt())
}

/// `‖∇·u‖ / ‖∇u‖`, or 0 for a field without gradient.
pub fn relative_divergence(grid: &SpatialGrid, u: &[Vec<f64>]) -> f64 {
    let (div, grad) = divergence_norms(grid, u);
    if grad > 0.0 {
        div / grad
    } else {
        0.0
    }
}

/// One IMEX step: explicit drag source `S = ρV − ρu_old`, implicit diffusion
/// per Fourier mode, `û_new = (û_old + dt·P Ŝ) / (1 + dt|k|²)` and
/// `û₀_new = û₀_old + dt·Ŝ₀` for the mean mode. The pressure of the returned
/// state is zero; use [`recover_pressure`] when it is needed.
pub fn stokes_step(state: &FluidState, src: &SourceFields, dt: f64, opts: &StokesOptions) -> Result<FluidState> {
    let grid = &state.grid;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
    }
    src.check(grid)?;
    state.check_finite()?;
    let rho_max = src.rho.iter().fold(0.0f64, |m, &r| m.max(r));
    if dt * rho_max > 1.0 {
        return Err(Error::StabilityGuard(dt * rho_max));
    }
    let d = grid.dim();
    let force = src.force(&state.u);
    let mut s_hat = spectra(grid, &force);
    if opts.dealias {
        for flat in 0..grid.total() {
            if !grid.passes_two_thirds(flat) {
                for comp in s_hat.iter_mut() {
                    comp[flat] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
    project_modes(grid, &mut s_hat);
    let mut u_hat = spectra(grid, &state.u);
    for flat in 0..grid.total() {
        let k = grid.wavevector(flat);
        let k2: f64 = k[..d].iter().map(|x| x * x).sum();
        let (keep, denom) =
            if opts.crank_nicolson { (1.0 - 0.5 * dt * k2, 1.0 + 0.5 * dt * k2) } else { (1.0, 1.0 + dt * k2) };
        for a in 0..d {
            u_hat[a][flat] = (u_hat[a][flat] * keep + s_hat[a][flat] * dt) / denom;
        }
    }
    let u = u_hat.into_iter().map(|s| grid.inverse_real(s)).collect();
    Ok(FluidState { grid: grid.clone(), u, p: vec![0.0; grid.total()], time: state.time + dt })
}

/// Zero-mean pressure solving `Δp = ∇·F` with `F = ρV − ρu`.
pub fn recover_pressure(grid: &SpatialGrid, src: &SourceFields, u: &[Vec<f64>]) -> Result<Vec<f64>> {
    src.check(grid)?;
    let d = grid.dim();
    let f_hat = spectra(grid, &src.force(u));
    let mut p_hat = vec![Complex64::new(0.0, 0.0); grid.total()];
    for (flat, p) in p_hat.iter_mut().enumerate().skip(1) {
        let k = grid.wavevector(flat);
        let k2: f64 = k[..d].iter().map(|x| x * x).sum();
        let mut kf = Complex64::new(0.0, 0.0);
        for a in 0..d {
            kf += f_hat[a][flat] * k[a];
        }
        // i k p̂ = k (k·F̂)/|k|²
        *p = kf * Complex64::new(0.0, -1.0) / k2;
    }
    Ok(grid.inverse_real(p_hat))
}

/// Norms of a periodic vector field. `h1` and `h2` are full norms with
/// spectral weights `1 + |k|²` and `1 + |k|² + |k|⁴`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SobolevNorms {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub h1_semi: f64,
    pub h2_semi: f64,
    pub linf: f64,
    pub w1inf: f64,
}

pub fn sobolev_norms(grid: &SpatialGrid, u: &[Vec<f64>]) -> SobolevNorms {
    let d = grid.dim();
    let spec = spectra(grid, u);
    let mut s0 = Vec::with_capacity(grid.total());
    let mut s1 = Vec::with_capacity(grid.total());
    let mut s2 = Vec::with_capacity(grid.total());
    for flat in 0..grid.total() {
        let k = grid.wavevector(flat);
        let k2: f64 = k[..d].iter().map(|x| x * x).sum();
        let a2: f64 = spec.iter().map(|c| c[flat].norm_sqr()).sum();
        s0.push(a2);
        s1.push(k2 * a2);
        s2.push(k2 * k2 * a2);
    }
    let w = grid.parseval_weight();
    let l2sq = w * pairwise_sum(&s0);
    let h1sq = w * pairwise_sum(&s1);
    let h2sq = w * pairwise_sum(&s2);

    let grads: Vec<Vec<f64>> =
        u.iter().flat_map(|c| (0..d).map(move |a| (c, a))).map(|(c, a)| grid.derivative(c, a)).collect();
    let mut linf = 0.0f64;
    let mut w1inf = 0.0f64;
    for i in 0..grid.total() {
        let speed = u.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt();
        let g = grads.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt();
        linf = linf.max(speed);
        w1inf = w1inf.max(speed + g);
    }
    SobolevNorms {
        l2: l2sq.sqrt(),
        h1: (l2sq + h1sq).sqrt(),
        h2: (l2sq + h1sq + h2sq).sqrt(),
        h1_semi: h1sq.sqrt(),
        h2_semi: h2sq.sqrt(),
        linf,
        w1inf,
    }
}

/// `∫ |∇u|² dx`.
pub fn gradient_energy(grid: &SpatialGrid, u: &[Vec<f64>]) -> f64 {
    divergence_norms(grid, u).1.powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
        a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn gradients_are_annihilated() {
        let g = SpatialGrid::new(2, 16, 1.0).unwrap();
        // φ = sin(2πx) cos(4πy)
        let w = FluidState::from_fn(g.clone(), |x| {
            let (a, b) = (2.0 * PI * x[0], 4.0 * PI * x[1]);
            [2.0 * PI * a.cos() * b.cos(), -4.0 * PI * a.sin() * b.sin(), 0.0]
        });
        let p = leray_project(&g, &w.u);
        assert!(p.iter().flatten().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn shear_flow_is_fixed() {
        let g = SpatialGrid::new(2, 16, 1.0).unwrap();
        let w = FluidState::from_fn(g.clone(), |x| [(2.0 * PI * x[1]).sin(), 0.0, 0.0]);
        assert!(divergence_norms(&g, &w.u).0 < 1e-12);
        let p = leray_project(&g, &w.u);
        assert!(close(&p, &w.u, 1e-13));
    }

    #[test]
    fn projection_is_idempotent_and_keeps_mean() {
        let g = SpatialGrid::new(3, 8, 2.0).unwrap();
        let w = FluidState::from_fn(g.clone(), |x| {
            [1.0 + x[0].sin() * x[1].cos(), (x[2] * 3.0).cos(), 0.5 * (x[0] + x[1]).sin()]
        });
        let p1 = leray_project(&g, &w.u);
        let p2 = leray_project(&g, &p1);
        assert!(close(&p1, &p2, 1e-12));
        let mean0 = FluidState { u: p1.clone(), ..w.clone() }.momentum();
        assert!((mean0[0] - w.momentum()[0]).abs() < 1e-12);
        assert!(relative_divergence(&g, &p1) < 1e-12);
    }

    #[test]
    fn one_dimensional_projection_keeps_only_the_mean() {
        let g = SpatialGrid::new(1, 8, 1.0).unwrap();
        let w = FluidState::from_fn(g.clone(), |x| [0.3 + (2.0 * PI * x[0]).sin(), 0.0, 0.0]);
        let p = leray_project(&g, &w.u);
        assert!(p[0].iter().all(|x| (x - 0.3).abs() < 1e-14));
    }

    #[test]
    fn single_mode_decay_matches_modewise_factor() {
        let g = SpatialGrid::new(2, 16, 2.0 * PI).unwrap();
        let u0 = FluidState::from_fn(g.clone(), |x| [0.7 * (3.0 * x[1]).sin(), 0.0, 0.0]);
        let dt = 0.01;
        let src = SourceFields::zeros(&g);
        let mut s = u0.clone();
        for _ in 0..10 {
            s = stokes_step(&s, &src, dt, &StokesOptions::default()).unwrap();
        }
        let ratio = (1.0f64 / (1.0 + dt * 9.0)).powi(10);
        for (a, b) in s.u[0].iter().zip(&u0.u[0]) {
            assert!((a - ratio * b).abs() < 1e-12);
        }
        assert!((s.time - 0.1).abs() < 1e-15);
    }

    #[test]
    fn crank_nicolson_factor() {
        let g = SpatialGrid::new(2, 8, 2.0 * PI).unwrap();
        let u0 = FluidState::from_fn(g.clone(), |x| [(2.0 * x[1]).cos(), 0.0, 0.0]);
        let dt = 0.1;
        let opts = StokesOptions { crank_nicolson: true, dealias: false };
        let s = stokes_step(&u0, &SourceFields::zeros(&g), dt, &opts).unwrap();
        let factor = (1.0 - 0.5 * dt * 4.0) / (1.0 + 0.5 * dt * 4.0);
        for (a, b) in s.u[0].iter().zip(&u0.u[0]) {
            assert!((a - factor * b).abs() < 1e-13);
        }
    }

    #[test]
    fn uniform_drag_relaxes_constant_flow() {
        let g = SpatialGrid::new(1, 8, 1.0).unwrap();
        let c = 0.5;
        let src = SourceFields { rho: vec![c; 8], rho_v: vec![vec![0.0; 8]] };
        let dt = 1e-3;
        let mut s = FluidState::constant(g, &[1.0]);
        for _ in 0..1000 {
            s = stokes_step(&s, &src, dt, &StokesOptions::default()).unwrap();
        }
        let exact = (-c * 1.0f64).exp();
        // Explicit Euler on u' = -c u: global error ≈ c² t e^{-ct} dt / 2.
        let err = (s.u[0][0] - exact).abs();
        assert!(err < 0.6 * c * c * exact * dt, "err = {err}");
        assert!(err > 0.3 * c * c * exact * dt);
    }

    #[test]
    fn drag_cancels_when_particles_move_with_fluid() {
        let g = SpatialGrid::new(2, 8, 2.0 * PI).unwrap();
        let u0 = FluidState::from_fn(g.clone(), |x| [x[1].sin(), 0.0, 0.0]);
        let rho: Vec<f64> = (0..g.total()).map(|i| 0.5 + 0.2 * g.point(i)[0].cos()).collect();
        let rho_v = u0.u.iter().map(|c| c.iter().zip(&rho).map(|(u, r)| u * r).collect()).collect();
        let src = SourceFields { rho, rho_v };
        let dt = 0.05;
        let s = stokes_step(&u0, &src, dt, &StokesOptions::default()).unwrap();
        let free = stokes_step(&u0, &SourceFields::zeros(&g), dt, &StokesOptions::default()).unwrap();
        assert!(close(&s.u, &free.u, 1e-14));
    }

    #[test]
    fn guard_and_errors() {
        let g = SpatialGrid::new(1, 8, 1.0).unwrap();
        let s = FluidState::zeros(g.clone());
        let src = SourceFields { rho: vec![20.0; 8], rho_v: vec![vec![0.0; 8]] };
        assert!(matches!(stokes_step(&s, &src, 0.1, &StokesOptions::default()), Err(Error::StabilityGuard(_))));
        let mut bad = SourceFields::zeros(&g);
        bad.rho_v[0][1] = f64::NAN;
        assert!(matches!(stokes_step(&s, &bad, 0.1, &StokesOptions::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn pressure_of_gradient_force() {
        let g = SpatialGrid::new(2, 16, 1.0).unwrap();
        let n = g.total();
        let phi: Vec<f64> = (0..n).map(|i| (2.0 * PI * g.point(i)[0]).cos()).collect();
        let grad_phi = vec![g.derivative(&phi, 0), g.derivative(&phi, 1)];
        let src = SourceFields { rho: vec![0.0; n], rho_v: grad_phi };
        let zero_u = vec![vec![0.0; n]; 2];
        let p = recover_pressure(&g, &src, &zero_u).unwrap();
        for (a, b) in p.iter().zip(&phi) {
            assert!((a - b).abs() < 1e-12);
        }
        let none = recover_pressure(&g, &SourceFields::zeros(&g), &zero_u).unwrap();
        assert!(none.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn pressure_of_solenoidal_force_vanishes() {
        let g = SpatialGrid::new(2, 16, 1.0).unwrap();
        let n = g.total();
        let shear = FluidState::from_fn(g.clone(), |x| [(2.0 * PI * x[1]).sin(), 0.0, 0.0]);
        let src = SourceFields { rho: vec![0.0; n], rho_v: shear.u.clone() };
        let p = recover_pressure(&g, &src, &vec![vec![0.0; n]; 2]).unwrap();
        assert!(p.iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn norms_of_constant_and_single_mode() {
        let g = SpatialGrid::new(2, 8, 3.0).unwrap();
        let c = FluidState::constant(g.clone(), &[0.6, 0.8]);
        let n = sobolev_norms(&g, &c.u);
        assert!((n.l2 - 1.0 * 3.0).abs() < 1e-13);
        assert!(n.h1_semi < 1e-13);
        assert!((n.linf - 1.0).abs() < 1e-14);

        let k = 2.0 * PI / 3.0;
        let s = FluidState::from_fn(g.clone(), |x| [(k * x[0]).sin(), 0.0, 0.0]);
        let n = sobolev_norms(&g, &s.u);
        assert!((n.h1_semi.powi(2) - k * k * n.l2.powi(2)).abs() < 1e-12);
        // nodal maximum of |sin| + k|cos| at x_j = 3j/8
        let nodal = (0..8)
            .map(|j| {
                let t = k * 3.0 * j as f64 / 8.0;
                t.sin().abs() + k * t.cos().abs()
            })
            .fold(0.0, f64::max);
        assert!((n.w1inf - nodal).abs() < 1e-12);
    }
}
