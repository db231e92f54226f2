//! Spatial torus and truncated velocity box discretizations.
//!
//! Phase-space arrays are stored x-major: the flat index of node
//! `(x_index, v_index)` is `x_index * velocity.total() + v_index`, and both
//! multi-indices are row-major over their axes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::sum::pairwise_sum;

/// Default upper bound on the number of phase-space nodes (2^27, ~1 GiB per
/// f64 array).
pub const DEFAULT_NODE_BUDGET: usize = 1 << 27;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrature {
    Midpoint,
    Trapezoid,
}

impl Quadrature {
    pub fn name(self) -> &'static str {
        match self {
            Quadrature::Midpoint => "midpoint",
            Quadrature::Trapezoid => "trapezoid",
        }
    }
}

#[derive(Clone)]
struct FftPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on the d-torus of period `length` per axis.
#[derive(Clone)]
pub struct SpatialGrid {
    dim: usize,
    n: usize,
    length: f64,
    spacing: f64,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
    plans: FftPlans,
}

impl fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid").field("dim", &self.dim).field("n", &self.n).field("length", &self.length).finish()
    }
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

impl SpatialGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1,2,3}}")));
        }
        if !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n_x = {n} must be even")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n_x = {n} must be a power of two and at least 4")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("period L = {length} must be positive")));
        }
        let spacing = length / n as f64;
        let coords = (0..n).map(|i| i as f64 * spacing).collect();
        let scale = 2.0 * PI / length;
        let wavenumbers = (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                m * scale
            })
            .collect();
        let mut planner = FftPlanner::new();
        let plans = FftPlans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) };
        Ok(Self { dim, n, length, spacing, coords, wavenumbers, plans })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of spatial nodes, `n^d`.
    pub fn total(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Torus volume `L^d`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// One-dimensional node coordinates `i * h`.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Angular wavenumbers in FFT order, `{0, 1, .., n/2, -n/2+1, .., -1} * 2π/L`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Row-major multi-index of a flat spatial index.
    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    /// Physical coordinates of a flat spatial index (unused axes are 0).
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coords[idx[a]];
        }
        x
    }

    /// Wave vector of a flat spectral index.
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            k[a] = self.wavenumbers[idx[a]];
        }
        k
    }

    /// True when any component of the spectral index sits on the Nyquist
    /// frequency.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        (0..self.dim).any(|a| idx[a] == self.n / 2)
    }

    /// True if the mode survives 2/3-rule truncation.
    pub fn passes_two_thirds(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        (0..self.dim).all(|a| {
            let j = idx[a];
            let m = if j <= self.n / 2 { j } else { self.n - j };
            3 * m < self.n
        })
    }

    fn fft_in_place(&self, buf: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(buf.len(), self.total());
        let plan = if inverse { &self.plans.inverse } else { &self.plans.forward };
        let n = self.n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in buf.chunks_exact_mut(n) {
                    plan.process(chunk);
                }
                continue;
            }
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for j in 0..stride {
                    let base = o * n * stride + j;
                    for i in 0..n {
                        line[i] = buf[base + i * stride];
                    }
                    plan.process(&mut line);
                    for i in 0..n {
                        buf[base + i * stride] = line[i];
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT of a real field.
    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft_in_place(&mut buf, false);
        buf
    }

    /// Inverse DFT (normalized by `1/n^d`) returning the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.fft_in_place(&mut spectrum, true);
        let norm = 1.0 / self.total() as f64;
        spectrum.iter().map(|z| z.re * norm).collect()
    }

    /// Spectral derivative along `axis`. The Nyquist coefficient is dropped
    /// so that the result stays real.
    pub fn derivative(&self, field: &[f64], axis: usize) -> Vec<f64> {
        let mut spec = self.forward(field);
        for (flat, z) in spec.iter_mut().enumerate() {
            let idx = self.multi_index(flat);
            if idx[axis] == self.n / 2 {
                *z = Complex64::new(0.0, 0.0);
            } else {
                let k = self.wavenumbers[idx[axis]];
                *z *= Complex64::new(0.0, k);
            }
        }
        self.inverse_real(spec)
    }

    /// Weight relating spectral sums to L² integrals: `∫|g|² = w Σ_k |ĝ_k|²`.
    pub fn parseval_weight(&self) -> f64 {
        let total = self.total() as f64;
        self.volume() / (total * total)
    }

    /// Grid integral `h^d Σ field`.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        self.cell_volume() * pairwise_sum(field)
    }
}

/// Tensor velocity grid on the box `[-v_max, v_max]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid {
    dim: usize,
    cells: usize,
    v_max: f64,
    spacing: f64,
    quadrature: Quadrature,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(dim: usize, cells: usize, v_max: f64, quadrature: Quadrature) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1,2,3}}")));
        }
        if cells < 2 {
            return Err(Error::InvalidGrid(format!("n_v = {cells} must be at least 2")));
        }
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(Error::InvalidGrid(format!("v_max = {v_max} must be positive")));
        }
        let h = 2.0 * v_max / cells as f64;
        let (nodes, weights): (Vec<f64>, Vec<f64>) = match quadrature {
            Quadrature::Midpoint => (0..cells)
                .map(|j| {
                    // Mirror pairs are computed from the same expression so
                    // the node set is exactly symmetric.
                    let half = cells as f64 / 2.0;
                    ((j as f64 + 0.5 - half) * h, h)
                })
                .unzip(),
            Quadrature::Trapezoid => (0..=cells)
                .map(|j| {
                    let half = cells as f64 / 2.0;
                    let w = if j == 0 || j == cells { 0.5 * h } else { h };
                    ((j as f64 - half) * h, w)
                })
                .unzip(),
        };
        Ok(Self { dim, cells, v_max, spacing: h, quadrature, nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Nodes per axis (`cells` for midpoint, `cells + 1` for trapezoid).
    pub fn nodes_per_axis(&self) -> usize {
        self.nodes.len()
    }

    pub fn total(&self) -> usize {
        self.nodes.len().pow(self.dim as u32)
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    /// One-dimensional node coordinates.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// One-dimensional quadrature weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let m = self.nodes.len();
        let mut idx = [0; 3];
        for b in (0..self.dim).rev() {
            idx[b] = flat % m;
            flat /= m;
        }
        idx
    }
}

/// Phase-space grid with precomputed per-velocity-node tables.
#[derive(Clone, Debug)]
pub struct PhaseGrid {
    pub spatial: SpatialGrid,
    pub velocity: VelocityGrid,
    v_points: Vec<[f64; 3]>,
    v_weights: Vec<f64>,
    v_speed: Vec<f64>,
}

impl PartialEq for PhaseGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spatial == other.spatial && self.velocity == other.velocity
    }
}

impl PhaseGrid {
    pub fn new(spatial: SpatialGrid, velocity: VelocityGrid, node_budget: usize) -> Result<Self> {
        if spatial.dim() != velocity.dim() {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension {} differs from velocity dimension {}",
                spatial.dim(),
                velocity.dim()
            )));
        }
        let total = spatial.total().checked_mul(velocity.total());
        match total {
            Some(t) if t <= node_budget => {}
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "{} x {} phase nodes exceed the budget of {node_budget}",
                    spatial.total(),
                    velocity.total()
                )))
            }
        }
        let nv = velocity.total();
        let mut v_points = Vec::with_capacity(nv);
        let mut v_weights = Vec::with_capacity(nv);
        let mut v_speed = Vec::with_capacity(nv);
        for flat in 0..nv {
            let idx = velocity.multi_index(flat);
            let mut p = [0.0; 3];
            let mut w = 1.0;
            for b in 0..velocity.dim() {
                p[b] = velocity.nodes[idx[b]];
                w *= velocity.weights[idx[b]];
            }
            v_points.push(p);
            v_weights.push(w);
            v_speed.push((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
        }
        Ok(Self { spatial, velocity, v_points, v_weights, v_speed })
    }

    pub fn dim(&self) -> usize {
        self.spatial.dim()
    }

    /// Number of phase-space nodes.
    pub fn total(&self) -> usize {
        self.spatial.total() * self.velocity.total()
    }

    /// Velocity coordinates of each velocity node.
    pub fn v_points(&self) -> &[[f64; 3]] {
        &self.v_points
    }

    /// Product quadrature weight of each velocity node.
    pub fn v_weights(&self) -> &[f64] {
        &self.v_weights
    }

    /// Euclidean speed `|v|` of each velocity node.
    pub fn v_speed(&self) -> &[f64] {
        &self.v_speed
    }
}

/// Builds a phase grid with midpoint velocity quadrature and the default node
/// budget.
pub fn make_phase_grid(dim: usize, n_x: usize, length: f64, n_v: usize, v_max: f64) -> Result<PhaseGrid> {
    PhaseGrid::new(
        SpatialGrid::new(dim, n_x, length)?,
        VelocityGrid::new(dim, n_v, v_max, Quadrature::Midpoint)?,
        DEFAULT_NODE_BUDGET,
    )
}

/// Quadrature of a field sampled on the velocity nodes.
pub fn quadrature_v(grid: &PhaseGrid, field: &[f64]) -> Result<f64> {
    if field.len() != grid.velocity.total() {
        return Err(Error::GridMismatch(format!(
            "velocity field has {} values, grid has {} nodes",
            field.len(),
            grid.velocity.total()
        )));
    }
    if field.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("velocity field"));
    }
    let terms: Vec<f64> = field.iter().zip(grid.v_weights()).map(|(f, w)| f * w).collect();
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_spacings() {
        let g = make_phase_grid(1, 8, 2.0 * PI, 8, 4.0).unwrap();
        assert!((g.spatial.spacing() - 2.0 * PI / 8.0).abs() < 1e-15);
        assert_eq!(g.velocity.spacing(), 1.0);
        assert_eq!(g.total(), 64);
    }

    #[test]
    fn six_dimensional_node_count() {
        let g = make_phase_grid(3, 16, 1.0, 16, 6.0).unwrap();
        assert_eq!(g.total(), 16usize.pow(6));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(make_phase_grid(2, 7, 1.0, 8, 4.0), Err(Error::InvalidGrid(_))));
        assert!(make_phase_grid(2, 12, 1.0, 8, 4.0).is_err());
        assert!(make_phase_grid(4, 8, 1.0, 8, 4.0).is_err());
        assert!(make_phase_grid(0, 8, 1.0, 8, 4.0).is_err());
        assert!(make_phase_grid(1, 8, 0.0, 8, 4.0).is_err());
        assert!(make_phase_grid(1, 8, 1.0, 8, -1.0).is_err());
        assert!(make_phase_grid(1, 2, 1.0, 8, 1.0).is_err());
    }

    #[test]
    fn node_budget_is_enforced() {
        let s = SpatialGrid::new(2, 16, 1.0).unwrap();
        let v = VelocityGrid::new(2, 16, 1.0, Quadrature::Midpoint).unwrap();
        assert!(PhaseGrid::new(s, v, 1000).is_err());
    }

    #[test]
    fn wavenumber_table_covers_symmetric_band() {
        let s = SpatialGrid::new(1, 8, 2.0 * PI).unwrap();
        let mut k: Vec<i64> = s.wavenumbers().iter().map(|k| k.round() as i64).collect();
        k.sort();
        assert_eq!(k, vec![-3, -2, -1, 0, 1, 2, 3, 4]);
    }

    #[test]
    fn weights_sum_to_box_measure() {
        for quad in [Quadrature::Midpoint, Quadrature::Trapezoid] {
            for d in 1..=3 {
                let s = SpatialGrid::new(d, 4, 1.0).unwrap();
                let v = VelocityGrid::new(d, 6, 2.5, quad).unwrap();
                let g = PhaseGrid::new(s, v, DEFAULT_NODE_BUDGET).unwrap();
                let total: f64 = pairwise_sum(g.v_weights());
                let expect = 5.0f64.powi(d as i32);
                assert!((total - expect).abs() < 1e-12 * expect, "{quad:?} d={d}");
            }
        }
    }

    #[test]
    fn velocity_nodes_are_symmetric() {
        for quad in [Quadrature::Midpoint, Quadrature::Trapezoid] {
            let v = VelocityGrid::new(1, 10, 3.0, quad).unwrap();
            let n = v.nodes().len();
            for j in 0..n {
                assert_eq!(v.nodes()[j], -v.nodes()[n - 1 - j]);
            }
        }
    }

    #[test]
    fn quadrature_of_constant_and_odd() {
        let g = make_phase_grid(1, 4, 1.0, 16, 4.0).unwrap();
        let ones = vec![1.0; 16];
        assert!((quadrature_v(&g, &ones).unwrap() - 8.0).abs() < 1e-14);
        let odd: Vec<f64> = g.v_points().iter().map(|p| p[0]).collect();
        assert!(quadrature_v(&g, &odd).unwrap().abs() < 1e-14);
        let mut bad = ones.clone();
        bad[3] = f64::NAN;
        assert!(matches!(quadrature_v(&g, &bad), Err(Error::NonFinite(_))));
    }

    #[test]
    fn spectral_derivative_of_single_mode() {
        let s = SpatialGrid::new(2, 16, 2.0).unwrap();
        let field: Vec<f64> = (0..s.total())
            .map(|i| {
                let x = s.point(i);
                (PI * x[1]).sin()
            })
            .collect();
        let d1 = s.derivative(&field, 1);
        let d0 = s.derivative(&field, 0);
        for i in 0..s.total() {
            let x = s.point(i);
            assert!((d1[i] - PI * (PI * x[1]).cos()).abs() < 1e-12);
            assert!(d0[i].abs() < 1e-12);
        }
    }

    #[test]
    fn fft_roundtrip_3d() {
        let s = SpatialGrid::new(3, 4, 1.0).unwrap();
        let field: Vec<f64> = (0..s.total()).map(|i| (i as f64 * 0.37).cos()).collect();
        let back = s.inverse_real(s.forward(&field));
        for (a, b) in field.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
