//! Distribution function, velocity moments and the Vlasov transport step.

mod transport;

pub use transport::{
    advance_frozen, amplification, split_foot, vlasov_step, CflPolicy, VlasovOptions, VlasovStepReport,
};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::sum::{pairwise_sum, pairwise_sum_by};

/// Sampled phase-space density `f(t, x, v)`.
#[derive(Clone, Debug)]
pub struct DistributionFunction {
    pub grid: Arc<PhaseGrid>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DistributionFunction {
    pub fn zeros(grid: Arc<PhaseGrid>) -> Self {
        let n = grid.total();
        Self { grid, values: vec![0.0; n], time: 0.0 }
    }

    /// Samples `f(x, v)` at every phase node.
    pub fn from_fn<F>(grid: Arc<PhaseGrid>, f: F) -> Self
    where
        F: Fn(&[f64; 3], &[f64; 3]) -> f64,
    {
        let nx = grid.spatial.total();
        let nv = grid.velocity.total();
        let mut values = Vec::with_capacity(nx * nv);
        for ix in 0..nx {
            let x = grid.spatial.point(ix);
            for v in grid.v_points() {
                values.push(f(&x, v));
            }
        }
        Self { grid, values, time: 0.0 }
    }

    pub fn from_values(grid: Arc<PhaseGrid>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.total() {
            return Err(Error::GridMismatch(format!("{} values for {} phase nodes", values.len(), grid.total())));
        }
        Ok(Self { grid, values, time })
    }

    /// Values at spatial node `ix` for all velocity nodes.
    pub fn row(&self, ix: usize) -> &[f64] {
        let nv = self.grid.velocity.total();
        &self.values[ix * nv..(ix + 1) * nv]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &x| m.max(x))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("distribution function"))
        }
    }

    /// Phase-space integral of `weight(v) * f` with the given per-velocity-node
    /// weight table.
    fn weighted_integral(&self, weight: &[f64]) -> f64 {
        let grid = &self.grid;
        let nv = grid.velocity.total();
        let w = grid.v_weights();
        let per_x = |ix: usize| {
            let row = &self.values[ix * nv..(ix + 1) * nv];
            pairwise_sum_by(nv, &|j| w[j] * weight[j] * row[j])
        };
        grid.spatial.cell_volume() * pairwise_sum_by(grid.spatial.total(), &per_x)
    }
}

/// `|v|^k` at each velocity node (`0^0 = 1`).
pub(crate) fn speed_powers(grid: &PhaseGrid, k: f64) -> Vec<f64> {
    grid.v_speed().iter().map(|&s| if k == 0.0 { 1.0 } else { s.powf(k) }).collect()
}

/// Spatial field `m_k f(x) = ∫ |v|^k f dv`.
pub fn compute_moment(f: &DistributionFunction, k: f64) -> Result<Vec<f64>> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidArgument(format!("moment order {k} must be nonnegative")));
    }
    f.check_finite()?;
    let grid = &f.grid;
    let weights: Vec<f64> = speed_powers(grid, k).iter().zip(grid.v_weights()).map(|(p, w)| p * w).collect();
    let nv = grid.velocity.total();
    Ok((0..grid.spatial.total())
        .map(|ix| {
            let row = f.row(ix);
            pairwise_sum_by(nv, &|j| weights[j] * row[j])
        })
        .collect())
}

/// Velocity moments of a distribution: `m_k` for each requested order plus
/// the density and the momentum density.
#[derive(Clone, Debug)]
pub struct MomentSet {
    pub orders: Vec<u32>,
    pub fields: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub rho_v: Vec<Vec<f64>>,
}

impl MomentSet {
    pub fn field(&self, k: u32) -> Option<&[f64]> {
        self.orders.iter().position(|&o| o == k).map(|i| self.fields[i].as_slice())
    }
}

/// Density and momentum density fields `(ρ, ρV)`.
pub fn density_and_momentum(f: &DistributionFunction) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    f.check_finite()?;
    let grid = &f.grid;
    let d = grid.dim();
    let nv = grid.velocity.total();
    let w = grid.v_weights();
    let pts = grid.v_points();
    let nx = grid.spatial.total();
    let mut rho = Vec::with_capacity(nx);
    let mut rho_v = vec![Vec::with_capacity(nx); d];
    for ix in 0..nx {
        let row = f.row(ix);
        rho.push(pairwise_sum_by(nv, &|j| w[j] * row[j]));
        for (a, comp) in rho_v.iter_mut().enumerate() {
            comp.push(pairwise_sum_by(nv, &|j| w[j] * pts[j][a] * row[j]));
        }
    }
    Ok((rho, rho_v))
}

pub fn moments(f: &DistributionFunction, orders: &[u32]) -> Result<MomentSet> {
    let fields = orders.iter().map(|&k| compute_moment(f, k as f64)).collect::<Result<Vec<_>>>()?;
    let (rho, rho_v) = density_and_momentum(f)?;
    Ok(MomentSet { orders: orders.to_vec(), fields, rho, rho_v })
}

/// Total mass `∫∫ f`.
pub fn mass(f: &DistributionFunction) -> f64 {
    let ones = vec![1.0; f.grid.velocity.total()];
    f.weighted_integral(&ones)
}

/// Total kinetic momentum `∫∫ v f` (length `d`).
pub fn momentum(f: &DistributionFunction) -> Vec<f64> {
    (0..f.grid.dim())
        .map(|a| {
            let comp: Vec<f64> = f.grid.v_points().iter().map(|p| p[a]).collect();
            f.weighted_integral(&comp)
        })
        .collect()
}

/// Total velocity moment `M_k = ∫∫ |v|^k f`.
pub fn total_moment(f: &DistributionFunction, k: f64) -> f64 {
    f.weighted_integral(&speed_powers(&f.grid, k))
}

/// Totals `M_0 .. M_kmax` from a single sweep over the array.
pub fn total_moments(f: &DistributionFunction, k_max: u32) -> Vec<f64> {
    let grid = &f.grid;
    let nv = grid.velocity.total();
    let nx = grid.spatial.total();
    let tables: Vec<Vec<f64>> = (0..=k_max)
        .map(|k| speed_powers(grid, k as f64).iter().zip(grid.v_weights()).map(|(p, w)| p * w).collect())
        .collect();
    let mut per_x = vec![vec![0.0; nx]; tables.len()];
    for ix in 0..nx {
        let row = f.row(ix);
        for (k, table) in tables.iter().enumerate() {
            per_x[k][ix] = pairwise_sum_by(nv, &|j| table[j] * row[j]);
        }
    }
    per_x.iter().map(|vals| grid.spatial.cell_volume() * pairwise_sum(vals)).collect()
}

/// Gradient-weighted moment `G_k = ∫∫ (1 + |v|^k)(|∇_x f|² + |∇_v f|²)`,
/// split into interior nodes and nodes on the outermost velocity layer,
/// where `∇_v f` falls back to one-sided differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMomentReport {
    pub order: u32,
    pub total: f64,
    pub interior: f64,
    pub face: f64,
    /// Share of `total` carried by nodes next to a jump of more than a quarter
    /// of `max f`.
    pub jump_share: f64,
    pub time: f64,
}

impl GradientMomentReport {
    /// The gradient moment is dominated by discontinuities (support edges or
    /// the velocity-box faces) rather than smooth variation.
    pub fn boundary_dominated(&self) -> bool {
        self.total > 0.0 && (self.jump_share + self.face / self.total) > 0.5
    }
}

pub fn gradient_moments(f: &DistributionFunction, k: u32) -> Result<GradientMomentReport> {
    f.check_finite()?;
    let grid = &f.grid;
    let d = grid.dim();
    let nx = grid.spatial.total();
    let nv = grid.velocity.total();
    let m = grid.velocity.nodes_per_axis();
    if m < 8 {
        return Err(Error::InvalidArgument(format!(
            "gradient moments need at least 8 velocity nodes per axis, got {m}"
        )));
    }
    let hv = grid.velocity.spacing();
    let weight: Vec<f64> = speed_powers(grid, k as f64).iter().map(|p| 1.0 + p).collect();

    // |∇_x f|² accumulated per phase node, one spatial axis at a time.
    let mut grad_sq = vec![0.0; nx * nv];
    let mut line = vec![0.0; nx];
    for a in 0..d {
        for j in 0..nv {
            for ix in 0..nx {
                line[ix] = f.values[ix * nv + j];
            }
            let dx = grid.spatial.derivative(&line, a);
            for ix in 0..nx {
                grad_sq[ix * nv + j] += dx[ix] * dx[ix];
            }
        }
    }

    let fmax = f.max_value();
    let jump = 0.25 * fmax;
    let mut on_face = vec![false; nv];
    let mut near_jump = vec![false; nx * nv];
    for j in 0..nv {
        let idx = grid.velocity.multi_index(j);
        on_face[j] = (0..d).any(|b| idx[b] == 0 || idx[b] == m - 1);
    }
    for ix in 0..nx {
        let row = f.row(ix);
        for j in 0..nv {
            let idx = grid.velocity.multi_index(j);
            let mut acc = 0.0;
            for b in 0..d {
                let stride = m.pow((d - 1 - b) as u32);
                let i = idx[b];
                let g = if i == 0 {
                    (row[j + stride] - row[j]) / hv
                } else if i == m - 1 {
                    (row[j] - row[j - stride]) / hv
                } else {
                    (row[j + stride] - row[j - stride]) / (2.0 * hv)
                };
                acc += g * g;
                if fmax > 0.0 {
                    let lo = if i > 0 { (row[j] - row[j - stride]).abs() } else { 0.0 };
                    let hi = if i + 1 < m { (row[j + stride] - row[j]).abs() } else { 0.0 };
                    if lo > jump || hi > jump {
                        near_jump[ix * nv + j] = true;
                    }
                }
            }
            grad_sq[ix * nv + j] += acc;
        }
    }

    let vw = grid.v_weights();
    let dxv = grid.spatial.cell_volume();
    let select = |pred: &dyn Fn(usize, usize) -> bool| {
        let per_x = |ix: usize| {
            pairwise_sum_by(nv, &|j| {
                if pred(ix, j) {
                    vw[j] * weight[j] * grad_sq[ix * nv + j]
                } else {
                    0.0
                }
            })
        };
        dxv * pairwise_sum_by(nx, &per_x)
    };
    let interior = select(&|_, j| !on_face[j]);
    let face = select(&|_, j| on_face[j]);
    let jumps = select(&|ix, j| near_jump[ix * nv + j]);
    let total = interior + face;
    Ok(GradientMomentReport {
        order: k,
        total,
        interior,
        face,
        jump_share: if total > 0.0 { jumps / total } else { 0.0 },
        time: f.time,
    })
}
