//! Semi-Lagrangian transport for `∂_t f + v·∇_x f + ∇_v·((u − v) f) = 0`
//! with the fluid velocity `u` frozen over a step.
//!
//! One step is the Strang composition stream(τ) ∘ drag(dt) ∘ stream(τ).
//! Streaming shifts each fixed-`v` line by `v τ` in x. The drag substep
//! solves `dV/ds = u(x) − V` exactly at fixed x, so the foot of `v` is
//! `u + (v − u) e^{dt}`, and multiplies by the phase-volume factor `e^{dt}`
//! per velocity axis. Each substep is a sequence of one-dimensional
//! interpolation passes, cubic Lagrange in x and quintic Lagrange in v.
//! With `τ = tanh(dt/2)` the composed backward characteristic matches the
//! drag-only flow `x − v(e^{dt} − 1)` exactly.

use rayon::prelude::*;

use super::DistributionFunction;
use crate::error::{Error, Result};
use crate::fluid::FluidState;
use crate::grid::PhaseGrid;
use crate::interp::{stencil, stencil6};
use crate::sum::{pairwise_dot, pairwise_sum_by};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CflPolicy {
    Warn,
    Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VlasovOptions {
    /// Upper bound on `dt · v_max / h_x`.
    pub cfl_max: f64,
    pub cfl_policy: CflPolicy,
    /// Rescale the updated field to the mass it had before the step.
    pub conservative_correction: bool,
}

impl Default for VlasovOptions {
    fn default() -> Self {
        Self { cfl_max: 5.0, cfl_policy: CflPolicy::Warn, conservative_correction: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VlasovStepReport {
    /// Mass added by clipping interpolation undershoot to zero.
    pub clipped_mass: f64,
    pub cfl: f64,
    pub warnings: Vec<String>,
}

/// Phase-volume amplification `e^{d·dt}` along a characteristic.
pub fn amplification(dim: usize, dt: f64) -> f64 {
    (dim as f64 * dt).exp()
}

fn stream_time(dt: f64) -> f64 {
    (0.5 * dt).tanh()
}

/// Backward foot point of the split step through `(x, v)` for a velocity
/// field given as a closure. Coordinates are not wrapped onto the torus.
pub fn split_foot<U>(dim: usize, x: &[f64; 3], v: &[f64; 3], u: U, dt: f64) -> ([f64; 3], [f64; 3])
where
    U: Fn(&[f64; 3]) -> [f64; 3],
{
    let tau = stream_time(dt);
    let e = dt.exp();
    let mut x1 = [0.0; 3];
    for a in 0..dim {
        x1[a] = x[a] - v[a] * tau;
    }
    let u1 = u(&x1);
    let mut v1 = [0.0; 3];
    let mut x2 = [0.0; 3];
    for a in 0..dim {
        v1[a] = u1[a] + (v[a] - u1[a]) * e;
        x2[a] = x1[a] - v1[a] * tau;
    }
    (x2, v1)
}

fn validate(f: &DistributionFunction, u: &FluidState, dt: f64, opts: &VlasovOptions) -> Result<VlasovStepReport> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
    }
    if u.grid != f.grid.spatial {
        return Err(Error::GridMismatch("fluid and kinetic spatial grids differ".into()));
    }
    if u.u.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("fluid velocity"));
    }
    let grid = &f.grid;
    if grid.velocity.nodes_per_axis() < 6 {
        return Err(Error::InvalidGrid(format!(
            "{} velocity nodes per axis; the remap stencil needs at least 6",
            grid.velocity.nodes_per_axis()
        )));
    }
    let cfl = dt * grid.velocity.v_max() / grid.spatial.spacing();
    let mut report = VlasovStepReport { cfl, ..Default::default() };
    if cfl > opts.cfl_max {
        match opts.cfl_policy {
            CflPolicy::Error => return Err(Error::Cfl { cfl, limit: opts.cfl_max }),
            CflPolicy::Warn => report.warnings.push(format!("CFL number {cfl:.3} exceeds {}", opts.cfl_max)),
        }
    }
    Ok(report)
}

/// Advances `f` by one step with `u` frozen.
pub fn vlasov_step(
    f: &DistributionFunction,
    u: &FluidState,
    dt: f64,
    opts: &VlasovOptions,
) -> Result<(DistributionFunction, VlasovStepReport)> {
    advance_frozen(f, u, dt, 1, opts)
}

/// Advances `f` by `steps` steps of size `dt` with `u` frozen, merging the
/// adjacent streaming half-steps of consecutive steps.
pub fn advance_frozen(
    f: &DistributionFunction,
    u: &FluidState,
    dt: f64,
    steps: usize,
    opts: &VlasovOptions,
) -> Result<(DistributionFunction, VlasovStepReport)> {
    let mut report = validate(f, u, dt, opts)?;
    let grid = &*f.grid;
    let tau = stream_time(dt);
    let mass_before = if opts.conservative_correction { super::mass(f) } else { 0.0 };

    let mut cur = f.values.clone();
    let mut next = vec![0.0; cur.len()];
    let mut clipped = 0.0;
    // stream(τ) drag [stream(2τ) drag]… stream(τ), each drag fused into the
    // stream pass before it.
    let drag_step = Some(DragStep { u, dt });
    stream(grid, &mut cur, &mut next, tau, false, drag_step);
    for s in 0..steps {
        let last = s + 1 == steps;
        let span = if last { tau } else { 2.0 * tau };
        clipped += stream(grid, &mut cur, &mut next, span, true, if last { None } else { drag_step });
    }
    report.clipped_mass = clipped;

    let mut out = DistributionFunction { grid: f.grid.clone(), values: cur, time: f.time + dt * steps as f64 };
    if opts.conservative_correction {
        let mass_after = super::mass(&out);
        if mass_after > 0.0 {
            let ratio = mass_before / mass_after;
            out.values.par_iter_mut().for_each(|x| *x *= ratio);
        }
    }
    Ok((out, report))
}

/// Widest union stencil handled by the vectorized streaming kernel.
const MAX_UNION_TAPS: usize = 8;

/// Rows along the last spatial axis per fused streaming task.
const STREAM_BLOCK: usize = 16;

/// Cubic streaming stencil along spatial axis `axis` in union form: output
/// node `(x, v)` is `Σ_s coef[s][c] · src(x + lo + s, v)`, where `c` is the
/// index of `v_axis` among the velocity nodes.
struct StreamTable {
    lo: i64,
    coef: Vec<Vec<f64>>,
    /// Distance in the velocity row between consecutive values of `c`.
    stride: usize,
    /// Tap order; the first tap is nonzero for every `c` when `full`.
    order: Vec<usize>,
    full: bool,
}

impl StreamTable {
    fn new(grid: &PhaseGrid, axis: usize, tau: f64) -> Option<Self> {
        let h = grid.spatial.spacing();
        let d = grid.dim();
        let m = grid.velocity.nodes_per_axis();
        let stencils: Vec<(i64, [f64; 4])> = grid.velocity.nodes().iter().map(|v| stencil(-v * tau / h)).collect();
        let lo = stencils.iter().map(|s| s.0).min()? - 1;
        let hi = stencils.iter().map(|s| s.0).max()? + 2;
        let taps = (hi - lo + 1) as usize;
        if taps > MAX_UNION_TAPS {
            return None;
        }
        let mut coef = vec![vec![0.0; m]; taps];
        for (c, (b, w)) in stencils.iter().enumerate() {
            for (t, &wt) in w.iter().enumerate() {
                coef[(b + t as i64 - 1 - lo) as usize][c] = wt;
            }
        }
        let mut order: Vec<usize> = (0..taps).filter(|&s| coef[s].iter().any(|&w| w != 0.0)).collect();
        let full = match order.iter().position(|&s| coef[s].iter().all(|&w| w != 0.0)) {
            Some(p) => {
                order.swap(0, p);
                true
            }
            None => false,
        };
        let stride = m.pow((d - 1 - axis) as u32);
        Some(Self { lo, coef, stride, order, full })
    }

    fn width(&self) -> usize {
        self.coef.len()
    }

    /// `out = Σ_s coef[s] ⊙ row(lo + s)`, with each row a sequence of whole
    /// velocity rows of length `nv`.
    fn apply<'a>(&self, out: &mut [f64], nv: usize, row: impl Fn(i64) -> &'a [f64]) {
        let m = self.coef[0].len();
        let mut rows: [&[f64]; MAX_UNION_TAPS] = [&[]; MAX_UNION_TAPS];
        for (slot, &s) in rows.iter_mut().zip(&self.order) {
            *slot = row(self.lo + s as i64);
        }
        let taps = self.order.len();
        let skip = usize::from(self.full);
        // Segments stay in L1 across taps.
        let seg = if self.stride == 1 { m } else { self.stride };
        for (blk, o) in out.chunks_exact_mut(nv).enumerate() {
            for (k, oseg) in o.chunks_exact_mut(seg).enumerate() {
                let at = blk * nv + k * seg;
                if self.stride == 1 {
                    if self.full {
                        let ws = &self.coef[self.order[0]];
                        for ((x, &y), &w) in oseg.iter_mut().zip(&rows[0][at..at + seg]).zip(ws) {
                            *x = w * y;
                        }
                    } else {
                        oseg.iter_mut().for_each(|x| *x = 0.0);
                    }
                    for (r, &s) in rows[skip..taps].iter().zip(&self.order[skip..]) {
                        for ((x, &y), &w) in oseg.iter_mut().zip(&r[at..at + seg]).zip(&self.coef[s]) {
                            *x += w * y;
                        }
                    }
                } else {
                    let c = k % m;
                    if self.full {
                        let w = self.coef[self.order[0]][c];
                        for (x, &y) in oseg.iter_mut().zip(&rows[0][at..at + seg]) {
                            *x = w * y;
                        }
                    } else {
                        oseg.iter_mut().for_each(|x| *x = 0.0);
                    }
                    for (r, &s) in rows[skip..taps].iter().zip(&self.order[skip..]) {
                        let w = self.coef[s][c];
                        if w != 0.0 {
                            for (x, &y) in oseg.iter_mut().zip(&r[at..at + seg]) {
                                *x += w * y;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// A drag substep applied to the output of a streaming pass.
#[derive(Clone, Copy)]
struct DragStep<'a> {
    u: &'a FluidState,
    dt: f64,
}

/// Streams `cur` by `v τ` along every spatial axis, then applies `drag` if
/// given; the result is left in `cur`. With `clip` negative values are zeroed
/// before the drag and the added mass is returned.
fn stream(
    grid: &PhaseGrid,
    cur: &mut Vec<f64>,
    next: &mut Vec<f64>,
    tau: f64,
    clip: bool,
    drag_step: Option<DragStep>,
) -> f64 {
    let d = grid.dim();
    let tables: Option<Vec<StreamTable>> = (0..d).map(|a| StreamTable::new(grid, a, tau)).collect();
    let Some(tables) = tables else {
        let mut clipped = 0.0;
        for a in 0..d {
            clipped += stream_pass_general(grid, cur, next, a, tau, clip && a + 1 == d);
            std::mem::swap(cur, next);
        }
        if let Some(st) = drag_step {
            drag(grid, cur, next, st.u, st.dt);
            std::mem::swap(cur, next);
        }
        return clipped;
    };
    let n = grid.spatial.n();
    let nv = grid.velocity.total();
    let vw = grid.v_weights();
    let n_i = n as i64;
    for (a, table) in tables.iter().enumerate().take(d.saturating_sub(2)) {
        let inner = n.pow((d - 1 - a) as u32) * nv;
        let src = &cur[..];
        next.par_chunks_mut(inner).enumerate().for_each(|(chunk, out)| {
            let (outer, i) = (chunk / n, (chunk % n) as i64);
            table.apply(out, nv, |k| {
                let start = (outer * n + (i + k).rem_euclid(n_i) as usize) * inner;
                &src[start..start + inner]
            });
        });
        std::mem::swap(cur, next);
    }
    // The last one or two axes are fused: each output slab at fixed leading
    // x indices is built from a thread-local intermediate slab.
    let src = &cur[..];
    let per_chunk: Vec<f64> = if d == 1 {
        next.par_chunks_mut(nv)
            .enumerate()
            .map_init(
                || (vec![0.0; nv], DragScratch::new(nv)),
                |(tmp, scratch), (i, out)| {
                    let row = if drag_step.is_some() { &mut tmp[..] } else { &mut out[..] };
                    tables[0].apply(row, nv, |k| {
                        let start = (i as i64 + k).rem_euclid(n_i) as usize * nv;
                        &src[start..start + nv]
                    });
                    let added = if clip { clip_rows(row, vw) } else { 0.0 };
                    if let Some(st) = drag_step {
                        drag_row(grid, tmp, out, scratch, i, st.u, st.dt);
                    }
                    added
                },
            )
            .collect()
    } else {
        // Tasks own a block of rows along the last axis for every index of
        // the second-to-last one, so the source rows under the stencil stay
        // cached between consecutive output slabs.
        let slab = n * nv;
        let (first, last) = (&tables[d - 2], &tables[d - 1]);
        let block = STREAM_BLOCK.min(n);
        let width = last.width();
        let halo = block + width - 1;
        let mut tasks: Vec<Vec<&mut [f64]>> = Vec::new();
        for (chunk, s) in next.chunks_exact_mut(slab).enumerate() {
            let (outer, i) = (chunk / n, chunk % n);
            for (k, seg) in s.chunks_mut(block * nv).enumerate() {
                let task = outer * n.div_ceil(block) + k;
                if i == 0 {
                    tasks.push(Vec::with_capacity(n));
                }
                tasks[task].push(seg);
            }
        }
        let blocks = n.div_ceil(block);
        tasks
            .into_par_iter()
            .enumerate()
            .map_init(
                || (vec![0.0; halo * nv], vec![0.0; nv], DragScratch::new(nv)),
                |(buf, tmp, scratch), (task, segs)| {
                    let (outer, b0) = (task / blocks, (task % blocks) * block);
                    let mut added = 0.0;
                    for (i, out) in segs.into_iter().enumerate() {
                        let buf = &mut buf[..];
                        // buf row r holds the first-axis result at x1 = b0 + lo + r.
                        for (r, row) in buf.chunks_exact_mut(nv).enumerate() {
                            let x1 = (b0 as i64 + last.lo + r as i64).rem_euclid(n_i) as usize;
                            first.apply(row, nv, |k| {
                                let xi = (i as i64 + k).rem_euclid(n_i) as usize;
                                let start = ((outer * n + xi) * n + x1) * nv;
                                &src[start..start + nv]
                            });
                        }
                        for (x, o) in out.chunks_exact_mut(nv).enumerate() {
                            let row = if drag_step.is_some() { &mut tmp[..] } else { &mut o[..] };
                            last.apply(row, nv, |k| {
                                let start = (x as i64 + k - last.lo) as usize * nv;
                                &buf[start..start + nv]
                            });
                            if clip {
                                added += clip_rows(row, vw);
                            }
                            if let Some(st) = drag_step {
                                let ix = (outer * n + i) * n + b0 + x;
                                drag_row(grid, tmp, o, scratch, ix, st.u, st.dt);
                            }
                        }
                    }
                    added
                },
            )
            .collect()
    };
    std::mem::swap(cur, next);
    if clip {
        grid.spatial.cell_volume() * pairwise_sum_by(per_chunk.len(), &|i| per_chunk[i])
    } else {
        0.0
    }
}

/// `dst(x, v) = src(x − v_a τ e_a, v)` along spatial axis `a` for shifts too
/// wide for the union kernel.
fn stream_pass_general(grid: &PhaseGrid, src: &[f64], dst: &mut [f64], axis: usize, tau: f64, clip: bool) -> f64 {
    let d = grid.dim();
    let n = grid.spatial.n();
    let nv = grid.velocity.total();
    let inner = n.pow((d - 1 - axis) as u32) * nv;
    let h = grid.spatial.spacing();
    let n_i = n as i64;
    let vw = grid.v_weights();
    let stencils: Vec<(i64, [f64; 4])> = grid.v_points().iter().map(|p| stencil(-p[axis] * tau / h)).collect();
    let per_chunk: Vec<f64> = dst
        .par_chunks_mut(inner)
        .enumerate()
        .map(|(chunk, out)| {
            let (outer, i) = (chunk / n, (chunk % n) as i64);
            for (col, o) in out.iter_mut().enumerate() {
                let (b, w) = &stencils[col % nv];
                let mut acc = 0.0;
                for (t, &wt) in w.iter().enumerate() {
                    let src_i = (i + b + t as i64 - 1).rem_euclid(n_i) as usize;
                    acc += wt * src[(outer * n + src_i) * inner + col];
                }
                *o = acc;
            }
            if clip {
                clip_rows(out, vw)
            } else {
                0.0
            }
        })
        .collect();
    if clip {
        grid.spatial.cell_volume() * pairwise_sum_by(per_chunk.len(), &|i| per_chunk[i])
    } else {
        0.0
    }
}

/// Zeroes negative entries of whole velocity rows and returns the
/// velocity-weighted mass added.
fn clip_rows(values: &mut [f64], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for row in values.chunks_exact_mut(w.len()) {
        for (x, &wj) in row.iter_mut().zip(w) {
            acc += wj * (-*x).max(0.0);
            *x = x.max(0.0);
        }
    }
    acc
}

/// The drag substep over all velocity axes, one x-row at a time.
///
/// Along axis `b` it maps `src(x, v)` to
/// `e^{dt} src(x, u_b(x) + (v_b − u_b(x)) e^{dt})`; taps outside the box
/// read zero. The exact substep leaves `∫ f dv` unchanged at every x, so
/// each output row is rescaled to the velocity mass of its source row,
/// which removes the interpolation defect of the remap.
fn drag(grid: &PhaseGrid, src: &[f64], dst: &mut [f64], u: &FluidState, dt: f64) {
    let nv = grid.velocity.total();
    dst.par_chunks_mut(nv).enumerate().for_each_init(
        || DragScratch::new(nv),
        |scratch, (ix, out)| drag_row(grid, &src[ix * nv..(ix + 1) * nv], out, scratch, ix, u, dt),
    );
}

/// Per-thread buffers of the drag substep. Stencils are kept per axis and
/// reused while consecutive rows see the same `(u_b, dt)`.
struct DragScratch {
    row: Vec<f64>,
    stencils: Vec<(u64, u64, Vec<(usize, [f64; 6])>)>,
}

impl DragScratch {
    fn new(nv: usize) -> Self {
        Self { row: vec![0.0; nv], stencils: Vec::new() }
    }
}

/// The drag substep of the velocity row at spatial node `ix`.
fn drag_row(
    grid: &PhaseGrid,
    row: &[f64],
    out: &mut [f64],
    scratch: &mut DragScratch,
    ix: usize,
    u: &FluidState,
    dt: f64,
) {
    let d = grid.dim();
    let w = grid.v_weights();
    let target = pairwise_dot(w, row);
    let DragScratch { row: tmp, stencils } = scratch;
    if stencils.len() < d {
        stencils.resize_with(d, || (f64::NAN.to_bits(), 0, Vec::new()));
    }
    for b in 0..d {
        let ub = u.u[b][ix];
        let cached = &mut stencils[b];
        if cached.0 != ub.to_bits() || cached.1 != dt.to_bits() {
            *cached = (ub.to_bits(), dt.to_bits(), drag_stencils(grid, ub, dt));
        }
        let st = &cached.2;
        // Ping-pong so that the last axis writes into `out`.
        let to_out = (d - 1 - b).is_multiple_of(2);
        match (b == 0, to_out) {
            (true, true) => drag_axis(grid, row, out, b, st),
            (true, false) => drag_axis(grid, row, tmp, b, st),
            (false, true) => drag_axis(grid, tmp, out, b, st),
            (false, false) => drag_axis(grid, out, tmp, b, st),
        }
    }
    let got = pairwise_dot(w, out);
    if got > 0.0 && target > 0.0 {
        let scale = target / got;
        out.iter_mut().for_each(|x| *x *= scale);
    }
}

/// Windows `(start, weights)` of the drag remap for every velocity node along
/// one axis, with `e^{dt}` folded into the weights. Taps outside the box get
/// weight zero; the window start is clamped.
fn drag_stencils(grid: &PhaseGrid, u: f64, dt: f64) -> Vec<(usize, [f64; 6])> {
    let m = grid.velocity.nodes_per_axis();
    let nodes = grid.velocity.nodes();
    let v0 = nodes[0];
    let h = grid.velocity.spacing();
    let e = dt.exp();
    let m_i = m as i64;
    nodes
        .iter()
        .map(|&v| {
            let (base, wq) = stencil6((u + (v - u) * e - v0) / h);
            let start = (base - 2).clamp(0, m_i - 6);
            let mut ws = [0.0; 6];
            for (t, &wt) in wq.iter().enumerate() {
                let tap = base + t as i64 - 2;
                if (0..m_i).contains(&tap) {
                    ws[(tap - start) as usize] += wt * e;
                }
            }
            (start as usize, ws)
        })
        .collect()
}

/// One-axis drag remap of a single velocity row.
fn drag_axis(grid: &PhaseGrid, row: &[f64], out: &mut [f64], axis: usize, stencils: &[(usize, [f64; 6])]) {
    let d = grid.dim();
    let m = grid.velocity.nodes_per_axis();
    let inner = m.pow((d - 1 - axis) as u32);
    let outer = row.len() / (m * inner);
    if inner == 1 {
        for (o, r) in out.chunks_exact_mut(m).zip(row.chunks_exact(m)) {
            for (x, (start, ws)) in o.iter_mut().zip(stencils) {
                let s = &r[*start..*start + 6];
                *x = ws[0] * s[0] + ws[1] * s[1] + ws[2] * s[2] + ws[3] * s[3] + ws[4] * s[4] + ws[5] * s[5];
            }
        }
        return;
    }
    for q in 0..outer {
        let block = &row[q * m * inner..(q + 1) * m * inner];
        let dst = &mut out[q * m * inner..(q + 1) * m * inner];
        for (o, (start, ws)) in dst.chunks_exact_mut(inner).zip(stencils) {
            let taps = &block[start * inner..(start + 6) * inner];
            let (s0, rest) = taps.split_at(inner);
            let (s1, rest) = rest.split_at(inner);
            let (s2, rest) = rest.split_at(inner);
            let (s3, rest) = rest.split_at(inner);
            let (s4, s5) = rest.split_at(inner);
            let lanes = o.iter_mut().zip(s0).zip(s1).zip(s2).zip(s3).zip(s4).zip(s5);
            for ((((((x, a0), a1), a2), a3), a4), a5) in lanes {
                *x = ws[0] * a0 + ws[1] * a1 + ws[2] * a2 + ws[3] * a3 + ws[4] * a4 + ws[5] * a5;
            }
        }
    }
}
