//! `VSGRID1` snapshot files.
//!
//! A snapshot is an ASCII header of `key=value` lines followed by a binary
//! payload of little-endian IEEE-754 doubles:
//!
//! ```text
//! VSGRID1
//! d=<1|2|3>
//! n_x=<points per spatial axis>
//! n_v=<cells per velocity axis>
//! L=<period>
//! v_max=<half-width of the velocity box>
//! quadrature=<midpoint|trapezoid>
//! time=<t>
//! kind=<distribution|velocity|pressure>
//! components=<values per node>
//! end
//! <payload>
//! ```
//!
//! Header keys appear exactly in this order, each line ends in `\n` and floats
//! are written in shortest round-trip form. The payload is row-major with
//! x-major ordering, then velocity nodes, then components innermost. A
//! `distribution` has one value per phase node, a `velocity` has `d` values
//! per spatial node and a `pressure` one value per spatial node.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fluid::FluidState;
use crate::grid::{PhaseGrid, Quadrature};
use crate::kinetics::DistributionFunction;

pub const MAGIC: &str = "VSGRID1";

/// Upper bound on payload values accepted by the decoder.
pub const MAX_VALUES: usize = 1 << 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Distribution,
    Velocity,
    Pressure,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Distribution => "distribution",
            FieldKind::Velocity => "velocity",
            FieldKind::Pressure => "pressure",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "distribution" => Ok(FieldKind::Distribution),
            "velocity" => Ok(FieldKind::Velocity),
            "pressure" => Ok(FieldKind::Pressure),
            _ => Err(Error::Snapshot(format!("unknown field kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub d: usize,
    pub n_x: usize,
    pub n_v: usize,
    pub length: f64,
    pub v_max: f64,
    pub quadrature: Quadrature,
    pub time: f64,
    pub kind: FieldKind,
    pub components: usize,
}

impl SnapshotHeader {
    fn for_grid(grid: &PhaseGrid, time: f64, kind: FieldKind) -> Self {
        let d = grid.dim();
        Self {
            d,
            n_x: grid.spatial.n(),
            n_v: grid.velocity.cells(),
            length: grid.spatial.length(),
            v_max: grid.velocity.v_max(),
            quadrature: grid.velocity.quadrature(),
            time,
            kind,
            components: if kind == FieldKind::Velocity { d } else { 1 },
        }
    }

    /// Number of payload values implied by the header, if representable.
    pub fn expected_len(&self) -> Option<usize> {
        let d = self.d as u32;
        let nx = self.n_x.checked_pow(d)?;
        let per_node = match self.kind {
            FieldKind::Distribution => {
                let nodes = match self.quadrature {
                    Quadrature::Midpoint => self.n_v,
                    Quadrature::Trapezoid => self.n_v.checked_add(1)?,
                };
                nodes.checked_pow(d)?
            }
            FieldKind::Velocity | FieldKind::Pressure => 1,
        };
        nx.checked_mul(per_node)?.checked_mul(self.components)
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub data: Vec<f64>,
}

impl Snapshot {
    /// Bitwise equality, so NaN payloads compare equal to themselves.
    pub fn bit_eq(&self, other: &Snapshot) -> bool {
        self.header.d == other.header.d
            && self.header.n_x == other.header.n_x
            && self.header.n_v == other.header.n_v
            && self.header.length.to_bits() == other.header.length.to_bits()
            && self.header.v_max.to_bits() == other.header.v_max.to_bits()
            && self.header.quadrature == other.header.quadrature
            && self.header.time.to_bits() == other.header.time.to_bits()
            && self.header.kind == other.header.kind
            && self.header.components == other.header.components
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn from_distribution(f: &DistributionFunction) -> Self {
        Self { header: SnapshotHeader::for_grid(&f.grid, f.time, FieldKind::Distribution), data: f.values.clone() }
    }

    /// Velocity snapshot; `grid` supplies the velocity-box fields of the header.
    pub fn from_velocity(grid: &PhaseGrid, u: &FluidState) -> Self {
        let d = grid.dim();
        let n = grid.spatial.total();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            for comp in &u.u {
                data.push(comp[i]);
            }
        }
        Self { header: SnapshotHeader::for_grid(grid, u.time, FieldKind::Velocity), data }
    }

    pub fn from_pressure(grid: &PhaseGrid, u: &FluidState) -> Self {
        Self { header: SnapshotHeader::for_grid(grid, u.time, FieldKind::Pressure), data: u.p.clone() }
    }

    fn check_grid(&self, grid: &PhaseGrid, kind: FieldKind) -> Result<()> {
        let want = SnapshotHeader::for_grid(grid, self.header.time, kind);
        if self.header != want {
            return Err(Error::GridMismatch(format!("snapshot header {:?} does not match grid", self.header)));
        }
        Ok(())
    }

    pub fn to_distribution(&self, grid: Arc<PhaseGrid>) -> Result<DistributionFunction> {
        self.check_grid(&grid, FieldKind::Distribution)?;
        DistributionFunction::from_values(grid, self.data.clone(), self.header.time)
    }

    /// Rebuilds a fluid state; the pressure is zero.
    pub fn to_velocity(&self, grid: &PhaseGrid) -> Result<FluidState> {
        self.check_grid(grid, FieldKind::Velocity)?;
        let d = grid.dim();
        let mut state = FluidState::zeros(grid.spatial.clone());
        for (i, chunk) in self.data.chunks_exact(d).enumerate() {
            for (a, &x) in chunk.iter().enumerate() {
                state.u[a][i] = x;
            }
        }
        state.time = self.header.time;
        Ok(state)
    }
}

pub fn encode(s: &Snapshot) -> Result<Vec<u8>> {
    let h = &s.header;
    if h.expected_len() != Some(s.data.len()) {
        return Err(Error::Snapshot(format!("{} payload values do not match the header", s.data.len())));
    }
    let mut out = Vec::with_capacity(256 + 8 * s.data.len());
    write!(
        out,
        "{MAGIC}\nd={}\nn_x={}\nn_v={}\nL={:?}\nv_max={:?}\nquadrature={}\ntime={:?}\nkind={}\ncomponents={}\nend\n",
        h.d,
        h.n_x,
        h.n_v,
        h.length,
        h.v_max,
        h.quadrature.name(),
        h.time,
        h.kind.name(),
        h.components
    )?;
    for x in &s.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

fn next_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .take(128)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Snapshot("truncated or overlong header line".into()))?;
    *pos += end + 1;
    std::str::from_utf8(&rest[..end]).map_err(|_| Error::Snapshot("header is not UTF-8".into()))
}

fn field<'a>(bytes: &'a [u8], pos: &mut usize, key: &str) -> Result<&'a str> {
    let line = next_line(bytes, pos)?;
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::Snapshot(format!("expected `{key}=`, found `{line}`")))
}

fn num<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Snapshot(format!("bad value `{s}` for {key}")))
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
    let mut pos = 0;
    if next_line(bytes, &mut pos)? != MAGIC {
        return Err(Error::Snapshot("missing VSGRID1 magic".into()));
    }
    let d: usize = num(field(bytes, &mut pos, "d")?, "d")?;
    if !(1..=3).contains(&d) {
        return Err(Error::Snapshot(format!("dimension {d} out of range")));
    }
    let n_x = num(field(bytes, &mut pos, "n_x")?, "n_x")?;
    let n_v = num(field(bytes, &mut pos, "n_v")?, "n_v")?;
    let length = num(field(bytes, &mut pos, "L")?, "L")?;
    let v_max = num(field(bytes, &mut pos, "v_max")?, "v_max")?;
    let quadrature = match field(bytes, &mut pos, "quadrature")? {
        "midpoint" => Quadrature::Midpoint,
        "trapezoid" => Quadrature::Trapezoid,
        q => return Err(Error::Snapshot(format!("unknown quadrature `{q}`"))),
    };
    let time = num(field(bytes, &mut pos, "time")?, "time")?;
    let kind = FieldKind::parse(field(bytes, &mut pos, "kind")?)?;
    let components: usize = num(field(bytes, &mut pos, "components")?, "components")?;
    let want_components = if kind == FieldKind::Velocity { d } else { 1 };
    if components != want_components {
        return Err(Error::Snapshot(format!("{} field needs {want_components} components", kind.name())));
    }
    if next_line(bytes, &mut pos)? != "end" {
        return Err(Error::Snapshot("missing `end` line".into()));
    }
    let header = SnapshotHeader { d, n_x, n_v, length, v_max, quadrature, time, kind, components };
    let n = header
        .expected_len()
        .filter(|&n| n <= MAX_VALUES)
        .ok_or_else(|| Error::Snapshot("payload size out of range".into()))?;
    let payload = &bytes[pos..];
    if payload.len() != 8 * n {
        return Err(Error::Snapshot(format!("payload has {} bytes, expected {}", payload.len(), 8 * n)));
    }
    let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Ok(Snapshot { header, data })
}

pub fn write_snapshot(path: &std::path::Path, s: &Snapshot) -> Result<()> {
    std::fs::write(path, encode(s)?)?;
    Ok(())
}

pub fn read_snapshot(path: &std::path::Path) -> Result<Snapshot> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_phase_grid;

    #[test]
    fn distribution_round_trip() {
        let g = Arc::new(make_phase_grid(2, 4, 1.0, 4, 2.0).unwrap());
        let mut f = DistributionFunction::from_fn(g.clone(), |x, v| x[0] + 10.0 * v[1]);
        f.time = 0.1 + 0.2;
        f.values[3] = f64::NAN;
        let s = Snapshot::from_distribution(&f);
        let bytes = encode(&s).unwrap();
        let back = decode(&bytes).unwrap();
        assert!(back.bit_eq(&s));
        assert_eq!(encode(&back).unwrap(), bytes);
        let f2 = back.to_distribution(g).unwrap();
        assert_eq!(f2.time, f.time);
    }

    #[test]
    fn velocity_layout_is_component_innermost() {
        let g = make_phase_grid(2, 4, 1.0, 4, 2.0).unwrap();
        let u = FluidState::from_fn(g.spatial.clone(), |x| [x[0], x[1], 0.0]);
        let s = Snapshot::from_velocity(&g, &u);
        assert_eq!(s.data.len(), 32);
        let p = g.spatial.point(5);
        assert_eq!(&s.data[10..12], &[p[0], p[1]]);
        let back = decode(&encode(&s).unwrap()).unwrap().to_velocity(&g).unwrap();
        assert_eq!(back.u, u.u);
    }

    #[test]
    fn malformed_inputs_are_errors() {
        assert!(decode(b"").is_err());
        assert!(decode(b"VSGRID2\n").is_err());
        let g = make_phase_grid(1, 4, 1.0, 4, 2.0).unwrap();
        let f = DistributionFunction::zeros(Arc::new(g));
        let mut bytes = encode(&Snapshot::from_distribution(&f)).unwrap();
        bytes.pop();
        assert!(decode(&bytes).is_err());
        let huge = b"VSGRID1\nd=3\nn_x=100000\nn_v=100000\nL=1.0\nv_max=1.0\nquadrature=midpoint\ntime=0.0\nkind=distribution\ncomponents=1\nend\n";
        assert!(decode(huge).is_err());
    }
}
