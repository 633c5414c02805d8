//! Binary snapshot dumps.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `RHSNAP01` |
//! | 4 | `u32` length `L` of the JSON header |
//! | L | UTF-8 JSON [`DumpHeader`] |
//! | 8 · K · N | `f64` node values, snapshot-major, nodes row-major (`j` outer) |
//!
//! `K` is `snapshots` and `N` the number of lattice nodes. Dirichlet nodes
//! hold their boundary value.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RingDomain, RingSpec};
use crate::solver::{classify_nodes, BoundaryValues, GridSpec, Lattice, NodeKind, SpaceTimeField};

pub const MAGIC: &[u8; 8] = b"RHSNAP01";
pub const FORMAT_VERSION: u32 = 1;
const MAX_HEADER: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpHeader {
    pub version: u32,
    pub dim: usize,
    pub ring: RingSpec,
    pub grid: GridSpec,
    pub lattice: Lattice,
    pub snapshots: usize,
    pub boundary: BoundaryValues,
    pub exploratory: bool,
}

pub fn header_of(field: &SpaceTimeField) -> DumpHeader {
    DumpHeader {
        version: FORMAT_VERSION,
        dim: field.ring().dim(),
        ring: field.ring().spec(),
        grid: field.grid().clone(),
        lattice: *field.classification().lattice(),
        snapshots: field.snapshot_count(),
        boundary: field.boundary_values(),
        exploratory: field.is_exploratory(),
    }
}

pub fn encode(field: &SpaceTimeField) -> Vec<u8> {
    let header = serde_json::to_vec(&header_of(field)).expect("header serializes");
    let cls = field.classification();
    let lattice = cls.lattice();
    let mut out = Vec::with_capacity(12 + header.len() + 8 * field.snapshot_count() * lattice.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for k in 0..field.snapshot_count() {
        for idx in 0..lattice.len() {
            let (i, j) = lattice.coords(idx);
            out.extend_from_slice(&field.node_value(i, j, k).to_le_bytes());
        }
    }
    out
}

/// Parse and validate the header; returns it with the payload slice.
pub fn decode_header(bytes: &[u8]) -> Result<(DumpHeader, &[u8])> {
    let fmt = |m: &str| Error::Format(m.to_string());
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(fmt("missing magic"));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if len > MAX_HEADER || 12 + len > bytes.len() {
        return Err(fmt("header length exceeds input"));
    }
    let header: DumpHeader =
        serde_json::from_slice(&bytes[12..12 + len]).map_err(|e| Error::Format(format!("header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {}", header.version)));
    }
    let payload = &bytes[12 + len..];
    let (nx, ny) = (
        header.lattice.hi[0].checked_sub(header.lattice.lo[0]).and_then(|d| d.checked_add(1)),
        header.lattice.hi[1].checked_sub(header.lattice.lo[1]).and_then(|d| d.checked_add(1)),
    );
    let nodes = match (nx, ny) {
        (Some(a), Some(b)) if a > 0 && b > 0 => (a as u128) * (b as u128),
        _ => return Err(fmt("empty or inverted lattice")),
    };
    let expected = nodes * header.snapshots as u128 * 8;
    if expected != payload.len() as u128 {
        return Err(Error::Format(format!(
            "payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    Ok((header, payload))
}

/// Rebuild a field from a dump, re-deriving the node classification.
pub fn decode(bytes: &[u8]) -> Result<SpaceTimeField> {
    let (header, payload) = decode_header(bytes)?;
    let ring = RingDomain::from_spec(&header.ring)?;
    if ring.dim() != header.dim {
        return Err(Error::Format("dimension does not match ring".into()));
    }
    header.grid.validate()?;
    if header.snapshots != header.grid.steps() / header.grid.snapshot_every + 1 {
        return Err(Error::Format("snapshot count does not match grid".into()));
    }
    if Lattice::covering(&ring, header.grid.h)? != header.lattice {
        return Err(Error::Format("lattice does not match ring and spacing".into()));
    }
    let cls = classify_nodes(&ring, &header.grid)?;
    let n = header.lattice.len();
    let mut snapshots = Vec::with_capacity(header.snapshots);
    for k in 0..header.snapshots {
        let block = &payload[8 * n * k..8 * n * (k + 1)];
        let mut s = Vec::with_capacity(cls.fluid_count());
        for (f, &idx) in cls.fluid_nodes().iter().enumerate() {
            debug_assert_eq!(cls.kinds()[idx], NodeKind::Fluid);
            let v = f64::from_le_bytes(block[8 * idx..8 * idx + 8].try_into().expect("8 bytes"));
            if !v.is_finite() {
                return Err(Error::Format(format!("non-finite value at snapshot {k}, fluid node {f}")));
            }
            s.push(v);
        }
        snapshots.push(s);
    }
    Ok(SpaceTimeField::from_parts(
        ring,
        header.grid,
        Arc::new(cls),
        header.boundary,
        snapshots,
        header.exploratory,
    ))
}

pub fn write_dump(path: &Path, field: &SpaceTimeField) -> Result<()> {
    std::fs::write(path, encode(field))?;
    Ok(())
}

pub fn read_dump(path: &Path) -> Result<SpaceTimeField> {
    decode(&std::fs::read(path)?)
}

/// Nodal differences between two runs on a common ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    /// Max over common nodes and common snapshot times `≥ t_from`.
    pub linf: f64,
    pub linf_final: f64,
    /// `(Σ d² hⁿ)^{1/2}` at the last common time.
    pub l2_final: f64,
    pub nodes: usize,
    pub times: usize,
    pub coarse_h: f64,
    pub fine_h: f64,
}

fn integer_ratio(big: f64, small: f64) -> Option<i64> {
    let r = big / small;
    let k = r.round();
    ((r - k).abs() < 1e-9 * r.max(1.0) && k >= 1.0).then_some(k as i64)
}

/// [`compare_with`] over the whole stored window.
pub fn compare(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<CompareReport> {
    compare_with(a, b, 0.0)
}

/// Compare on nodes of the coarser lattice that are fluid in both runs, at
/// snapshot times present in both.
pub fn compare_with(a: &SpaceTimeField, b: &SpaceTimeField, t_from: f64) -> Result<CompareReport> {
    let incompatible = |m: String| Error::IncompatibleRuns(m);
    if a.ring().spec() != b.ring().spec() {
        return Err(incompatible("rings differ".into()));
    }
    if a.boundary_values() != b.boundary_values() {
        return Err(incompatible("boundary values differ".into()));
    }
    let (coarse, fine) = if a.grid().h >= b.grid().h { (a, b) } else { (b, a) };
    let r = integer_ratio(coarse.grid().h, fine.grid().h)
        .ok_or_else(|| incompatible(format!("spacings {} and {} are not nested", coarse.grid().h, fine.grid().h)))?;
    let (dc, df) = (coarse.snapshot_dt(), fine.snapshot_dt());
    let mut times = Vec::new();
    for k in 0..coarse.snapshot_count() {
        let t = coarse.snapshot_time(k);
        if t < t_from {
            continue;
        }
        let m = (t / df).round();
        if (m * df - t).abs() < 1e-9 * dc && (m as usize) < fine.snapshot_count() {
            times.push((k, m as usize));
        }
    }
    if times.is_empty() {
        return Err(incompatible("no common snapshot times".into()));
    }
    let cc = coarse.classification();
    let fc = fine.classification();
    let mut pairs = Vec::new();
    for (f, &idx) in cc.fluid_nodes().iter().enumerate() {
        let (i, j) = cc.lattice().coords(idx);
        if let Some(g) = fc.fluid_index(i * r, j * r) {
            pairs.push((f, g));
        }
    }
    if pairs.is_empty() {
        return Err(incompatible("no common fluid nodes".into()));
    }
    let mut linf: f64 = 0.0;
    let mut linf_final: f64 = 0.0;
    let mut l2 = 0.0;
    let last = times.len() - 1;
    for (n, &(k, m)) in times.iter().enumerate() {
        let (sc, sf) = (coarse.snapshot(k), fine.snapshot(m));
        for &(f, g) in &pairs {
            let d = (sc[f] - sf[g]).abs();
            linf = linf.max(d);
            if n == last {
                linf_final = linf_final.max(d);
                l2 += d * d;
            }
        }
    }
    let cell = coarse.grid().h.powi(coarse.ring().dim() as i32);
    Ok(CompareReport {
        linf,
        linf_final,
        l2_final: (l2 * cell).sqrt(),
        nodes: pairs.len(),
        times: times.len(),
        coarse_h: coarse.grid().h,
        fine_h: fine.grid().h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ring, ConvexBody};
    use crate::solver::solve_heat;

    fn small() -> SpaceTimeField {
        let ring = make_ring(
            ConvexBody::disk([0.0, 0.0], 1.0).unwrap(),
            ConvexBody::disk([0.0, 0.0], 0.3).unwrap(),
        )
        .unwrap();
        solve_heat(&ring, &GridSpec::new(0.1, 0.01, 0.1), None).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let f = small();
        let bytes = encode(&f);
        let g = decode(&bytes).unwrap();
        assert_eq!(f.snapshot_count(), g.snapshot_count());
        for k in 0..f.snapshot_count() {
            assert_eq!(f.snapshot(k), g.snapshot(k));
        }
        assert_eq!(encode(&g), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode(&small());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(b"RHSNAP0").is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut huge = bytes.clone();
        huge[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode(&huge).is_err());
    }

    #[test]
    fn compare_identical_and_mismatched() {
        let f = small();
        let r = compare(&f, &f).unwrap();
        assert_eq!(r.linf, 0.0);
        assert_eq!(r.l2_final, 0.0);
        let other = make_ring(
            ConvexBody::disk([0.0, 0.0], 1.0).unwrap(),
            ConvexBody::disk([0.0, 0.0], 0.4).unwrap(),
        )
        .unwrap();
        let g = solve_heat(&other, &GridSpec::new(0.1, 0.01, 0.1), None).unwrap();
        assert!(matches!(compare(&f, &g), Err(Error::IncompatibleRuns(_))));
        let ring = f.ring().clone();
        let q = solve_heat(&ring, &GridSpec::new(0.07, 0.01, 0.1), None).unwrap();
        assert!(matches!(compare(&f, &q), Err(Error::IncompatibleRuns(_))));
        let fine = solve_heat(&ring, &GridSpec::new(0.05, 0.01, 0.1), None).unwrap();
        let r = compare(&f, &fine).unwrap();
        assert!(r.linf > 0.0 && r.linf < 0.1 && r.nodes > 100, "{r:?}");
    }
}
