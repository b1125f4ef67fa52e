//! Field serialization.
//!
//! Binary container: a 32-byte little-endian header followed by the samples
//! as little-endian `f64`, row-major with axis order `x₁ … x_d`, one component
//! after another.
//!
//! | offset | size | content                         |
//! |--------|------|---------------------------------|
//! | 0      | 4    | magic `TORF`                    |
//! | 4      | 4    | format version (`u32`, = 1)     |
//! | 8      | 4    | dimension `d` (`u32`)           |
//! | 12     | 4    | points per axis `N` (`u32`)     |
//! | 16     | 4    | component count (`u32`)         |
//! | 20     | 4    | reserved, zero                  |
//! | 24     | 8    | total value count (`u64`)       |

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;

pub const MAGIC: &[u8; 4] = b"TORF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

fn write_header<W: Write>(w: &mut W, grid: &TorusGrid, components: u32) -> Result<()> {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(MAGIC);
    h[4..8].copy_from_slice(&VERSION.to_le_bytes());
    h[8..12].copy_from_slice(&(grid.dim() as u32).to_le_bytes());
    h[12..16].copy_from_slice(&(grid.n() as u32).to_le_bytes());
    h[16..20].copy_from_slice(&components.to_le_bytes());
    let count = grid.len() as u64 * components as u64;
    h[24..32].copy_from_slice(&count.to_le_bytes());
    w.write_all(&h)?;
    Ok(())
}

fn write_values<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_scalar<W: Write>(w: &mut W, f: &ScalarField) -> Result<()> {
    write_header(w, f.grid(), 1)?;
    write_values(w, f.values())
}

pub fn write_vector<W: Write>(w: &mut W, v: &VectorField) -> Result<()> {
    write_header(w, v.grid(), v.components().len() as u32)?;
    for c in v.components() {
        write_values(w, c.values())?;
    }
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<(TorusGrid, usize)> {
    let mut h = [0u8; HEADER_LEN];
    r.read_exact(&mut h).map_err(|e| Error::Format(format!("short header: {e}")))?;
    if &h[0..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let grid = TorusGrid::new(word(8) as usize, word(12) as usize)
        .map_err(|e| Error::Format(e.to_string()))?;
    let comps = word(16) as usize;
    let count = u64::from_le_bytes(h[24..32].try_into().unwrap());
    if comps == 0 || count != (grid.len() * comps) as u64 {
        return Err(Error::Format(format!(
            "value count {count} inconsistent with {comps} components on {grid:?}"
        )));
    }
    Ok((grid, comps))
}

fn read_values<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated data: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_scalar<R: Read>(r: &mut R) -> Result<ScalarField> {
    let (grid, comps) = read_header(r)?;
    if comps != 1 {
        return Err(Error::Format(format!("expected a scalar field, found {comps} components")));
    }
    ScalarField::new(grid, read_values(r, grid.len())?)
}

pub fn read_vector<R: Read>(r: &mut R) -> Result<VectorField> {
    let (grid, comps) = read_header(r)?;
    let fields = (0..comps)
        .map(|_| ScalarField::new(grid, read_values(r, grid.len())?))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(fields)
}

/// Lossy CSV export for plotting: coordinate columns then one value column
/// per component.
pub fn write_csv<W: Write>(w: W, components: &[&ScalarField]) -> Result<()> {
    let Some(first) = components.first() else {
        return Ok(());
    };
    let grid = *first.grid();
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=grid.dim()).map(|a| format!("x{a}")).collect();
    if components.len() == 1 {
        header.push("value".into());
    } else {
        header.extend((1..=components.len()).map(|c| format!("v{c}")));
    }
    out.write_record(&header)?;
    for i in 0..grid.len() {
        let x = grid.point(i);
        let mut row: Vec<String> = (0..grid.dim()).map(|a| format!("{:.6}", x[a])).collect();
        row.extend(components.iter().map(|c| format!("{:.9e}", c.values()[i])));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn scalar_round_trip(d in 1usize..=3, vals in proptest::collection::vec(-1e6..1e6f64, 64)) {
            let g = TorusGrid::new(d, if d == 3 { 4 } else if d == 2 { 8 } else { 64 }).unwrap();
            let f = ScalarField::new(g, vals[..g.len()].to_vec()).unwrap();
            let mut buf = Vec::new();
            write_scalar(&mut buf, &f).unwrap();
            prop_assert_eq!(buf.len(), HEADER_LEN + 8 * g.len());
            prop_assert_eq!(read_scalar(&mut buf.as_slice()).unwrap(), f);
        }
    }

    #[test]
    fn header_layout() {
        let g = TorusGrid::new(2, 4).unwrap();
        let mut buf = Vec::new();
        write_scalar(&mut buf, &ScalarField::constant(g, 1.5)).unwrap();
        assert_eq!(&buf[0..4], b"TORF");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(buf[24..32].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 1.5);
    }

    #[test]
    fn vector_round_trip_and_errors() {
        let g = TorusGrid::new(2, 4).unwrap();
        let v = VectorField::constant(g, &[1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_vector(&mut buf, &v).unwrap();
        let back = read_vector(&mut buf.as_slice()).unwrap();
        assert_eq!(back.components(), v.components());
        assert!(read_scalar(&mut buf.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_vector(&mut bad.as_slice()), Err(Error::Format(_))));
        assert!(read_vector(&mut &buf[..40]).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = TorusGrid::new(1, 4).unwrap();
        let f = ScalarField::constant(g, 2.0);
        let mut buf = Vec::new();
        write_csv(&mut buf, &[&f]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("x1,value"));
    }
}
