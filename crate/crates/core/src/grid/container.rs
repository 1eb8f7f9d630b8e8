//! Binary container for grid fields.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content                                         |
//! |-------|-------------------------------------------------|
//! | 8     | magic `QFLOWGRD`                                |
//! | 4     | format version (u32, currently 1)               |
//! | 1     | manifold tag: 0 torus, 1 line                   |
//! | 1     | kind: 0 real, 1 complex                         |
//! | 2     | reserved, zero                                  |
//! | 4     | dimension d (u32)                               |
//! | 4     | points per axis N (u32)                         |
//! | 4     | field count F (u32); always 1 for complex       |
//! | 8     | box half-width L (f64); π on the torus          |
//!
//! followed by F row-major blocks of N^d f64 values (real), or one row-major
//! block of N^d interleaved (re, im) f64 pairs (complex).

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{GridSpec, Manifold};
use crate::error::{Error, Result};

pub const CONTAINER_MAGIC: &[u8; 8] = b"QFLOWGRD";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum GridData {
    Real { grid: GridSpec, fields: Vec<Vec<f64>> },
    Complex { grid: GridSpec, values: Vec<Complex64> },
}

impl GridData {
    pub fn grid(&self) -> &GridSpec {
        match self {
            GridData::Real { grid, .. } | GridData::Complex { grid, .. } => grid,
        }
    }
}

fn write_header<W: Write>(w: &mut W, grid: &GridSpec, complex: bool, count: usize) -> Result<()> {
    w.write_all(CONTAINER_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let tag = match grid.manifold {
        Manifold::Torus => 0u8,
        Manifold::Line => 1u8,
    };
    w.write_all(&[tag, complex as u8, 0, 0])?;
    w.write_all(&(grid.dim as u32).to_le_bytes())?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&(count as u32).to_le_bytes())?;
    w.write_all(&grid.box_half_width.to_le_bytes())?;
    Ok(())
}

pub fn write_real_fields<W: Write>(w: &mut W, grid: &GridSpec, fields: &[&[f64]]) -> Result<()> {
    if fields.iter().any(|f| f.len() != grid.len()) {
        return Err(Error::InvalidArgument("field length does not match grid".into()));
    }
    write_header(w, grid, false, fields.len())?;
    let mut buf = Vec::with_capacity(grid.len() * 8);
    for f in fields {
        buf.clear();
        for v in f.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn write_complex<W: Write>(w: &mut W, grid: &GridSpec, values: &[Complex64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::InvalidArgument("field length does not match grid".into()));
    }
    write_header(w, grid, true, 1)?;
    let mut buf = Vec::with_capacity(grid.len() * 16);
    for v in values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut raw = vec![0u8; count * 8];
    r.read_exact(&mut raw)?;
    Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_container<R: Read>(r: &mut R) -> Result<GridData> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CONTAINER_MAGIC {
        return Err(Error::InvalidArgument("not a grid container (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Unsupported(format!("container version {version}")));
    }
    let mut tags = [0u8; 4];
    r.read_exact(&mut tags)?;
    let manifold = match tags[0] {
        0 => Manifold::Torus,
        1 => Manifold::Line,
        t => return Err(Error::InvalidArgument(format!("unknown manifold tag {t}"))),
    };
    let complex = match tags[1] {
        0 => false,
        1 => true,
        k => return Err(Error::InvalidArgument(format!("unknown field kind {k}"))),
    };
    let dim = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    let count = read_u32(r)? as usize;
    let mut lb = [0u8; 8];
    r.read_exact(&mut lb)?;
    let grid = GridSpec { manifold, dim, points_per_axis: n, box_half_width: f64::from_le_bytes(lb) };
    grid.validate()?;
    if complex {
        if count != 1 {
            return Err(Error::InvalidArgument("complex container must hold one field".into()));
        }
        let flat = read_f64s(r, 2 * grid.len())?;
        let values = flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(GridData::Complex { grid, values })
    } else {
        let fields = (0..count).map(|_| read_f64s(r, grid.len())).collect::<Result<Vec<_>>>()?;
        Ok(GridData::Real { grid, fields })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_roundtrip() {
        let g = GridSpec::line(2, 8, 3.5).unwrap();
        let a: Vec<f64> = (0..g.len()).map(|i| i as f64 * 0.25).collect();
        let b: Vec<f64> = (0..g.len()).map(|i| -(i as f64)).collect();
        let mut buf = Vec::new();
        write_real_fields(&mut buf, &g, &[&a, &b]).unwrap();
        assert_eq!(buf.len(), 36 + 2 * 8 * g.len());
        let back = read_container(&mut buf.as_slice()).unwrap();
        assert_eq!(back, GridData::Real { grid: g, fields: vec![a, b] });
    }

    #[test]
    fn complex_roundtrip_and_bad_magic() {
        let g = GridSpec::torus(1, 16).unwrap();
        let v: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, 1.0 / (1.0 + i as f64))).collect();
        let mut buf = Vec::new();
        write_complex(&mut buf, &g, &v).unwrap();
        assert_eq!(read_container(&mut buf.as_slice()).unwrap(), GridData::Complex { grid: g, values: v });
        buf[0] = b'X';
        assert!(read_container(&mut buf.as_slice()).is_err());
    }
}
