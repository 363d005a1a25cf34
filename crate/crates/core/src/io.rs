//! Binary and text persistence formats.
//!
//! Field files ("GPF1"): magic, dim (u32 LE), points per axis (u32 LE each),
//! spacing per axis (f64 LE each), then row-major interleaved (re, im) f64
//! LE pairs. Many-body checkpoints ("MBF1"): magic, modes M and particle
//! number N (u32 LE each), then the coefficient pairs in basis order.
//! Sparse operators export as coordinate-list text: `row col re im` lines.

use crate::field::Field;
use crate::fock::{FockVector, SectorBasis, SparseOperator};
use crate::grid::Grid;
use crate::scalar::{rl, Real, C};
use std::io::{Read, Write};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes, expected {0}")]
    BadMagic(&'static str),
    #[error("corrupt header: {0}")]
    BadHeader(String),
}

pub const FIELD_MAGIC: &[u8; 4] = b"GPF1";
pub const STATE_MAGIC: &[u8; 4] = b"MBF1";

pub fn write_field<T: Real>(w: &mut impl Write, field: &Field<T>) -> Result<(), IoError> {
    let grid = field.grid();
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for &n in grid.dims() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for &h in grid.spacing() {
        w.write_all(&h.to_f64().unwrap().to_le_bytes())?;
    }
    for v in field.values() {
        w.write_all(&v.re.to_f64().unwrap().to_le_bytes())?;
        w.write_all(&v.im.to_f64().unwrap().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field<T: Real>(r: &mut impl Read) -> Result<Field<T>, IoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(IoError::BadMagic("GPF1"));
    }
    let dim = read_u32(r)? as usize;
    if dim == 0 || dim > 3 {
        return Err(IoError::BadHeader(format!("dim {dim}")));
    }
    let mut dims = Vec::with_capacity(dim);
    for _ in 0..dim {
        dims.push(read_u32(r)? as usize);
    }
    let mut spacing = Vec::with_capacity(dim);
    for _ in 0..dim {
        spacing.push(rl::<T>(read_f64(r)?));
    }
    let grid = Grid::new(&dims, &spacing).map_err(|e| IoError::BadHeader(e.to_string()))?;
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let re = rl::<T>(read_f64(r)?);
        let im = rl::<T>(read_f64(r)?);
        values.push(C::new(re, im));
    }
    Ok(Field::from_values(grid, values))
}

pub fn write_state<T: Real>(w: &mut impl Write, state: &FockVector<T>) -> Result<(), IoError> {
    let basis = state.basis();
    w.write_all(STATE_MAGIC)?;
    w.write_all(&(basis.modes() as u32).to_le_bytes())?;
    w.write_all(&(basis.particles() as u32).to_le_bytes())?;
    for v in state.coeffs() {
        w.write_all(&v.re.to_f64().unwrap().to_le_bytes())?;
        w.write_all(&v.im.to_f64().unwrap().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_state<T: Real>(r: &mut impl Read) -> Result<FockVector<T>, IoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return Err(IoError::BadMagic("MBF1"));
    }
    let modes = read_u32(r)? as usize;
    let particles = read_u32(r)? as usize;
    let basis = Arc::new(
        SectorBasis::new(modes, particles, usize::MAX)
            .map_err(|e| IoError::BadHeader(e.to_string()))?,
    );
    let n = basis.dim();
    let mut coeffs = Vec::with_capacity(n);
    for _ in 0..n {
        let re = rl::<T>(read_f64(r)?);
        let im = rl::<T>(read_f64(r)?);
        coeffs.push(C::new(re, im));
    }
    Ok(FockVector::new(basis, coeffs))
}

/// Coordinate-list text export, one `row col re im` line per stored entry.
pub fn write_operator_coo<T: Real>(
    w: &mut impl Write,
    op: &SparseOperator<T>,
) -> Result<(), IoError> {
    for (row, col, val) in op.iter_entries() {
        writeln!(
            w,
            "{} {} {:.17e} {:.17e}",
            row,
            col,
            val.re.to_f64().unwrap(),
            val.im.to_f64().unwrap()
        )?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, IoError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64, IoError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
