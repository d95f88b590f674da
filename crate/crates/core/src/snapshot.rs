//! Binary field snapshots.
//!
//! Layout (little-endian): magic `"RTLB"`, version `u32`, grid size `u32`,
//! component count `u32`, then the raw `f64` samples, row-major and
//! component-contiguous.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::TorusGrid;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"RTLB";
pub const VERSION: u32 = 1;

/// Write one or more components sharing a grid.
pub fn write_snapshot<W: Write>(mut w: W, components: &[&ScalarField]) -> Result<()> {
    let grid = components
        .first()
        .ok_or_else(|| Error::SnapshotFormat("no components".into()))?
        .grid();
    for c in components {
        if c.grid() != grid {
            return Err(Error::GridMismatch {
                left: grid.n(),
                right: c.grid().n(),
            });
        }
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&(components.len() as u32).to_le_bytes())?;
    for c in components {
        for v in c.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read back all components of a snapshot.
pub fn read_snapshot<R: Read>(mut r: R) -> Result<Vec<ScalarField>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::SnapshotFormat(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::SnapshotFormat(format!("unsupported version {version}")));
    }
    r.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let ncomp = u32::from_le_bytes(word) as usize;
    let grid = TorusGrid::new(n)?;
    let mut out = Vec::with_capacity(ncomp);
    let mut sample = [0u8; 8];
    for _ in 0..ncomp {
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut sample)?;
            values.push(f64::from_le_bytes(sample));
        }
        out.push(ScalarField::from_values(grid, values)?);
    }
    Ok(out)
}

pub fn write_snapshot_file(path: &Path, components: &[&ScalarField]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(std::io::BufWriter::new(file), components)
}

pub fn read_snapshot_file(path: &Path) -> Result<Vec<ScalarField>> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}
