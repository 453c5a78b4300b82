//! Binary field snapshots.
//!
//! Layout: the 8-byte magic `PMAGSNP1`, a little-endian `u64` header length,
//! a UTF-8 JSON header, then each field's payload as little-endian `f64`
//! values. Cells are stored row-major (x fastest), components innermost in the
//! order given by the header. Tensors are stored as `[xx, xy, yx, yy]`.

use super::{FieldState, Grid};
use crate::error::{Error, Result};
use crate::tensor::{Mat2, Vec2};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"PMAGSNP1";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldEntry {
    pub name: String,
    pub components: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub cells: [usize; 2],
    pub padded_cells: [usize; 2],
    pub grid: Grid,
    pub time: f64,
    pub step: u64,
    pub fields: Vec<FieldEntry>,
}

fn layout(grid: &Grid) -> Vec<FieldEntry> {
    let n = grid.len();
    let e = |name: &str, components, len| FieldEntry { name: name.into(), components, len };
    vec![
        e("v", 2, n),
        e("Ee", 4, n),
        e("Ep", 4, n),
        e("m", 2, n),
        e("u", 1, grid.padded_len()),
        e("w", 1, n),
    ]
}

pub fn write_snapshot<W: Write>(mut out: W, grid: &Grid, s: &FieldState, step: u64) -> Result<()> {
    let header = SnapshotHeader {
        dim: grid.dim,
        cells: grid.cells,
        padded_cells: grid.padded_cells(),
        grid: grid.clone(),
        time: s.t,
        step,
        fields: layout(grid),
    };
    let h = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&(h.len() as u64).to_le_bytes())?;
    out.write_all(&h)?;
    let mut buf = Vec::with_capacity(8 * (12 * grid.len() + grid.padded_len()));
    let mut put = |x: f64| buf.extend_from_slice(&x.to_le_bytes());
    s.v.iter().for_each(|x| x.0.iter().for_each(|&c| put(c)));
    for t in s.ee.iter().chain(s.ep.iter()) {
        t.0.iter().flatten().for_each(|&c| put(c));
    }
    s.m.iter().for_each(|x| x.0.iter().for_each(|&c| put(c)));
    s.u.iter().for_each(|&c| put(c));
    s.w.iter().for_each(|&c| put(c));
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut inp: R) -> Result<(SnapshotHeader, FieldState)> {
    let mut magic = [0u8; 8];
    inp.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated snapshot (no magic)".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("not a field snapshot (bad magic)".into()));
    }
    let mut lenb = [0u8; 8];
    inp.read_exact(&mut lenb)
        .map_err(|_| Error::Format("truncated snapshot header length".into()))?;
    let hlen = u64::from_le_bytes(lenb) as usize;
    if hlen > 1 << 24 {
        return Err(Error::Format(format!("implausible header length {hlen}")));
    }
    let mut hb = vec![0u8; hlen];
    inp.read_exact(&mut hb)
        .map_err(|_| Error::Format("truncated snapshot header".into()))?;
    let header: SnapshotHeader = serde_json::from_slice(&hb)
        .map_err(|e| Error::Format(format!("bad snapshot header: {e}")))?;
    if header.fields != layout(&header.grid) || header.cells != header.grid.cells {
        return Err(Error::Format("snapshot header does not match its grid".into()));
    }
    let total: usize = header.fields.iter().map(|f| f.components * f.len).sum();
    let mut payload = vec![0u8; 8 * total];
    inp.read_exact(&mut payload)
        .map_err(|_| Error::Format("truncated snapshot payload".into()))?;
    let mut rest = Vec::new();
    inp.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format("trailing bytes after snapshot payload".into()));
    }
    let mut vals = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
    let mut next = || vals.next().expect("payload length checked");
    let g = &header.grid;
    let n = g.len();
    let mut s = FieldState::zeros(g);
    s.t = header.time;
    for x in s.v.iter_mut() {
        *x = Vec2::new(next(), next());
    }
    for t in s.ee.iter_mut() {
        *t = Mat2::new(next(), next(), next(), next());
    }
    for t in s.ep.iter_mut() {
        *t = Mat2::new(next(), next(), next(), next());
    }
    for x in s.m.iter_mut() {
        *x = Vec2::new(next(), next());
    }
    for x in s.u.iter_mut() {
        *x = next();
    }
    for x in s.w.iter_mut().take(n) {
        *x = next();
    }
    Ok((header, s))
}

pub fn save(path: &Path, grid: &Grid, s: &FieldState, step: u64) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_snapshot(&mut w, grid, s, step)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(SnapshotHeader, FieldState)> {
    let f = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(f))
}
