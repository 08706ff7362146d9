//! Binary checkpoints.
//!
//! Little-endian layout: magic `VLPIC1`, `u32` format version, `u32` model
//! dimension, `u64` particle count, then per axis `u64` cells, `u64` degree
//! and `f64` length. Field vectors follow, each as `u64` length plus data,
//! then positions, momenta, spins and weights, and finally `f64` time,
//! `u64` step and `f64` initial energy.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{io_error, RunError};

const MAGIC: &[u8; 6] = b"VLPIC1";
const VERSION: u32 = 1;

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub dims: usize,
    pub cells: Vec<usize>,
    pub degrees: Vec<usize>,
    pub lengths: Vec<f64>,
    /// Field coefficient vectors in model order.
    pub fields: Vec<DVector<f64>>,
    /// Positions and momenta flattened, `dims` values per particle.
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub s: Vec<[f64; 3]>,
    pub w: Vec<f64>,
    pub time: f64,
    pub step: u64,
    pub h0: f64,
}

impl Checkpoint {
    pub fn particle_count(&self) -> usize {
        self.w.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&(self.dims as u32).to_le_bytes());
        b.extend_from_slice(&(self.particle_count() as u64).to_le_bytes());
        for d in 0..self.dims {
            b.extend_from_slice(&(self.cells[d] as u64).to_le_bytes());
            b.extend_from_slice(&(self.degrees[d] as u64).to_le_bytes());
            b.extend_from_slice(&self.lengths[d].to_le_bytes());
        }
        b.extend_from_slice(&(self.fields.len() as u64).to_le_bytes());
        for f in &self.fields {
            b.extend_from_slice(&(f.len() as u64).to_le_bytes());
            put_f64s(&mut b, f.as_slice());
        }
        put_f64s(&mut b, &self.x);
        put_f64s(&mut b, &self.p);
        for s in &self.s {
            put_f64s(&mut b, s);
        }
        put_f64s(&mut b, &self.w);
        b.extend_from_slice(&self.time.to_le_bytes());
        b.extend_from_slice(&self.step.to_le_bytes());
        b.extend_from_slice(&self.h0.to_le_bytes());
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> io::Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(invalid("not a checkpoint file"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(invalid(&format!("unsupported checkpoint version {version}")));
        }
        let dims = read_u32(&mut r)? as usize;
        if !(1..=2).contains(&dims) {
            return Err(invalid(&format!("bad model dimension {dims}")));
        }
        let np = read_len(&mut r, bytes.len())?;
        let (mut cells, mut degrees, mut lengths) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..dims {
            cells.push(read_len(&mut r, bytes.len())?);
            degrees.push(read_len(&mut r, bytes.len())?);
            lengths.push(read_f64(&mut r)?);
        }
        let nfields = read_len(&mut r, bytes.len())?;
        let mut fields = Vec::with_capacity(nfields);
        for _ in 0..nfields {
            let n = read_len(&mut r, bytes.len())?;
            fields.push(DVector::from_vec(read_f64s(&mut r, n)?));
        }
        let x = read_f64s(&mut r, np * dims)?;
        let p = read_f64s(&mut r, np * dims)?;
        let flat_s = read_f64s(&mut r, np * 3)?;
        let s = flat_s.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let w = read_f64s(&mut r, np)?;
        let time = read_f64(&mut r)?;
        let step = read_u64(&mut r)?;
        let h0 = read_f64(&mut r)?;
        if !r.is_empty() {
            return Err(invalid("trailing bytes after checkpoint"));
        }
        Ok(Checkpoint { dims, cells, degrees, lengths, fields, x, p, s, w, time, step, h0 })
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        let tmp = path.with_extension("tmp");
        let mut file = fs::File::create(&tmp).map_err(|e| io_error(&tmp, e))?;
        file.write_all(&self.to_bytes()).map_err(|e| io_error(&tmp, e))?;
        file.sync_all().map_err(|e| io_error(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| io_error(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, RunError> {
        let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| io_error(path, e))
    }
}

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn put_f64s(b: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        b.extend_from_slice(&x.to_le_bytes());
    }
}

fn read_u32(r: &mut &[u8]) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut &[u8]) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// A count, rejected early if it could not fit in the file.
fn read_len(r: &mut &[u8], total: usize) -> io::Result<usize> {
    let n = read_u64(r)?;
    if n > total as u64 {
        return Err(invalid("length field exceeds file size"));
    }
    Ok(n as usize)
}

fn read_f64(r: &mut &[u8]) -> io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_f64s(r: &mut &[u8], n: usize) -> io::Result<Vec<f64>> {
    if r.len() < n * 8 {
        return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "checkpoint truncated"));
    }
    (0..n).map(|_| read_f64(r)).collect()
}
