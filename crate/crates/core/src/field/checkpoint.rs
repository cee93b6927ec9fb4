//! Binary field checkpoints (little endian).
//!
//! Layout: magic `KPZF`, format version `u32`, then `n`, `m`, `margin`
//! (`u64`), `x_min`, `x_max`, `delta`, `bonus`, `drift`, `diffusion`
//! (`f64`), `seed` (`u64`),
//! the `n` shifts (`u64`), the `n` row tags (`u64`) and the increments row
//! by row.

use std::io::{Read, Write};

use super::{scaling_constants, LppField};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"KPZF";
const VERSION: u32 = 1;

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn bad(msg: &str) -> Error {
    Error::Argument(format!("malformed field checkpoint: {msg}"))
}

impl LppField {
    pub fn write_checkpoint(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for v in [self.n, self.m, self.margin] {
            put_u64(w, v as u64)?;
        }
        for v in [self.x_min, self.x_max, self.delta, self.bonus, self.drift, self.diffusion] {
            put_f64(w, v)?;
        }
        put_u64(w, self.seed)?;
        for &s in self.shifts.iter() {
            put_u64(w, s as u64)?;
        }
        for &t in &self.row_tags {
            put_u64(w, t)?;
        }
        for row in &self.rows {
            for &v in row.iter() {
                put_f64(w, v)?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("wrong magic"));
        }
        let mut ver = [0u8; 4];
        r.read_exact(&mut ver)?;
        if u32::from_le_bytes(ver) != VERSION {
            return Err(bad("unsupported version"));
        }
        let n = get_u64(r)? as usize;
        let m = get_u64(r)? as usize;
        let margin = get_u64(r)? as usize;
        if n == 0 || m == 0 || n > 1 << 24 || m > 1 << 28 || margin > m + (1 << 20) {
            return Err(bad("implausible dimensions"));
        }
        let x_min = get_f64(r)?;
        let x_max = get_f64(r)?;
        let delta = get_f64(r)?;
        let bonus = get_f64(r)?;
        let drift = get_f64(r)?;
        let diffusion = get_f64(r)?;
        let seed = get_u64(r)?;
        let shifts = (0..n)
            .map(|_| get_u64(r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        if shifts.iter().any(|&s| s > margin) {
            return Err(bad("shift exceeds margin"));
        }
        let row_tags = (0..n).map(|_| get_u64(r)).collect::<Result<Vec<_>>>()?;
        let rows = (0..n)
            .map(|_| {
                (0..m + margin)
                    .map(|_| get_f64(r))
                    .collect::<Result<Vec<_>>>()
                    .map(Into::into)
            })
            .collect::<Result<Vec<_>>>()?;
        let (a, b) = scaling_constants(n);
        Ok(Self::assemble(
            n,
            x_min,
            x_max,
            delta,
            m,
            margin,
            shifts.into(),
            (drift, diffusion),
            (a, b, bonus),
            seed,
            rows,
            row_tags,
        ))
    }
}
