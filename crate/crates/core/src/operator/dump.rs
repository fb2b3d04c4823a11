//! Binary dump of the dense matrix: little-endian `u64 N`, `u64 m`, `f64 s`,
//! then the entries row by row as `f64`.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::MixedOperator;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DumpHeader {
    pub dim: u64,
    pub resolution: u64,
    pub order: f64,
}

pub fn write_dense_dump<W: Write>(op: &MixedOperator, mut w: W) -> Result<()> {
    let owned;
    let a = match op.dense() {
        Some(a) => a,
        None => {
            owned = op.assemble_dense()?;
            &owned
        }
    };
    w.write_all(&(op.grid().dim() as u64).to_le_bytes())?;
    w.write_all(&(op.grid().resolution() as u64).to_le_bytes())?;
    w.write_all(&op.order().to_le_bytes())?;
    let n = a.nrows();
    let mut buf = Vec::with_capacity(8 * n);
    for i in 0..n {
        buf.clear();
        for j in 0..n {
            buf.extend_from_slice(&a[(i, j)].to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_dense_dump<R: Read>(mut r: R) -> Result<(DumpHeader, DMatrix<f64>)> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let dim = u64::from_le_bytes(word);
    r.read_exact(&mut word)?;
    let resolution = u64::from_le_bytes(word);
    r.read_exact(&mut word)?;
    let order = f64::from_le_bytes(word);
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let count = rest.len() / 8;
    let n = (count as f64).sqrt().round() as usize;
    if n * n * 8 != rest.len() {
        return Err(Error::Parse(format!("dump payload of {} bytes is not a square matrix", rest.len())));
    }
    let vals: Vec<f64> = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((DumpHeader { dim, resolution, order }, DMatrix::from_row_slice(n, n, &vals)))
}
