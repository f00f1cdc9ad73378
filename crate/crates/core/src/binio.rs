//! Little-endian helpers shared by the dataset and checkpoint formats.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub(crate) fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(format!("truncated file while reading {what}")),
        _ => Error::Io(e),
    })
}

pub(crate) fn read_array<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf, what)?;
    Ok(buf)
}

pub(crate) fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r, what)?))
}

pub(crate) fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r, what)?))
}

pub(crate) fn read_f64(r: &mut impl Read, what: &str) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r, what)?))
}

pub(crate) fn read_vec(r: &mut impl Read, n: usize, what: &str) -> Result<Array1<f64>> {
    let mut vals = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        vals.push(read_f64(r, what)?);
    }
    Ok(Array1::from(vals))
}

pub(crate) fn read_block(r: &mut impl Read, rows: usize, cols: usize, what: &str) -> Result<Array2<f64>> {
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(format!("{what} block size overflows")))?;
    let vals = read_vec(r, n, what)?.to_vec();
    Ok(Array2::from_shape_vec((rows, cols), vals).expect("shape matches length"))
}

pub(crate) fn expect_eof(r: &mut impl Read, after: &str) -> Result<()> {
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format(format!("trailing bytes after {after}")));
    }
    Ok(())
}

pub(crate) fn write_f64s<'a>(w: &mut impl Write, vals: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}
