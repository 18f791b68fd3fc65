//! Versioned binary weight files: a header with magic, version, and
//! per-parameter shapes, then row-major little-endian f64 blocks in
//! declaration order.

use crate::error::{Error, Result};
use crate::numcore::{Matrix, ParamStore};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"XMW\x01";
pub const WEIGHTS_VERSION: u32 = 1;

pub fn save_weights(store: &ParamStore, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(WEIGHTS_MAGIC)?;
    w.write_all(&WEIGHTS_VERSION.to_le_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (name, value) in store.iter() {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(value.rows as u32).to_le_bytes())?;
        w.write_all(&(value.cols as u32).to_le_bytes())?;
    }
    for (_, value) in store.iter() {
        for v in &value.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn load_weights(path: &Path) -> Result<ParamStore> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(Error::Parse { line: 0, msg: "bad weights magic".into() });
    }
    let version = read_u32(&mut r)?;
    if version != WEIGHTS_VERSION {
        return Err(Error::Parse { line: 0, msg: format!("unsupported weights version {version}") });
    }
    let count = read_u32(&mut r)? as usize;
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|e| Error::Parse { line: 0, msg: format!("bad parameter name: {e}") })?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        shapes.push((name, rows, cols));
    }
    let mut store = ParamStore::new();
    for (name, rows, cols) in shapes {
        let mut data = vec![0.0f64; rows * cols];
        let mut buf = [0u8; 8];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        store.insert(&name, Matrix::from_vec(rows, cols, data));
    }
    Ok(store)
}
