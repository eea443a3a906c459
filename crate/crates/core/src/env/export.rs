//! Environment persistence: CSV (feature columns then `label`) and a little-endian binary cache.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::Environment;
use crate::{Error, Result};

/// First eight bytes of every cache file.
pub const CACHE_TAG: &[u8; 8] = b"CEIRMv01";

pub fn write_csv(env: &Environment, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<String> = (0..env.width()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (row, y) in env.inputs.rows().into_iter().zip(&env.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Read a CSV written by [`write_csv`]; `classes` is inferred as `max label + 1`.
pub fn read_csv(path: impl AsRef<Path>, env_id: &str) -> Result<Environment> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let width = r.headers().map_err(|e| csv_err(path, e))?.len().saturating_sub(1);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for j in 0..width {
            values.push(parse_field::<f64>(path, &rec[j])?);
        }
        labels.push(parse_field::<usize>(path, &rec[width])?);
    }
    let n = labels.len();
    let inputs = Array2::from_shape_vec((n, width), values).expect("row widths checked by csv reader");
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    Environment::new(inputs, labels, classes, env_id)
}

fn parse_field<T: std::str::FromStr>(path: &Path, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse { path: path.to_path_buf(), msg: format!("bad field {s:?}") })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse { path: path.to_path_buf(), msg: e.to_string() }
}

pub fn write_cache(env: &Environment, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = CACHE_TAG.to_vec();
    let put = |buf: &mut Vec<u8>, x: u64| buf.extend(x.to_le_bytes());
    put(&mut buf, env.len() as u64);
    put(&mut buf, env.width() as u64);
    put(&mut buf, env.classes as u64);
    put(&mut buf, env.seed);
    put(&mut buf, env.env_id.len() as u64);
    buf.extend(env.env_id.as_bytes());
    for v in env.inputs.iter() {
        buf.extend(v.to_le_bytes());
    }
    for &y in &env.labels {
        put(&mut buf, y as u64);
    }
    put(&mut buf, env.gen_params.len() as u64);
    for (k, v) in &env.gen_params {
        put(&mut buf, k.len() as u64);
        buf.extend(k.as_bytes());
        buf.extend(v.to_le_bytes());
    }
    std::fs::File::create(path).and_then(|mut f| f.write_all(&buf)).map_err(Error::io(path))
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<Environment> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(Error::io(path))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0, path };
    if cur.take(8)? != CACHE_TAG {
        return Err(Error::Parse { path: path.to_path_buf(), msg: "unknown cache version tag".into() });
    }
    let n = cur.u64()? as usize;
    let d = cur.u64()? as usize;
    let classes = cur.u64()? as usize;
    let seed = cur.u64()?;
    let id_len = cur.u64()? as usize;
    let env_id = cur.string(id_len)?;
    let count = n.checked_mul(d).ok_or_else(|| cur.bad("dimension overflow"))?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(cur.f64()?);
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(cur.u64()? as usize);
    }
    let mut gen_params = BTreeMap::new();
    for _ in 0..cur.u64()? {
        let len = cur.u64()? as usize;
        let k = cur.string(len)?;
        gen_params.insert(k, cur.f64()?);
    }
    let inputs = Array2::from_shape_vec((n, d), values).expect("length is n·d");
    let mut env = Environment::new(inputs, labels, classes, env_id)?;
    env.seed = seed;
    env.gen_params = gen_params;
    Ok(env)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn bad(&self, msg: &str) -> Error {
        Error::Parse { path: self.path.to_path_buf(), msg: format!("{msg} at byte {}", self.pos) }
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < k {
            return Err(Error::Truncated { offset: self.pos, expected: k, actual: self.bytes.len() - self.pos });
        }
        self.pos += k;
        Ok(&self.bytes[self.pos - k..self.pos])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, len: usize) -> Result<String> {
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.bad("invalid utf-8"))
    }
}
