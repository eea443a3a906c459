//! IDX container (the MNIST distribution format): big-endian magic, dimensions, payload.

use std::path::Path;

use crate::{Error, Result};

pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const IMAGES_MAGIC: u32 = 0x0000_0803;
const UBYTE: u8 = 0x08;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdxData {
    Labels(Vec<u8>),
    Images { n: usize, rows: usize, cols: usize, pixels: Vec<u8> },
}

impl IdxData {
    pub fn len(&self) -> usize {
        match self {
            IdxData::Labels(l) => l.len(),
            IdxData::Images { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxData> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingData { path: path.to_path_buf() });
    }
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    parse_idx(&bytes)
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    if bytes.len() < 4 {
        return Err(Error::Truncated { offset: 0, expected: 4, actual: bytes.len() });
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::BadMagic { found: magic, expected: IMAGES_MAGIC });
    }
    if bytes[2] != UBYTE {
        return Err(Error::UnsupportedType { code: bytes[2] });
    }
    let ndim = bytes[3] as usize;
    if ndim != 1 && ndim != 3 {
        return Err(Error::BadMagic { found: magic, expected: if ndim < 2 { LABELS_MAGIC } else { IMAGES_MAGIC } });
    }
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Truncated { offset: 4, expected: header, actual: bytes.len() });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let mut payload = 1usize;
    for (i, &d) in dims.iter().enumerate() {
        payload = payload.checked_mul(d).ok_or(Error::DimensionOverflow { offset: 4 + 4 * i })?;
    }
    let actual = bytes.len() - header;
    if actual < payload {
        return Err(Error::Truncated { offset: header, expected: payload, actual });
    }
    let data = bytes[header..header + payload].to_vec();
    Ok(match ndim {
        1 => IdxData::Labels(data),
        _ => IdxData::Images { n: dims[0], rows: dims[1], cols: dims[2], pixels: data },
    })
}

/// Serialize back to IDX bytes.
pub fn write_idx(data: &IdxData) -> Vec<u8> {
    let (magic, dims, payload): (u32, Vec<usize>, &[u8]) = match data {
        IdxData::Labels(l) => (LABELS_MAGIC, vec![l.len()], l),
        IdxData::Images { n, rows, cols, pixels } => (IMAGES_MAGIC, vec![*n, *rows, *cols], pixels),
    };
    let mut out = magic.to_be_bytes().to_vec();
    for d in dims {
        out.extend((d as u32).to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}
