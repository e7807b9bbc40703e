//! MSPC1 binary cloud format.
//!
//! Little-endian. Header: magic `MSPC1` (5 bytes), `u32` dimension, `u64` point count.
//! Record: position as 3×`f64`, `u32` observation count, dimension×`f32` embedding.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::model::{Embedding, SemanticPoint, SemanticPointCloud};

pub const CLOUD_MAGIC: &[u8; 5] = b"MSPC1";
const HEADER_LEN: u64 = 5 + 4 + 8;

fn record_len(dim: usize) -> u64 {
    3 * 8 + 4 + 4 * dim as u64
}

pub fn write_cloud<W: Write>(cloud: &SemanticPointCloud, mut w: W) -> Result<()> {
    let io = |e| Error::io("<cloud stream>", e);
    w.write_all(CLOUD_MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(cloud.dim as u32).map_err(io)?;
    w.write_u64::<LittleEndian>(cloud.points.len() as u64)
        .map_err(io)?;
    for p in &cloud.points {
        if p.embedding.dim() != cloud.dim {
            return Err(Error::DimensionMismatch {
                expected: cloud.dim,
                found: p.embedding.dim(),
            });
        }
        for c in p.position {
            w.write_f64::<LittleEndian>(c).map_err(io)?;
        }
        w.write_u32::<LittleEndian>(p.observations).map_err(io)?;
        for &v in p.embedding.values() {
            w.write_f32::<LittleEndian>(v).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Decodes an MSPC1 byte buffer.
pub fn decode_cloud(bytes: &[u8]) -> Result<SemanticPointCloud> {
    if bytes.len() < CLOUD_MAGIC.len() || &bytes[..5] != CLOUD_MAGIC {
        return Err(Error::BadMagic { expected: "MSPC1" });
    }
    if (bytes.len() as u64) < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len() as u64,
        });
    }
    let mut r = &bytes[5..];
    let eof = |e| Error::io("<cloud stream>", e);
    let dim = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let count = r.read_u64::<LittleEndian>().map_err(eof)?;
    let payload = bytes.len() as u64 - HEADER_LEN;
    let expected = count
        .checked_mul(record_len(dim))
        .ok_or_else(|| Error::invalid("point count overflows"))?;
    if payload != expected {
        // payload that splits evenly into records of another dimension
        if count > 0 && payload >= count * 28 && (payload - count * 28) % (4 * count) == 0 {
            let records = ((payload - count * 28) / (4 * count)) as usize;
            if records != dim {
                return Err(Error::HeaderDimensionMismatch {
                    header: dim,
                    records,
                });
            }
        }
        if payload < expected {
            return Err(Error::Truncated {
                expected: HEADER_LEN + expected,
                found: bytes.len() as u64,
            });
        }
        return Err(Error::TrailingBytes(payload - expected));
    }
    let mut cloud = SemanticPointCloud::new(dim);
    cloud.points.reserve(count as usize);
    for _ in 0..count {
        let mut position = [0.0; 3];
        for c in position.iter_mut() {
            *c = r.read_f64::<LittleEndian>().map_err(eof)?;
        }
        let observations = r.read_u32::<LittleEndian>().map_err(eof)?;
        let mut values = vec![0.0f32; dim];
        r.read_f32_into::<LittleEndian>(&mut values).map_err(eof)?;
        let embedding = Embedding::from_stored(values)?;
        if (observations == 0) != embedding.is_null() {
            return Err(Error::invalid(
                "record observation count disagrees with its embedding",
            ));
        }
        cloud.points.push(SemanticPoint {
            position,
            embedding,
            observations,
        });
    }
    Ok(cloud)
}

pub fn load_cloud(path: impl AsRef<Path>) -> Result<SemanticPointCloud> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_cloud(&bytes)
}

/// Loads a cloud and checks it against the configured dimension.
pub fn load_cloud_with_dim(path: impl AsRef<Path>, dim: usize) -> Result<SemanticPointCloud> {
    let cloud = load_cloud(path)?;
    if cloud.dim != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: cloud.dim,
        });
    }
    Ok(cloud)
}

pub fn save_cloud(cloud: &SemanticPointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_cloud(cloud, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn encode_cloud(cloud: &SemanticPointCloud) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_cloud(cloud, &mut buf)?;
    Ok(buf)
}
