//! Binary field files.
//!
//! Layout: magic `DIVF`, `u32` version 1, `u32` m, n, ndims, `u32` dims, then for each
//! cell in odometer order the `m × n` entries row-major as little-endian `f64`. Label
//! files share the header with magic `DIVL` and carry one byte per cell.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::laminator::{Field, Raster};

pub const FIELD_MAGIC: &[u8; 4] = b"DIVF";
pub const LABEL_MAGIC: &[u8; 4] = b"DIVL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub m: usize,
    pub n: usize,
    pub dims: Vec<usize>,
}

impl Header {
    pub fn cells(&self) -> usize {
        self.dims.iter().product()
    }
}

fn write_header(w: &mut impl Write, magic: &[u8; 4], h: &Header) -> Result<()> {
    w.write_all(magic)?;
    let mut words = vec![FORMAT_VERSION, h.m as u32, h.n as u32, h.dims.len() as u32];
    words.extend(h.dims.iter().map(|&d| d as u32));
    for x in words {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated file".into()),
        _ => Error::Io(e),
    })
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<Header> {
    let mut got = [0u8; 4];
    read_exact(r, &mut got)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let m = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    let ndims = read_u32(r)? as usize;
    if m == 0 || n == 0 || ndims == 0 || ndims > 16 {
        return Err(Error::Format(format!("bad shape m={m} n={n} ndims={ndims}")));
    }
    let dims = (0..ndims)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    if dims.contains(&0) {
        return Err(Error::Format(format!("zero grid extent in {dims:?}")));
    }
    Ok(Header { m, n, dims })
}

pub fn write_raster(w: &mut impl Write, raster: &Raster) -> Result<()> {
    let (m, n) = raster.shape();
    write_header(
        w,
        FIELD_MAGIC,
        &Header {
            m,
            n,
            dims: raster.dims().to_vec(),
        },
    )?;
    for x in raster.data() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_raster(r: &mut impl Read) -> Result<Raster> {
    let h = read_header(r, FIELD_MAGIC)?;
    let len = h
        .cells()
        .checked_mul(h.m * h.n)
        .ok_or_else(|| Error::Format("grid size overflows".into()))?;
    let mut bytes = Vec::new();
    r.take(len as u64 * 8).read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Format(format!(
            "truncated file: {} of {} data bytes",
            bytes.len(),
            len * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Raster::new(h.dims, h.m, h.n, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_labels(w: &mut impl Write, header: &Header, labels: &[u8]) -> Result<()> {
    if labels.len() != header.cells() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} cells",
            labels.len(),
            header.cells()
        )));
    }
    write_header(w, LABEL_MAGIC, header)?;
    w.write_all(labels)?;
    Ok(())
}

pub fn read_labels(r: &mut impl Read) -> Result<(Header, Vec<u8>)> {
    let h = read_header(r, LABEL_MAGIC)?;
    let mut labels = vec![0u8; h.cells()];
    read_exact(r, &mut labels)?;
    Ok((h, labels))
}

/// Writes the raster of `field` to `path`.
pub fn save_field(path: &Path, field: &Field) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_raster(&mut w, field.require_raster()?)?;
    w.flush()?;
    Ok(())
}

pub fn save_labels(path: &Path, field: &Field) -> Result<()> {
    let raster = field.require_raster()?;
    let labels = field
        .labels()
        .ok_or_else(|| Error::Precondition("field carries no labels".into()))?;
    let (m, n) = raster.shape();
    let header = Header {
        m,
        n,
        dims: raster.dims().to_vec(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    write_labels(&mut w, &header, labels)?;
    w.flush()?;
    Ok(())
}

/// Reads a field file, attaching labels from `labels` when given.
pub fn load_field(path: &Path, labels: Option<&Path>) -> Result<Field> {
    let raster = read_raster(&mut BufReader::new(File::open(path)?))?;
    let header = Header {
        m: raster.shape().0,
        n: raster.shape().1,
        dims: raster.dims().to_vec(),
    };
    let field = Field::from_raster(raster);
    match labels {
        None => Ok(field),
        Some(p) => {
            let (h, tags) = read_labels(&mut BufReader::new(File::open(p)?))?;
            if h != header {
                return Err(Error::Format("label header does not match the field".into()));
            }
            field.with_labels(tags)
        }
    }
}
