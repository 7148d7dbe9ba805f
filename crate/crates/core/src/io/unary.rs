use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::crf::UnaryField;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const UNARY_MAGIC: &[u8; 4] = b"DCU1";

/// Parse a unary container: magic, little-endian `u32` width, height and
/// label count, then `f32` costs with the label index varying fastest.
pub fn read_unary(mut reader: impl Read) -> Result<UnaryField> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<unary stream>", e))?;
    decode_unary(&bytes)
}

pub fn decode_unary(bytes: &[u8]) -> Result<UnaryField> {
    if bytes.len() < 4 || &bytes[..4] != UNARY_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < 16 {
        return Err(Error::SizeMismatch("header shorter than 16 bytes".into()));
    }
    let field = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (width, height, labels) = (field(0), field(1), field(2));
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(labels))
        .ok_or_else(|| Error::SizeMismatch("declared size overflows".into()))?;
    let payload = &bytes[16..];
    if Some(payload.len()) != count.checked_mul(4) {
        return Err(Error::SizeMismatch(format!(
            "header declares {width}x{height}x{labels} costs, payload holds {} bytes",
            payload.len()
        )));
    }
    let mut costs = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite("unary cost".into()));
        }
        costs.push(f64::from(v));
    }
    UnaryField::new(width, height, Matrix::from_vec(width * height, labels, costs)?)
}

/// Serialize as `f32`. Costs that do not fit an `f32` are rejected.
pub fn encode_unary(field: &UnaryField) -> Result<Vec<u8>> {
    let costs = field.costs().as_slice();
    let mut out = Vec::with_capacity(16 + 4 * costs.len());
    out.extend_from_slice(UNARY_MAGIC);
    for dim in [field.width(), field.height(), field.n_labels()] {
        let dim = u32::try_from(dim).map_err(|_| Error::SizeMismatch(format!("dimension {dim} exceeds u32")))?;
        out.extend_from_slice(&dim.to_le_bytes());
    }
    for &c in costs {
        let v = c as f32;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("unary cost {c} overflows f32")));
        }
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn write_unary(field: &UnaryField, mut writer: impl Write) -> Result<()> {
    writer
        .write_all(&encode_unary(field)?)
        .map_err(|e| Error::io("<unary stream>", e))
}

pub fn load_unary(path: impl AsRef<Path>) -> Result<UnaryField> {
    let path = path.as_ref();
    decode_unary(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_unary(field: &UnaryField, path: impl AsRef<Path>) -> Result<()> {
    super::image::write_file(path.as_ref(), &encode_unary(field)?)
}
