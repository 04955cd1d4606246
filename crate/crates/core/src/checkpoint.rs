//! Binary checkpoint encoding.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "TBPR"  version:u8  kind:u8  M N F K D : u64
//! β        N      f64
//! P        F×M    f64, row-major (factor-major)
//! Q        F×N    f64, row-major
//! θ        K×M    f64            (Diff)
//! H        K×D    f64            (Diff, Shared)
//! β′       D      f64            (Diff, Shared)
//! counts   N      f64            (Pop)
//! |S_u|    M      f64            (Shared)
//! s_u      D×M    f64            (Shared)
//! checksum u64    first 8 bytes of SHA-256 over everything above
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::CheckpointError;
use crate::model::{Dims, Matrix, ModelKind, Params, UserTextPrior};

pub const MAGIC: &[u8; 4] = b"TBPR";
pub const FORMAT_VERSION: u8 = 1;

fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn put_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Writes an entity-major matrix (one row per user/item) in factor-major
/// order.
fn put_transposed(out: &mut Vec<u8>, m: &Matrix) {
    for c in 0..m.cols() {
        put_f64s(out, (0..m.rows()).map(|r| m.get(r, c)));
    }
}

/// Serializes `params` into the checkpoint byte layout.
pub fn encode(params: &Params) -> Vec<u8> {
    let dims = params.dims();
    let (m, n) = (params.user_count(), params.item_count());
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.push(params.kind().to_byte());
    for v in [m, n, dims.latent, dims.text, dims.feature] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    put_f64s(&mut out, params.item_bias.iter().copied());
    put_transposed(&mut out, &params.user_latent);
    put_transposed(&mut out, &params.item_latent);
    if let Some(theta) = &params.user_text {
        put_transposed(&mut out, theta);
    }
    if let Some(h) = &params.kernel {
        put_f64s(&mut out, h.as_slice().iter().copied());
    }
    if let Some(b) = &params.text_bias {
        put_f64s(&mut out, b.iter().copied());
    }
    if let Some(counts) = &params.popularity {
        put_f64s(&mut out, counts.iter().map(|&c| c as f64));
    }
    if let Some(prior) = &params.text_prior {
        put_f64s(&mut out, prior.sizes.iter().map(|&c| c as f64));
        put_transposed(&mut out, &prior.sums);
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(len).ok_or(CheckpointError::Truncated { needed: len })?;
        if end > self.bytes.len() {
            return Err(CheckpointError::Truncated {
                needed: end - self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>, CheckpointError> {
        let len = count.checked_mul(8).ok_or(CheckpointError::Truncated { needed: usize::MAX })?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    /// Reads a factor-major block back into an entity-major matrix.
    fn transposed(&mut self, factors: usize, entities: usize) -> Result<Matrix, CheckpointError> {
        let raw = self.f64s(factors.checked_mul(entities).ok_or(CheckpointError::Truncated {
            needed: usize::MAX,
        })?)?;
        let mut m = Matrix::zeros(entities, factors);
        for c in 0..factors {
            for r in 0..entities {
                m.row_mut(r)[c] = raw[c * entities + r];
            }
        }
        Ok(m)
    }

    fn counts(&mut self, len: usize) -> Result<Vec<u64>, CheckpointError> {
        self.f64s(len)?
            .into_iter()
            .map(|v| {
                if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
                    Ok(v as u64)
                } else {
                    Err(CheckpointError::Invalid(format!("count {v} is not a whole number")))
                }
            })
            .collect()
    }
}

/// Parses and verifies a checkpoint.
pub fn decode(bytes: &[u8]) -> Result<Params, CheckpointError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut r = Reader { bytes, pos: MAGIC.len() };
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let kind_byte = r.u8()?;
    let kind = ModelKind::from_byte(kind_byte).ok_or(CheckpointError::UnknownKind(kind_byte))?;
    let mut header = [0usize; 5];
    for h in header.iter_mut() {
        *h = usize::try_from(r.u64()?)
            .map_err(|_| CheckpointError::Invalid("dimension does not fit in memory".into()))?;
    }
    let [m, n, f, k, d] = header;
    let dims = Dims::new(f, k, d);
    dims.validate(kind)
        .map_err(|e| CheckpointError::Invalid(e.to_string()))?;

    let mut params = Params::zeros(kind, dims, m, n);
    params.item_bias = r.f64s(n)?;
    params.user_latent = r.transposed(f, m)?;
    params.item_latent = r.transposed(f, n)?;
    if kind == ModelKind::Diff {
        params.user_text = Some(r.transposed(k, m)?);
    }
    if kind.uses_text() {
        params.kernel = Some(Matrix::from_vec(k, d, r.f64s(k * d)?));
        params.text_bias = Some(r.f64s(d)?);
    }
    if kind == ModelKind::Pop {
        params.popularity = Some(r.counts(n)?);
    }
    if kind == ModelKind::Shared {
        let sizes = r.counts(m)?;
        let sums = r.transposed(d, m)?;
        params.text_prior = Some(UserTextPrior { sums, sizes });
    }

    let body_end = r.pos;
    let stored = r.u64()?;
    let computed = checksum(&bytes[..body_end]);
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    if stored != computed {
        return Err(CheckpointError::ChecksumMismatch { stored, computed });
    }
    Ok(params)
}

/// Writes a checkpoint to `path`.
pub fn save_model(params: &Params, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    fs::write(path, encode(params))?;
    Ok(())
}

/// Reads and verifies a checkpoint from `path`.
pub fn load_model(path: impl AsRef<Path>) -> Result<Params, CheckpointError> {
    decode(&fs::read(path)?)
}
