use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};
use crate::state::SpectralState;
use nalgebra::DVector;
use std::path::Path;

const MAGIC: &[u8; 8] = b"AIMLCHK1";

/// Header `magic, D (u64), time (f64), basis hash (64 ASCII bytes)` then `D` f64 values, little endian.
pub fn write_checkpoint<T: Real>(path: &Path, s: &SpectralState<T>, basis_hash: &str) -> Result<()> {
    let mut buf = Vec::with_capacity(88 + 8 * s.dim());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(s.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&s.time.to_le_bytes());
    let mut h = [b' '; 64];
    for (d, c) in h.iter_mut().zip(basis_hash.bytes()) {
        *d = c;
    }
    buf.extend_from_slice(&h);
    for v in s.coeffs.iter() {
        buf.extend_from_slice(&to_f64(*v).to_le_bytes());
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Reads a checkpoint, returning the state and the stored basis hash.
pub fn read_checkpoint<T: Real>(path: &Path) -> Result<(SpectralState<T>, String)> {
    let bytes = std::fs::read(path)?;
    let bad = |m: &str| Error::Format { path: path.display().to_string(), message: m.into() };
    if bytes.len() < 88 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let d = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let time = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let hash = String::from_utf8_lossy(&bytes[24..88]).trim_end().to_string();
    if bytes.len() != 88 + 8 * d {
        return Err(bad("length does not match D"));
    }
    let c = bytes[88..].chunks_exact(8).map(|b| lit::<T>(f64::from_le_bytes(b.try_into().unwrap())));
    Ok((SpectralState { coeffs: DVector::from_iterator(d, c), time }, hash))
}
