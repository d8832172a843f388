//! Little-endian binary state files.
//!
//! Layout: magic `CPEPS1`, then `u32` schema, `N_x`, `N_t`, `n_max`, aux
//! sector dimension, a `u64` physical dimension, and that many complex64
//! amplitudes (`f32` real, `f32` imaginary) in canonical occupation order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{checked_pow, Error, Result};
use crate::fock::PhysicalState;
use crate::linalg::C64;
use crate::model::SCHEMA_VERSION;

pub const MAGIC: &[u8; 6] = b"CPEPS1";
const HEADER_LEN: usize = 6 + 5 * 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct StateFile {
    pub state: PhysicalState,
    pub aux_dim: usize,
}

pub fn encode(sf: &StateFile) -> Vec<u8> {
    let s = &sf.state;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * s.amplitudes.len());
    out.extend_from_slice(MAGIC);
    for v in [
        SCHEMA_VERSION,
        s.n_x as u32,
        s.n_t as u32,
        s.n_max as u32,
        sf.aux_dim as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(s.amplitudes.len() as u64).to_le_bytes());
    for a in &s.amplitudes {
        out.extend_from_slice(&(a.re as f32).to_le_bytes());
        out.extend_from_slice(&(a.im as f32).to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().expect("4 bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<StateFile> {
    if bytes.len() < HEADER_LEN || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing CPEPS1 header".into()));
    }
    let schema = u32_at(bytes, 6);
    if schema != SCHEMA_VERSION {
        return Err(Error::Format(format!("schema {schema} is not supported")));
    }
    let (n_x, n_t, n_max, aux) = (
        u32_at(bytes, 10) as usize,
        u32_at(bytes, 14) as usize,
        u32_at(bytes, 18) as usize,
        u32_at(bytes, 22) as usize,
    );
    let dim = u64::from_le_bytes(bytes[26..34].try_into().expect("8 bytes")) as usize;
    if n_x == 0 || n_max == 0 {
        return Err(Error::Format("lattice sizes must be positive".into()));
    }
    if checked_pow(n_max as u128 + 1, n_x * n_t) != dim as u128 {
        return Err(Error::Format(format!(
            "dimension {dim} does not match (n_max+1)^(N_x·N_t)"
        )));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != dim * 8 {
        return Err(Error::Format(format!(
            "expected {} amplitude bytes, found {}",
            dim * 8,
            body.len()
        )));
    }
    let amplitudes = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().expect("4 bytes"));
            let im = f32::from_le_bytes(c[4..].try_into().expect("4 bytes"));
            C64::new(re as f64, im as f64)
        })
        .collect();
    Ok(StateFile {
        state: PhysicalState {
            n_x,
            n_t,
            n_max,
            amplitudes,
        },
        aux_dim: aux,
    })
}

pub fn read(path: &Path) -> Result<StateFile> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn sample() -> StateFile {
        StateFile {
            state: PhysicalState {
                n_x: 2,
                n_t: 2,
                n_max: 1,
                amplitudes: (0..16).map(|k| c(k as f64 * 0.25, -(k as f64) * 0.5)).collect(),
            },
            aux_dim: 4,
        }
    }

    #[test]
    fn round_trip() {
        let sf = sample();
        let bytes = encode(&sf);
        assert_eq!(bytes.len(), HEADER_LEN + 16 * 8);
        assert_eq!(&bytes[..6], b"CPEPS1");
        assert_eq!(decode(&bytes).unwrap(), sf);
    }

    #[test]
    fn header_fields_are_little_endian() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[6..10], &[1, 0, 0, 0]);
        assert_eq!(&bytes[10..14], &[2, 0, 0, 0]);
        assert_eq!(&bytes[26..34], &[16, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn corruption_is_rejected() {
        let bytes = encode(&sample());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
        let mut wrong_dim = bytes.clone();
        wrong_dim[26] = 15;
        assert!(decode(&wrong_dim).is_err());
        let mut schema = bytes;
        schema[6] = 9;
        assert!(decode(&schema).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        write_atomic(&p, b"old").unwrap();
        write_atomic(&p, &encode(&sample())).unwrap();
        assert_eq!(read(&p).unwrap(), sample());
    }
}
