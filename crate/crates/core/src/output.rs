//! Result files: CSV metadata trailers and the binary vector sidecar.
//!
//! Sidecar layout, all little-endian: the four bytes `FQED`, a `u32`
//! format version, a `u64` dimension, then `dimension` `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SIDECAR_MAGIC: &[u8; 4] = b"FQED";
pub const SIDECAR_VERSION: u32 = 1;

/// Crate version recorded in every output file.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance of a run, appended to CSV outputs as `#` comment lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMetadata {
    pub config_sha256: String,
    pub version: String,
}

impl RunMetadata {
    pub fn for_config(config_text: &str) -> Self {
        Self {
            config_sha256: sha256_hex(config_text.as_bytes()),
            version: ARTIFACT_VERSION.to_string(),
        }
    }

    pub fn trailer(&self) -> String {
        format!(
            "# config_sha256={}\n# artifact=fiberqed {}\n",
            self.config_sha256, self.version
        )
    }
}

/// Shortest round-trip formatting of a float in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

pub fn encode_sidecar(v: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * v.len());
    out.extend_from_slice(SIDECAR_MAGIC);
    out.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_sidecar(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() < 16 || &bytes[..4] != SIDECAR_MAGIC {
        return Err(Error::Io("not an FQED sidecar".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != SIDECAR_VERSION {
        return Err(Error::Io(format!("unsupported sidecar version {version}")));
    }
    let dim = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() != 8 * dim {
        return Err(Error::Io(format!(
            "sidecar declares {dim} values but holds {} bytes",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn write_sidecar(path: &Path, v: &[f64]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_sidecar(v))?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_sidecar(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_layout() {
        let bytes = encode_sidecar(&[1.0, -0.5]);
        assert_eq!(&bytes[..4], b"FQED");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 32);
        assert_eq!(decode_sidecar(&bytes).unwrap(), vec![1.0, -0.5]);
        assert!(decode_sidecar(&bytes[..31]).is_err());
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -3.25e-17, 1.0 / 3.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
