//! Binary model checkpoints.
//!
//! Layout: the 8-byte magic `CSISHLD1`, a little-endian `u64` header length,
//! a JSON header, then every parameter as little-endian `f64` in the order of
//! the header's shape table.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use super::train::TrainConfig;
use super::RaganError;
use crate::nn::Parameters;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CSISHLD1";
pub const CHECKPOINT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: String,
    seed: u64,
    train_config: Option<TrainConfig>,
    generator: GeneratorConfig,
    discriminator: Option<DiscriminatorConfig>,
    shapes: Vec<ShapeEntry>,
    /// Lowercase hex SHA-256 of the payload.
    checksum: String,
    payload_len: u64,
}

/// Everything needed to rebuild trained models.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub train_config: Option<TrainConfig>,
    pub generator: Generator,
    pub discriminator: Option<Discriminator>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn named_params(ckpt: &Checkpoint) -> Vec<(String, &crate::nn::Param)> {
    let mut v: Vec<_> = ckpt.generator.named_params().into_iter().map(|(n, p)| (format!("generator.{n}"), p)).collect();
    if let Some(d) = &ckpt.discriminator {
        v.extend(d.named_params().into_iter().map(|(n, p)| (format!("discriminator.{n}"), p)));
    }
    v
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let params = named_params(self);
        let mut payload = Vec::new();
        for (_, p) in &params {
            for v in p.value.iter() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = Header {
            version: CHECKPOINT_VERSION.to_string(),
            seed: self.seed,
            train_config: self.train_config,
            generator: self.generator.config,
            discriminator: self.discriminator.as_ref().map(|d| d.config),
            shapes: params.iter().map(|(n, p)| ShapeEntry { name: n.clone(), shape: p.shape() }).collect(),
            checksum: hex(&Sha256::digest(&payload)),
            payload_len: payload.len() as u64,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + payload.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RaganError> {
        let corrupt = |m: &str| RaganError::CorruptPayload(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(corrupt("missing CSISHLD1 magic"));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let header_end =
            16usize.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or_else(|| corrupt("truncated header"))?;
        let raw: serde_json::Value = serde_json::from_slice(&bytes[16..header_end])
            .map_err(|e| RaganError::CorruptPayload(format!("header: {e}")))?;
        let version = raw.get("version").and_then(|v| v.as_str()).unwrap_or("");
        if version != CHECKPOINT_VERSION {
            return Err(RaganError::VersionMismatch {
                found: version.to_string(),
                expected: CHECKPOINT_VERSION.to_string(),
            });
        }
        let header: Header =
            serde_json::from_value(raw).map_err(|e| RaganError::CorruptPayload(format!("header: {e}")))?;
        let payload = &bytes[header_end..];
        if payload.len() as u64 != header.payload_len {
            return Err(RaganError::CorruptPayload(format!(
                "payload is {} bytes, header says {}",
                payload.len(),
                header.payload_len
            )));
        }
        if hex(&Sha256::digest(payload)) != header.checksum {
            return Err(corrupt("payload checksum mismatch"));
        }

        let mut ckpt = Checkpoint {
            seed: header.seed,
            train_config: header.train_config,
            generator: Generator::zeros(header.generator),
            discriminator: header.discriminator.map(Discriminator::zeros),
        };
        let expected: Vec<ShapeEntry> =
            named_params(&ckpt).iter().map(|(n, p)| ShapeEntry { name: n.clone(), shape: p.shape() }).collect();
        if expected != header.shapes {
            return Err(corrupt("shape table does not match the model configuration"));
        }
        let total: usize = expected.iter().map(|e| e.shape[0] * e.shape[1]).sum();
        if total * 8 != payload.len() {
            return Err(corrupt("payload length does not match the shape table"));
        }
        let values: Vec<f64> =
            payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let g_len = ckpt.generator.num_params();
        ckpt.generator.set_flat_values(&values[..g_len]);
        if let Some(d) = &mut ckpt.discriminator {
            d.set_flat_values(&values[g_len..]);
        }
        Ok(ckpt)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), RaganError> {
    std::fs::write(path, ckpt.to_bytes()).map_err(|source| RaganError::Io { path: path.to_path_buf(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, RaganError> {
    let bytes = std::fs::read(path).map_err(|source| RaganError::Io { path: path.to_path_buf(), source })?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::SeededRng;
    use ndarray::Array3;

    fn sample() -> Checkpoint {
        let mut r = SeededRng::new(5);
        let gc = GeneratorConfig { features: 6, hidden: 3, ..Default::default() };
        let dc = DiscriminatorConfig { features: 6, hidden: 3, ..Default::default() };
        Checkpoint {
            seed: 5,
            train_config: Some(TrainConfig { hidden: 3, ..Default::default() }),
            generator: Generator::new(gc, &mut r),
            discriminator: Some(Discriminator::new(dc, &mut r)),
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        let x = Array3::from_shape_fn((1, 4, 6), |(_, t, k)| (t * 6 + k) as f64 / 24.0);
        assert_eq!(back.generator.predict(&x).unwrap(), c.generator.predict(&x).unwrap());
    }

    #[test]
    fn generator_only() {
        let c = Checkpoint { discriminator: None, ..sample() };
        assert_eq!(Checkpoint::from_bytes(&c.to_bytes()).unwrap(), c);
    }

    #[test]
    fn truncated_is_corrupt() {
        let bytes = sample().to_bytes();
        for cut in [bytes.len() - 1, bytes.len() - 100, 20, 10] {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(RaganError::CorruptPayload(_))), "cut {cut}");
        }
    }

    #[test]
    fn flipped_byte_is_corrupt() {
        let mut bytes = sample().to_bytes();
        let last = bytes.len() - 3;
        bytes[last] ^= 0x40;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(RaganError::CorruptPayload(_))));
    }

    #[test]
    fn newer_version_is_rejected() {
        let bytes = sample().to_bytes();
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header =
            String::from_utf8(bytes[16..16 + len].to_vec()).unwrap().replace("\"version\":\"1\"", "\"version\":\"2\"");
        let mut out = CHECKPOINT_MAGIC.to_vec();
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&bytes[16 + len..]);
        match Checkpoint::from_bytes(&out) {
            Err(RaganError::VersionMismatch { found, expected }) => {
                assert_eq!(found, "2");
                assert_eq!(expected, "1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&sample(), &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), sample());
        assert!(matches!(load_checkpoint(&dir.path().join("missing")), Err(RaganError::Io { .. })));
    }
}
