use std::fs;
use std::path::Path;

use bftcn_core::model::{ModelParameters, build_model};
use bftcn_core::window::NetworkConfig;
use serde::{Deserialize, Serialize};

use super::{FormatError, io_err};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"BFTC";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk precision of the parameter payload. Training always runs at 64
/// bits; 32-bit storage is an opt-in space saving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    F32,
}

/// JSON header embedded in a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: NetworkConfig,
    pub in_features: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Ordered class names the model was trained against.
    pub classes: Vec<String>,
    pub param_count: usize,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Layout: magic, version (u32 LE), header length (u32 LE), header JSON,
/// parameter tensors in canonical order (little-endian), then an FNV-1a64
/// checksum of the header and payload bytes.
pub fn write_checkpoint(
    path: &Path,
    model: &ModelParameters,
    classes: &[String],
    precision: Precision,
) -> Result<(), FormatError> {
    let header = CheckpointHeader {
        config: model.config,
        in_features: model.in_features,
        seed: model.seed,
        precision,
        classes: classes.to_vec(),
        param_count: model.param_count(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|source| FormatError::HeaderJson { path: path.into(), source })?;

    let mut payload = Vec::new();
    for tensor in model.tensors() {
        for &v in tensor {
            match precision {
                Precision::F64 => payload.extend_from_slice(&v.to_le_bytes()),
                Precision::F32 => payload.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }

    let mut bytes = Vec::with_capacity(16 + header_json.len() + payload.len());
    bytes.extend_from_slice(&CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    bytes.extend_from_slice(&payload);
    let mut checksum_input = header_json;
    checksum_input.extend_from_slice(&payload);
    bytes.extend_from_slice(&fnv1a64(&checksum_input).to_le_bytes());
    fs::write(path, bytes).map_err(io_err(path))
}

/// Read a checkpoint back into a model (always 64-bit in memory).
pub fn read_checkpoint(path: &Path) -> Result<(ModelParameters, CheckpointHeader), FormatError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 4 || bytes[..4] != CHECKPOINT_MAGIC {
        return Err(FormatError::BadMagic { path: path.into(), expected: "BFTC" });
    }
    if bytes.len() < 12 {
        return Err(FormatError::Truncated {
            path: path.into(),
            expected: 12,
            actual: bytes.len() as u64,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::UnsupportedVersion {
            path: path.into(),
            got: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12 + header_len;
    if bytes.len() < header_end {
        return Err(FormatError::Truncated {
            path: path.into(),
            expected: header_end as u64,
            actual: bytes.len() as u64,
        });
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[12..header_end])
        .map_err(|source| FormatError::HeaderJson { path: path.into(), source })?;

    let elem = match header.precision {
        Precision::F64 => 8,
        Precision::F32 => 4,
    };
    let expected_len = header_end as u64 + header.param_count as u64 * elem + 8;
    if bytes.len() as u64 != expected_len {
        return Err(FormatError::Truncated {
            path: path.into(),
            expected: expected_len,
            actual: bytes.len() as u64,
        });
    }
    let payload = &bytes[header_end..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    let mut checksum_input = bytes[12..header_end].to_vec();
    checksum_input.extend_from_slice(payload);
    let computed = fnv1a64(&checksum_input);
    if stored != computed {
        return Err(FormatError::ChecksumMismatch { path: path.into(), stored, computed });
    }

    let mut model = build_model(&header.config, header.in_features, header.seed)
        .map_err(|source| FormatError::BadConfig { path: path.into(), source })?;
    if model.param_count() != header.param_count {
        return Err(FormatError::ParamCountMismatch {
            path: path.into(),
            expected: header.param_count,
            actual: model.param_count(),
        });
    }
    let mut flat = Vec::with_capacity(header.param_count);
    match header.precision {
        Precision::F64 => {
            for chunk in payload.chunks_exact(8) {
                flat.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
        Precision::F32 => {
            for chunk in payload.chunks_exact(4) {
                flat.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
        }
    }
    model.load_flat(&flat);
    Ok((model, header))
}
