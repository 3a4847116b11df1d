use std::fs;
use std::path::Path;

use bftcn_core::ChannelTimeMatrix;

use super::{FormatError, io_err};

pub const FEATURE_MAGIC: [u8; 4] = *b"BFTF";
pub const FEATURE_VERSION: u32 = 1;

const HEADER_LEN: u64 = 4 + 4 + 8 + 8;

/// Write a feature sequence: magic, version, `T`, `N_f`, then frame-major
/// little-endian `f32` values.
pub fn write_features(path: &Path, features: &ChannelTimeMatrix) -> Result<(), FormatError> {
    let t = features.n_frames() as u64;
    let n_f = features.n_channels() as u64;
    let mut bytes = Vec::with_capacity((HEADER_LEN + t * n_f * 4) as usize);
    bytes.extend_from_slice(&FEATURE_MAGIC);
    bytes.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    bytes.extend_from_slice(&t.to_le_bytes());
    bytes.extend_from_slice(&n_f.to_le_bytes());
    for &v in features.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Read a feature file back into a 64-bit matrix.
pub fn read_features(path: &Path) -> Result<ChannelTimeMatrix, FormatError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 4 || bytes[..4] != FEATURE_MAGIC {
        return Err(FormatError::BadMagic { path: path.into(), expected: "BFTF" });
    }
    if bytes.len() < HEADER_LEN as usize {
        return Err(FormatError::Truncated {
            path: path.into(),
            expected: HEADER_LEN,
            actual: bytes.len() as u64,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FEATURE_VERSION {
        return Err(FormatError::UnsupportedVersion {
            path: path.into(),
            got: version,
            supported: FEATURE_VERSION,
        });
    }
    let t = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let n_f = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if t == 0 || n_f == 0 {
        return Err(FormatError::BadDims { path: path.into() });
    }
    let expected = HEADER_LEN + t * n_f * 4;
    if bytes.len() as u64 != expected {
        return Err(FormatError::Truncated {
            path: path.into(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let mut m = ChannelTimeMatrix::zeros(n_f as usize, t as usize);
    let payload = &bytes[HEADER_LEN as usize..];
    for (i, v) in m.data_mut().iter_mut().enumerate() {
        let chunk: [u8; 4] = payload[i * 4..i * 4 + 4].try_into().unwrap();
        *v = f32::from_le_bytes(chunk) as f64;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_lossless_at_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bftf");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // f32-representable values round-trip exactly.
        let m = ChannelTimeMatrix::from_fn(3, 7, |_, _| rng.random::<f32>() as f64);
        write_features(&path, &m).unwrap();
        let back = read_features(&path).unwrap();
        assert_eq!(back.n_channels(), 3);
        assert_eq!(back.n_frames(), 7);
        assert_eq!(back.data(), m.data());
    }

    #[test]
    fn minimal_file_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.bftf");
        let m = ChannelTimeMatrix::from_channel_rows(&[&[0.5]]);
        write_features(&path, &m).unwrap();
        let back = read_features(&path).unwrap();
        assert_eq!((back.n_channels(), back.n_frames()), (1, 1));
    }

    #[test]
    fn truncation_names_expected_and_actual() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.bftf");
        let m = ChannelTimeMatrix::zeros(2, 5);
        write_features(&path, &m).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 3]).unwrap();
        match read_features(&path).unwrap_err() {
            FormatError::Truncated { expected, actual, .. } => {
                assert_eq!(expected, 24 + 2 * 5 * 4);
                assert_eq!(actual, expected - 3);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn bad_magic_and_version_are_distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bftf");
        std::fs::write(&path, b"NOPE12345678901234567890").unwrap();
        assert!(matches!(read_features(&path).unwrap_err(), FormatError::BadMagic { .. }));

        let m = ChannelTimeMatrix::zeros(1, 1);
        write_features(&path, &m).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 99;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_features(&path).unwrap_err(),
            FormatError::UnsupportedVersion { got: 99, .. }
        ));
    }
}
