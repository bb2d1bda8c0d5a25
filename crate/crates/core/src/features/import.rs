//! Externally computed descriptors.
//!
//! Little-endian layout: `magic:u32 = 0x53464D46`, `version:u32 = 1`,
//! `rows:u64`, `dim:u32`, then `rows × dim` `f32` values, row-major.

use std::path::Path;

use super::{DescriptorSource, DescriptorTable, FeatureError, SuperpointSet};

pub const FEATURE_MAGIC: u32 = 0x5346_4D46;
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4;

fn io_err(path: &Path, source: std::io::Error) -> FeatureError {
    FeatureError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Load one descriptor per superpoint; rows are L2-normalized on load.
pub fn import_features(path: impl AsRef<Path>, sp: &SuperpointSet) -> Result<DescriptorTable, FeatureError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(FeatureError::BadHeader("file shorter than header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let magic = u32_at(0);
    if magic != FEATURE_MAGIC {
        return Err(FeatureError::BadHeader(format!("magic {magic:#010x}")));
    }
    let version = u32_at(4);
    if version != FEATURE_VERSION {
        return Err(FeatureError::BadHeader(format!("version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let dim = u32_at(16) as usize;
    if dim == 0 {
        return Err(FeatureError::DimensionMismatch("descriptor dimension is zero".into()));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| FeatureError::DimensionMismatch("header sizes overflow".into()))?;
    if payload.len() != expected {
        return Err(FeatureError::DimensionMismatch(format!(
            "header promises {rows}×{dim} floats ({expected} bytes) but payload has {} bytes",
            payload.len()
        )));
    }
    if rows != sp.len() {
        return Err(FeatureError::RowCountMismatch { expected: sp.len(), found: rows });
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    let rows: Vec<Vec<f64>> = values.chunks(dim).map(<[f64]>::to_vec).collect();
    DescriptorTable::from_rows(rows, DescriptorSource::Imported)
}

/// Write rows in the import layout (values are narrowed to `f32`).
pub fn export_features(path: impl AsRef<Path>, rows: &[Vec<f32>]) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(FeatureError::DimensionMismatch("rows differ in length".into()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + rows.len() * dim * 4);
    out.extend_from_slice(&FEATURE_MAGIC.to_le_bytes());
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for v in rows.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(n: usize) -> SuperpointSet {
        SuperpointSet { indices: (0..n).collect(), radius: 0.15 }
    }

    #[test]
    fn loads_and_normalizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let rows: Vec<Vec<f32>> = (0..4).map(|i| (0..32).map(|j| (i * 32 + j) as f32 * 0.5 + 1.0).collect()).collect();
        export_features(&path, &rows).unwrap();
        let t = import_features(&path, &sp(4)).unwrap();
        assert_eq!((t.len(), t.dim), (4, 32));
        assert_eq!(t.source, DescriptorSource::Imported);
        for i in 0..4 {
            let n: f64 = t.row(i).iter().map(|x| x * x).sum();
            assert!((n.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn row_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        export_features(&path, &vec![vec![1.0f32; 32]; 3]).unwrap();
        assert!(matches!(
            import_features(&path, &sp(4)),
            Err(FeatureError::RowCountMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn truncated_payload_is_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        export_features(&path, &vec![vec![1.0f32; 8]; 2]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(import_features(&path, &sp(2)), Err(FeatureError::DimensionMismatch(_))));
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        std::fs::write(&path, [0u8; 32]).unwrap();
        assert!(matches!(import_features(&path, &sp(1)), Err(FeatureError::BadHeader(_))));
    }
}
