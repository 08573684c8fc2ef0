//! Feature file format: magic "CFIM", u32 height, u32 width, u8 kind tag,
//! then H*W little-endian 32-bit floats, row-major.
//!
//! The featurize stage always writes rendered images, so readers treat
//! file contents as normalized.

use super::{FeatureError, FeatureImage, FeatureKind};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"CFIM";

pub fn write_feature(path: impl AsRef<Path>, img: &FeatureImage) -> Result<(), FeatureError> {
    let mut out = Vec::with_capacity(13 + img.values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(img.rows as u32).to_le_bytes());
    out.extend_from_slice(&(img.cols as u32).to_le_bytes());
    out.push(img.kind.tag());
    for &v in &img.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut file = std::fs::File::create(path.as_ref())?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_feature(path: impl AsRef<Path>) -> Result<FeatureImage, FeatureError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    if bytes.len() < 13 {
        return Err(FeatureError::MalformedFile("header truncated".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(FeatureError::MalformedFile("bad magic".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let kind = FeatureKind::from_tag(bytes[12])
        .ok_or_else(|| FeatureError::MalformedFile(format!("unknown kind tag {}", bytes[12])))?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FeatureError::MalformedFile("image dimensions overflow".into()))?;
    let body = &bytes[13..];
    if body.len() != expected {
        return Err(FeatureError::MalformedFile(format!(
            "expected {} value bytes, found {}",
            expected,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok(FeatureImage {
        values,
        rows,
        cols,
        kind,
        normalized: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.cfim");
        let mut rng = crate::rng::SplitMix64::new(12);
        let img = FeatureImage {
            values: (0..24 * 18)
                .map(|_| f64::from(rng.uniform(0.0, 1.0) as f32))
                .collect(),
            rows: 24,
            cols: 18,
            kind: FeatureKind::Mfcc,
            normalized: true,
        };
        write_feature(&path, &img).unwrap();
        let back = read_feature(&path).unwrap();
        assert_eq!((back.rows, back.cols), (24, 18));
        assert_eq!(back.kind, FeatureKind::Mfcc);
        assert_eq!(back.values, img.values);
    }

    #[test]
    fn header_layout_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.cfim");
        let img = FeatureImage {
            values: vec![0.5, 1.0],
            rows: 1,
            cols: 2,
            kind: FeatureKind::LogMel,
            normalized: true,
        };
        write_feature(&path, &img).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"CFIM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(bytes[12], 0);
        assert_eq!(bytes.len(), 13 + 8);
        assert_eq!(
            f32::from_le_bytes(bytes[13..17].try_into().unwrap()),
            0.5f32
        );
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfim");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(
            read_feature(&path),
            Err(FeatureError::MalformedFile(_))
        ));

        std::fs::write(&path, b"CFIM\x01\x00\x00\x00\x02\x00\x00\x00\x00zz").unwrap();
        assert!(matches!(
            read_feature(&path),
            Err(FeatureError::MalformedFile(_))
        ));
    }
}
