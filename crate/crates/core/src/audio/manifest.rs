//! Corpus manifest: a UTF-8 CSV with header `path,subject_id,label,source`
//! describing every clip to ingest.

use super::{AudioError, Label};
use std::collections::HashSet;
use std::path::{Path, PathBuf};

/// One manifest row. `path` is kept as written; [`ClipRecord::resolve`]
/// joins relative paths against the manifest's own directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipRecord {
    pub path: String,
    pub subject_id: String,
    pub label: Label,
    pub source: String,
}

impl ClipRecord {
    pub fn resolve(&self, manifest_dir: &Path) -> PathBuf {
        let p = Path::new(&self.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_dir.join(p)
        }
    }
}

const COLUMNS: [&str; 4] = ["path", "subject_id", "label", "source"];

/// Load a manifest, preserving row order. Rows are numbered from 1
/// (header excluded) in error messages.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ClipRecord>, AudioError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;

    let headers = reader.headers()?.clone();
    let mut col_idx = [0usize; 4];
    for (i, name) in COLUMNS.iter().enumerate() {
        col_idx[i] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| AudioError::BadManifestHeader((*name).to_string()))?;
    }

    let mut records = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 1;
        let row = row?;
        let field = |col: usize| -> Result<&str, AudioError> {
            row.get(col_idx[col]).ok_or_else(|| AudioError::MissingColumn {
                row: row_number,
                column: COLUMNS[col].to_string(),
            })
        };
        let path = field(0)?.to_string();
        let subject_id = field(1)?.to_string();
        let label_tok = field(2)?;
        let label = Label::from_token(label_tok).ok_or_else(|| AudioError::UnknownLabel {
            row: row_number,
            token: label_tok.to_string(),
        })?;
        let source = field(3)?.to_string();
        if !seen.insert((subject_id.clone(), path.clone())) {
            return Err(AudioError::DuplicateRecord {
                row: row_number,
                subject: subject_id,
                path,
            });
        }
        records.push(ClipRecord {
            path,
            subject_id,
            label,
            source,
        });
    }
    Ok(records)
}

/// Write records in manifest schema, one row per record, order preserved.
pub fn write_manifest(path: impl AsRef<Path>, records: &[ClipRecord]) -> Result<(), AudioError> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(COLUMNS)?;
    for r in records {
        writer.write_record([
            r.path.as_str(),
            r.subject_id.as_str(),
            r.label.token(),
            r.source.as_str(),
        ])?;
    }
    writer.flush().map_err(std::io::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn well_formed_rows_load_in_order() {
        let (_dir, path) = write_tmp(
            "path,subject_id,label,source\n\
             a.wav,s1,cough_healthy,esc\n\
             b.wav,s2,cough_covid,coswara\n\
             c.wav,s3,non_cough,esc\n",
        );
        let records = load_manifest(&path).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].path, "a.wav");
        assert_eq!(records[1].label, Label::CovidCough);
        assert_eq!(records[2].subject_id, "s3");
    }

    #[test]
    fn unknown_label_names_the_row() {
        let (_dir, path) = write_tmp(
            "path,subject_id,label,source\n\
             a.wav,s1,cough_healthy,esc\n\
             b.wav,s2,xyz,esc\n",
        );
        match load_manifest(&path) {
            Err(AudioError::UnknownLabel { row, token }) => {
                assert_eq!(row, 2);
                assert_eq!(token, "xyz");
            }
            other => panic!("expected UnknownLabel, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_rejected() {
        let (_dir, path) = write_tmp("path,subject_id,label\na.wav,s1,cough_healthy\n");
        assert!(matches!(
            load_manifest(&path),
            Err(AudioError::BadManifestHeader(c)) if c == "source"
        ));
    }

    #[test]
    fn duplicate_subject_path_rejected() {
        let (_dir, path) = write_tmp(
            "path,subject_id,label,source\n\
             a.wav,s1,cough_healthy,esc\n\
             a.wav,s1,cough_healthy,esc\n",
        );
        assert!(matches!(
            load_manifest(&path),
            Err(AudioError::DuplicateRecord { row: 2, .. })
        ));
    }

    #[test]
    fn round_trip_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let records = vec![
            ClipRecord {
                path: "x/one.wav".into(),
                subject_id: "h001".into(),
                label: Label::HealthyCough,
                source: "synth".into(),
            },
            ClipRecord {
                path: "x/two.wav".into(),
                subject_id: "n001".into(),
                label: Label::NonCough,
                source: "synth".into(),
            },
        ];
        write_manifest(&path, &records).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), records);
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let rec = ClipRecord {
            path: "sub/clip.wav".into(),
            subject_id: "s".into(),
            label: Label::NonCough,
            source: "t".into(),
        };
        let resolved = rec.resolve(Path::new("/data/corpus"));
        assert_eq!(resolved, PathBuf::from("/data/corpus/sub/clip.wav"));
    }
}
