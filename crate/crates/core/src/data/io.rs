use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{AsTSRecord, Dataset};
use crate::{Error, Result};

/// Reads one record per non-blank line:
/// `{"id": "...", "observations": [[t, c, u], ...]}`.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let record: AsTSRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        record.validate().map_err(|e| parse_err(e.to_string()))?;
        records.push(record);
    }
    Ok(Dataset::new(records))
}

pub fn save_jsonl(path: impl AsRef<Path>, records: &[AsTSRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Triplet;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn one_record() {
        let f = write(r#"{"id":"s1","observations":[[0.0,1,1.5],[0.5,2,-0.2],[1.0,1,0.3]]}"#);
        let ds = load_jsonl(f.path()).unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.records[0].len(), 3);
        assert_eq!(ds.num_channels, 2);
        assert_eq!(ds.records[0].observations[1], Triplet::new(0.5, 2, -0.2));
    }

    #[test]
    fn empty_file() {
        let f = write("");
        assert!(load_jsonl(f.path()).unwrap().records.is_empty());
    }

    #[test]
    fn zero_channel_reports_line() {
        let f = write("{\"id\":\"a\",\"observations\":[[0.0,1,1.0]]}\n{\"id\":\"b\",\"observations\":[[0.0,0,1.0]]}\n");
        match load_jsonl(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_is_validation_failure() {
        let f = write(r#"{"id":"a","observations":[[0.0,1,1.0],[0.0,1,2.0]]}"#);
        let err = load_jsonl(f.path()).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
    }

    #[test]
    fn save_then_load() {
        let recs = vec![AsTSRecord::new("x", vec![Triplet::new(0.25, 3, 1.0 / 3.0)]).unwrap()];
        let f = tempfile::NamedTempFile::new().unwrap();
        save_jsonl(f.path(), &recs).unwrap();
        let ds = load_jsonl(f.path()).unwrap();
        assert_eq!(ds.records, recs);
        assert_eq!(ds.num_channels, 3);
    }
}
