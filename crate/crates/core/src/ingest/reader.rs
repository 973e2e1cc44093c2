use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::sync::{Arc, Mutex};

use flate2::read::MultiGzDecoder;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::normalize_cell;

use super::columns::ColumnMapping;
use super::discover::FileManifestEntry;

/// Reader that feeds every byte it passes through into a shared digest.
struct HashingReader<R> {
    inner: R,
    digest: Arc<Mutex<Sha256>>,
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.digest.lock().expect("digest lock").update(&buf[..n]);
        Ok(n)
    }
}

/// One harmonized long-format row: non-absent cells keyed by canonical
/// variable (or source name for unmapped columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarmonizedRow {
    /// 1-based data record number (the header is record 0).
    pub row: u64,
    pub cells: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowOutcome {
    Row(HarmonizedRow),
    Malformed { row: u64, reason: String },
}

/// Streams the records of one input file through a column mapping.
pub struct RowStream {
    records: csv::StringRecordsIntoIter<Box<dyn Read + Send>>,
    columns: Vec<(String, usize)>,
    width: usize,
    row: u64,
    digest: Arc<Mutex<Sha256>>,
    entry_path: std::path::PathBuf,
}

fn open_raw(entry: &FileManifestEntry, digest: Arc<Mutex<Sha256>>) -> Result<Box<dyn Read + Send>> {
    let file = File::open(&entry.path).map_err(|e| Error::io(&entry.path, e))?;
    let hashing = HashingReader {
        inner: BufReader::with_capacity(1 << 16, file),
        digest,
    };
    Ok(if entry.is_gzip() {
        Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(hashing)))
    } else {
        Box::new(hashing)
    })
}

/// Reads only the header row of a file.
pub fn read_header(entry: &FileManifestEntry) -> Result<Vec<String>> {
    let raw = open_raw(entry, Arc::new(Mutex::new(Sha256::new())))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(raw);
    let header = rdr.headers().map_err(|e| Error::csv(&entry.path, e))?;
    Ok(header.iter().map(str::to_string).collect())
}

impl RowStream {
    pub fn open(entry: &FileManifestEntry, mapping: &ColumnMapping) -> Result<Self> {
        let digest = Arc::new(Mutex::new(Sha256::new()));
        let raw = open_raw(entry, digest.clone())?;
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(raw);
        let width = rdr.headers().map_err(|e| Error::csv(&entry.path, e))?.len();
        if width != mapping.width {
            return Err(Error::MalformedFile {
                path: entry.path.clone(),
                reason: format!("header has {width} columns, mapping expects {}", mapping.width),
            });
        }
        Ok(RowStream {
            records: rdr.into_records(),
            columns: mapping.columns(),
            width,
            row: 0,
            digest,
            entry_path: entry.path.clone(),
        })
    }

    /// Consumes the rest of the file and returns the SHA-256 of its bytes as
    /// stored on disk.
    pub fn finish(self) -> Result<String> {
        let RowStream { records, digest, entry_path, .. } = self;
        let mut reader = records.into_reader().into_inner();
        std::io::copy(&mut reader, &mut std::io::sink()).map_err(|e| Error::io(&entry_path, e))?;
        drop(reader);
        let digest = Arc::try_unwrap(digest)
            .map(|m| m.into_inner().expect("digest lock"))
            .unwrap_or_else(|shared| shared.lock().expect("digest lock").clone());
        Ok(hex::encode(digest.finalize()))
    }
}

impl Iterator for RowStream {
    type Item = Result<RowOutcome>;

    fn next(&mut self) -> Option<Self::Item> {
        let record = self.records.next()?;
        self.row += 1;
        let row = self.row;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                if let csv::ErrorKind::Io(_) = e.kind() {
                    return Some(Err(Error::csv(&self.entry_path, e)));
                }
                return Some(Ok(RowOutcome::Malformed {
                    row,
                    reason: e.to_string(),
                }));
            }
        };
        if record.len() != self.width {
            return Some(Ok(RowOutcome::Malformed {
                row,
                reason: format!("record has {} fields, header has {}", record.len(), self.width),
            }));
        }
        let mut cells = BTreeMap::new();
        for (name, idx) in &self.columns {
            if let Some(v) = record.get(*idx).and_then(normalize_cell) {
                cells.insert(name.clone(), v.to_string());
            }
        }
        Some(Ok(RowOutcome::Row(HarmonizedRow { row, cells })))
    }
}
