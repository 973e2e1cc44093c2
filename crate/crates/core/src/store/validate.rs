//! Round-trip validation: rebuild the long format from a partition and compare
//! it cell by cell with the harmonized source rows.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{encode_results, encode_samples, Partition, PartitionKey, CORE_RESULTS, CORE_SAMPLES, REST_RESULTS, REST_SAMPLES};
use crate::error::Result;
use crate::ingest::{FileManifestEntry, IngestContext, RowKeyer, RowOutcome, RowStream};
use crate::model::{AnalyticalResult, Sample, SampleId, SourceRef};

pub const MAX_REPORTED_MISMATCHES: usize = 1000;
pub const MAX_REPORTED_REMOVED: usize = 1000;

/// Column name used for whole-row mismatches.
pub const ROW_MARKER: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellMismatch {
    pub file: String,
    pub row: u64,
    pub column: String,
    pub source: Option<String>,
    pub stored: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub partition: String,
    pub source_files: Vec<String>,
    pub rows_compared: u64,
    pub cells_compared: u64,
    pub malformed_rows: u64,
    pub removed_duplicates: u64,
    /// First removed duplicate result ids, capped.
    pub removed_ids: Vec<String>,
    pub mismatch_count: u64,
    /// First mismatches, capped at [`MAX_REPORTED_MISMATCHES`].
    pub mismatches: Vec<CellMismatch>,
    /// Tables whose bytes no longer match the manifest checksum.
    pub checksum_failures: Vec<String>,
    /// Re-encoding the decoded tables reproduces the stored bytes.
    pub reexport_identical: bool,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.mismatch_count == 0 && self.checksum_failures.is_empty()
    }

    fn mismatch(&mut self, m: CellMismatch) {
        self.mismatch_count += 1;
        if self.mismatches.len() < MAX_REPORTED_MISMATCHES {
            self.mismatches.push(m);
        }
    }
}

fn reexport_identical(partition: &Partition, samples: &[Sample], results: &[AnalyticalResult]) -> Result<bool> {
    let (cs, rs) = encode_samples(samples);
    let (cr, rr) = encode_results(results);
    for (table, bytes) in [(CORE_SAMPLES, cs), (REST_SAMPLES, rs), (CORE_RESULTS, cr), (REST_RESULTS, rr)] {
        let on_disk = std::fs::read(partition.table_path(table)).map_err(|e| crate::error::Error::io(partition.table_path(table), e))?;
        if on_disk != bytes {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Compares one partition with its source files.
///
/// `samples` must hold every sample in the store, because a result may
/// reference a sample homed in another partition. Only columns present in a
/// source file are compared for that file's rows. Source rows removed as
/// duplicates are listed, malformed rows are counted, and stored rows that no
/// source row accounts for are reported as mismatches.
pub fn round_trip_validate(
    partition: &Partition,
    sources: &[FileManifestEntry],
    samples: &HashMap<SampleId, Sample>,
    ctx: &IngestContext,
) -> Result<ValidationReport> {
    let mut report = ValidationReport {
        partition: partition.key.to_string(),
        ..Default::default()
    };
    report.checksum_failures = partition.verify_checksums()?;
    let results = partition.read_results()?;
    let own_samples = partition.read_samples()?;
    report.reexport_identical = reexport_identical(partition, &own_samples, &results)?;

    let mut by_source: HashMap<SourceRef, usize> = HashMap::with_capacity(results.len());
    for (i, r) in results.iter().enumerate() {
        if let Some(s) = &r.source {
            by_source.insert(s.clone(), i);
        }
    }
    let stored_ids: HashSet<&str> = results.iter().map(|r| r.result_id.0.as_str()).collect();
    let mut matched = vec![false; results.len()];

    let mut files: Vec<&FileManifestEntry> = sources.iter().filter(|e| e.key() == partition.key).collect();
    files.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
    for entry in files {
        report.source_files.push(entry.rel_path.clone());
        let mapping = ctx.mapping_for(entry)?;
        let columns: Vec<String> = mapping.columns().into_iter().map(|(n, _)| n).collect();
        let mut keyer = RowKeyer::new(&mapping, &ctx.schema, &entry.country);
        let mut stream = RowStream::open(entry, &mapping)?;
        for outcome in stream.by_ref() {
            let row = match outcome? {
                RowOutcome::Row(r) => r,
                RowOutcome::Malformed { .. } => {
                    report.malformed_rows += 1;
                    continue;
                }
            };
            let key = SourceRef {
                file: entry.rel_path.clone(),
                row: row.row,
            };
            let Some(&idx) = by_source.get(&key) else {
                match keyer.split(row.cells) {
                    Err(_) => report.malformed_rows += 1,
                    Ok(split) if stored_ids.contains(split.result_id.0.as_str()) => {
                        report.removed_duplicates += 1;
                        if report.removed_ids.len() < MAX_REPORTED_REMOVED {
                            report.removed_ids.push(split.result_id.0);
                        }
                    }
                    Ok(_) => report.mismatch(CellMismatch {
                        file: key.file,
                        row: key.row,
                        column: ROW_MARKER.into(),
                        source: Some("row".into()),
                        stored: None,
                    }),
                }
                continue;
            };
            // keep the ordinal in step with ingest
            let _ = keyer.split(row.cells.clone());
            matched[idx] = true;
            report.rows_compared += 1;
            let stored = &results[idx];
            let sample = samples.get(&stored.sample_id);
            for col in &columns {
                report.cells_compared += 1;
                let found = stored
                    .cells
                    .get(col)
                    .or_else(|| sample.and_then(|s| s.cells.get(col)));
                let expected = row.cells.get(col);
                if found != expected {
                    report.mismatch(CellMismatch {
                        file: key.file.clone(),
                        row: key.row,
                        column: col.clone(),
                        source: expected.cloned(),
                        stored: found.cloned(),
                    });
                }
            }
        }
        stream.finish()?;
    }

    for (i, r) in results.iter().enumerate() {
        if !matched[i] {
            let (file, row) = r.source.as_ref().map(|s| (s.file.clone(), s.row)).unwrap_or_default();
            report.mismatch(CellMismatch {
                file,
                row,
                column: ROW_MARKER.into(),
                source: None,
                stored: Some(r.result_id.0.clone()),
            });
        }
    }
    Ok(report)
}

/// Per-partition validation over a whole store.
pub fn validate_store(
    store: &super::Store,
    sources: &[FileManifestEntry],
    ctx: &IngestContext,
) -> Result<BTreeMap<PartitionKey, ValidationReport>> {
    use rayon::prelude::*;
    let samples: HashMap<SampleId, Sample> = store.sample_index()?.into_iter().collect();
    let reports: Vec<Result<(PartitionKey, ValidationReport)>> = store
        .partitions
        .par_iter()
        .map(|p| Ok((p.key.clone(), round_trip_validate(p, sources, &samples, ctx)?)))
        .collect();
    reports.into_iter().collect()
}
