//! Corpus ingest: discovered files to a committed store.
//!
//! Headers are resolved up front so schema conflicts abort before anything is
//! written. Partitions are processed in parallel; files inside a partition are
//! parsed in parallel and merged in path order, so the output never depends on
//! scheduling. Samples are merged across partitions sequentially in key order:
//! a sample lives in the first partition that reports it.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ingest_file, ColumnMapping, Diagnostic, FileBatch, FileManifestEntry, IngestContext, IngestStats, Manifest, SkippedFile};
use crate::model::{Sample, SampleId};
use crate::store::writer::{PartitionWriter, StoreIndex};
use crate::store::{PartitionKey, SourceFileRecord, INGEST_STATS, STORE_INDEX};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    /// Replace an existing store at the target root.
    pub overwrite: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { jobs: 0, overwrite: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub rel_path: String,
    pub partition: String,
    pub sha256: String,
    pub stats: IngestStats,
    pub diagnostics: Vec<Diagnostic>,
    pub diagnostics_dropped: u64,
    pub unmapped_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub store_checksum: String,
    pub partitions: u64,
    pub totals: IngestStats,
    pub files: Vec<FileReport>,
    pub skipped: Vec<SkippedFile>,
}

impl IngestReport {
    pub fn all_conserved(&self) -> bool {
        self.files.iter().all(|f| f.stats.is_conserved()) && self.totals.is_conserved()
    }
}

struct PartitionStage {
    writer: PartitionWriter,
    batches: Vec<FileBatch>,
}

/// Runs `f` on a pool of `jobs` threads (0 = rayon default).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn first_error<T>(items: Vec<Result<T>>) -> Result<Vec<T>> {
    items.into_iter().collect()
}

fn prepare_root(root: &Path, overwrite: bool) -> Result<()> {
    if root.exists() {
        let mut entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
        let non_empty = entries.next().is_some();
        if non_empty {
            if !overwrite {
                return Err(Error::StoreExists(root.to_path_buf()));
            }
            if !root.join(STORE_INDEX).is_file() {
                return Err(Error::InvalidConfig(format!(
                    "refusing to overwrite {}: not empty and not a store",
                    root.display()
                )));
            }
            std::fs::remove_dir_all(root).map_err(|e| Error::io(root, e))?;
        }
    }
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))
}

fn process_partition(
    root: &Path,
    key: PartitionKey,
    files: Vec<(&FileManifestEntry, &ColumnMapping)>,
    ctx: &IngestContext,
) -> Result<PartitionStage> {
    let parsed: Vec<Result<FileBatch>> = files
        .par_iter()
        .map(|(entry, mapping)| ingest_file(entry, mapping, ctx))
        .collect();
    let mut batches = first_error(parsed)?;

    let mut filter = crate::ingest::Deduplicator::new();
    let mut results = Vec::new();
    for batch in &mut batches {
        let before = filter.removed();
        let mut kept = 0u64;
        for r in std::mem::take(&mut batch.results) {
            if filter.admit(&r.result_id) {
                kept += 1;
                results.push(r);
            }
        }
        batch.stats.duplicates_removed = filter.removed() - before;
        batch.stats.results_emitted = kept;
    }
    drop(filter);
    results.par_sort_unstable_by(|a, b| a.result_id.cmp(&b.result_id));

    let mut writer = PartitionWriter::new(root, key)?;
    writer.write_results(&results)?;
    Ok(PartitionStage { writer, batches })
}

/// Ingests every manifest entry into a new store at `root`.
pub fn ingest_corpus(manifest: &Manifest, ctx: &IngestContext, root: &Path, opts: IngestOptions) -> Result<IngestReport> {
    with_pool(opts.jobs, || ingest_in_pool(manifest, ctx, root, opts))?
}

fn ingest_in_pool(manifest: &Manifest, ctx: &IngestContext, root: &Path, opts: IngestOptions) -> Result<IngestReport> {
    let mut entries: Vec<&FileManifestEntry> = manifest.entries.iter().collect();
    entries.sort_by(|a, b| (a.key(), &a.rel_path).cmp(&(b.key(), &b.rel_path)));

    let mappings = first_error(entries.par_iter().map(|e| ctx.mapping_for(e)).collect())?;
    prepare_root(root, opts.overwrite)?;

    let mut groups: BTreeMap<PartitionKey, Vec<(&FileManifestEntry, &ColumnMapping)>> = BTreeMap::new();
    for (e, m) in entries.iter().zip(&mappings) {
        groups.entry(e.key()).or_default().push((e, m));
    }
    let staged: Vec<Result<PartitionStage>> = groups
        .into_par_iter()
        .map(|(key, files)| process_partition(root, key, files, ctx))
        .collect();
    let mut staged = first_error(staged)?;

    // sequential sample merge in partition order
    let mut home: HashMap<SampleId, (usize, usize)> = HashMap::new();
    let mut homed: Vec<Vec<Sample>> = vec![Vec::new(); staged.len()];
    for (pi, stage) in staged.iter_mut().enumerate() {
        for batch in &mut stage.batches {
            for sample in std::mem::take(&mut batch.samples) {
                match home.get(&sample.sample_id) {
                    Some(&(hp, hi)) => {
                        let existing = &mut homed[hp][hi];
                        if existing.cells != sample.cells {
                            batch.stats.sample_conflicts += 1;
                        }
                        existing.hazard_categories.extend(sample.hazard_categories);
                    }
                    None => {
                        batch.stats.samples_emitted += 1;
                        home.insert(sample.sample_id.clone(), (pi, homed[pi].len()));
                        homed[pi].push(sample);
                    }
                }
            }
        }
    }
    drop(home);

    let committed: Vec<Result<(crate::store::Partition, Vec<FileBatch>)>> = staged
        .into_par_iter()
        .zip(homed.into_par_iter())
        .map(|(stage, mut samples)| {
            samples.sort_unstable_by(|a, b| a.sample_id.cmp(&b.sample_id));
            let PartitionStage { mut writer, batches } = stage;
            writer.write_samples(&samples)?;
            let sources = batches
                .iter()
                .map(|b| SourceFileRecord {
                    rel_path: b.entry.rel_path.clone(),
                    sha256: b.source_sha256.clone(),
                    size_bytes: b.entry.size_bytes,
                    era: b.entry.era,
                    rows_read: b.stats.rows_read,
                    rows_malformed: b.stats.rows_malformed,
                    duplicates_removed: b.stats.duplicates_removed,
                    results_emitted: b.stats.results_emitted,
                })
                .collect();
            Ok((writer.commit(sources)?, batches))
        })
        .collect();
    let committed = first_error(committed)?;

    let partitions: Vec<crate::store::Partition> = committed.iter().map(|(p, _)| p.clone()).collect();
    let index: StoreIndex = crate::store::write_store_index(root, &partitions, &schema_json(ctx))?;

    let mut totals = IngestStats::default();
    let mut files = Vec::new();
    for (p, batches) in committed {
        for b in batches {
            totals.merge(&b.stats);
            files.push(FileReport {
                rel_path: b.entry.rel_path.clone(),
                partition: p.key.to_string(),
                sha256: b.source_sha256,
                unmapped_columns: b.mapping.unmapped_sources.iter().map(|(n, _)| n.clone()).collect(),
                stats: b.stats,
                diagnostics: b.diagnostics,
                diagnostics_dropped: b.diagnostics_dropped,
            });
        }
    }
    totals.finalize_rates(ctx.schema.names());
    let report = IngestReport {
        store_checksum: index.checksum,
        partitions: partitions.len() as u64,
        totals,
        files,
        skipped: manifest.skipped.clone(),
    };
    let path = root.join(INGEST_STATS);
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::json(&path, e))?;
    std::fs::write(&path, format!("{text}\n")).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

fn schema_json(ctx: &IngestContext) -> String {
    let mut s = serde_json::to_string_pretty(&ctx.schema).expect("schema serializes");
    s.push('\n');
    s
}
