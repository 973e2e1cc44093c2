//! Discovery, header harmonization and row streaming for long-format input
//! files. [`ingest_file`] turns one file into samples and (not yet
//! deduplicated) results; corpus-level merging lives in [`crate::pipeline`].

pub mod columns;
pub mod discover;
pub mod ids;
pub mod reader;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalogues;
use crate::error::Result;
use crate::model::{vars, AnalyticalResult, Sample, SampleId, SourceRef};
use crate::schema::{Level, Schema, SynonymTable};

pub use columns::{resolve_columns, ColumnMapping};
pub use discover::{discover_files, EraRule, FileManifestEntry, Manifest, SkippedFile};
pub use ids::{dedup, make_ids, make_ids_with, Deduplicator};
pub use reader::{read_header, HarmonizedRow, RowOutcome, RowStream};

pub const MAX_DIAGNOSTICS_PER_FILE: usize = 100;

/// Reference data shared read-only by every ingest worker.
#[derive(Debug, Clone)]
pub struct IngestContext {
    pub schema: Schema,
    pub synonyms: SynonymTable,
    pub catalogues: Catalogues,
}

impl Default for IngestContext {
    fn default() -> Self {
        IngestContext {
            schema: Schema::builtin(),
            synonyms: SynonymTable::builtin(),
            catalogues: Catalogues::new(),
        }
    }
}

impl IngestContext {
    /// Resolves the header of `entry` in the entry's era.
    pub fn mapping_for(&self, entry: &FileManifestEntry) -> Result<ColumnMapping> {
        let header = read_header(entry)?;
        resolve_columns(&header, &self.synonyms, entry.era, &self.schema, &entry.rel_path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MalformedRow,
    SampleConflict,
    UnparsableValue,
    UnparsableDate,
    YearRejected,
    UnknownStrategy,
    UnknownEvalCode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    pub row: u64,
    pub kind: DiagnosticKind,
    pub detail: String,
}

/// Counters for one file, or merged over many.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows_read: u64,
    pub rows_malformed: u64,
    pub duplicates_removed: u64,
    pub samples_emitted: u64,
    pub results_emitted: u64,
    pub unknown_eval_codes: u64,
    pub unparsable_values: u64,
    pub unparsable_dates: u64,
    pub years_rejected: u64,
    pub unknown_strategies: u64,
    pub sample_conflicts: u64,
    pub unlinked_contaminants: u64,
    pub unlinked_products: u64,
    /// Rows with a value, per variable.
    pub non_empty_cells: BTreeMap<String, u64>,
    pub missing_rate_per_variable: BTreeMap<String, f64>,
}

impl IngestStats {
    pub fn merge(&mut self, other: &IngestStats) {
        self.rows_read += other.rows_read;
        self.rows_malformed += other.rows_malformed;
        self.duplicates_removed += other.duplicates_removed;
        self.samples_emitted += other.samples_emitted;
        self.results_emitted += other.results_emitted;
        self.unknown_eval_codes += other.unknown_eval_codes;
        self.unparsable_values += other.unparsable_values;
        self.unparsable_dates += other.unparsable_dates;
        self.years_rejected += other.years_rejected;
        self.unknown_strategies += other.unknown_strategies;
        self.sample_conflicts += other.sample_conflicts;
        self.unlinked_contaminants += other.unlinked_contaminants;
        self.unlinked_products += other.unlinked_products;
        for (k, v) in &other.non_empty_cells {
            *self.non_empty_cells.entry(k.clone()).or_insert(0) += v;
        }
        for k in other.missing_rate_per_variable.keys() {
            self.missing_rate_per_variable.entry(k.clone()).or_insert(1.0);
        }
    }

    /// Recomputes missing rates as `1 - non_empty / rows_read` for every
    /// variable in `variables` and every variable seen with a value.
    pub fn finalize_rates<'a>(&mut self, variables: impl IntoIterator<Item = &'a str>) {
        let mut names: BTreeSet<String> = variables.into_iter().map(str::to_string).collect();
        names.extend(self.non_empty_cells.keys().cloned());
        names.extend(self.missing_rate_per_variable.keys().cloned());
        self.missing_rate_per_variable = names
            .into_iter()
            .map(|n| {
                let filled = self.non_empty_cells.get(&n).copied().unwrap_or(0);
                let rate = if self.rows_read == 0 {
                    1.0
                } else {
                    1.0 - filled as f64 / self.rows_read as f64
                };
                (n, rate.clamp(0.0, 1.0))
            })
            .collect();
    }

    /// results_emitted + duplicates_removed + rows_malformed == rows_read
    pub fn is_conserved(&self) -> bool {
        self.results_emitted + self.duplicates_removed + self.rows_malformed == self.rows_read
    }
}

/// Everything read from one file.
#[derive(Debug, Clone)]
pub struct FileBatch {
    pub entry: FileManifestEntry,
    pub mapping: ColumnMapping,
    /// Distinct samples in order of first appearance.
    pub samples: Vec<Sample>,
    /// All well-formed rows as results, in file order, before deduplication.
    pub results: Vec<AnalyticalResult>,
    pub stats: IngestStats,
    pub diagnostics: Vec<Diagnostic>,
    pub diagnostics_dropped: u64,
    pub source_sha256: String,
}

struct DiagnosticSink<'a> {
    file: &'a str,
    items: Vec<Diagnostic>,
    dropped: u64,
}

impl DiagnosticSink<'_> {
    fn push(&mut self, row: u64, kind: DiagnosticKind, detail: impl Into<String>) {
        if self.items.len() < MAX_DIAGNOSTICS_PER_FILE {
            self.items.push(Diagnostic {
                file: self.file.to_string(),
                row,
                kind,
                detail: detail.into(),
            });
        } else {
            self.dropped += 1;
        }
    }
}

/// A well-formed row split into its sample and result parts, with ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRow {
    pub sample_cells: BTreeMap<String, String>,
    pub result_cells: BTreeMap<String, String>,
    pub sample_id: SampleId,
    pub result_id: crate::model::ResultId,
}

/// Splits harmonized rows of one file and assigns ids. Keeps the file-local
/// sample ordinal, which advances whenever the sample-level cells differ from
/// the previous well-formed row.
pub struct RowKeyer {
    sample_level: HashMap<String, bool>,
    fallback_country: String,
    ordinal: u64,
    previous: Option<BTreeMap<String, String>>,
}

impl RowKeyer {
    pub fn new(mapping: &ColumnMapping, schema: &Schema, fallback_country: &str) -> Self {
        RowKeyer {
            sample_level: mapping
                .resolved
                .keys()
                .map(|k| (k.clone(), schema.level_of(k) == Level::Sample))
                .collect(),
            fallback_country: fallback_country.to_string(),
            ordinal: 0,
            previous: None,
        }
    }

    /// Fails with a reason when the row lacks a product or contaminant id.
    pub fn split(&mut self, cells: BTreeMap<String, String>) -> std::result::Result<SplitRow, String> {
        let missing: Vec<&str> = [vars::PRODUCT_ID, vars::CONTAMINANT_ID]
            .into_iter()
            .filter(|k| !cells.contains_key(*k))
            .collect();
        if !missing.is_empty() {
            return Err(format!("missing {}", missing.join(", ")));
        }
        let (sample_id, result_id) = {
            let (sample_cells, _): (Vec<_>, Vec<_>) = cells.iter().partition(|(k, _)| self.is_sample_level(k));
            if self.previous.as_ref().is_none_or(|p| {
                p.len() != sample_cells.len() || p.iter().zip(&sample_cells).any(|(a, b)| a.0 != b.0 || a.1 != b.1)
            }) {
                self.ordinal += 1;
                self.previous = Some(sample_cells.into_iter().map(|(k, v)| (k.clone(), v.clone())).collect());
            }
            make_ids_with(|k| cells.get(k).map(String::as_str), &self.fallback_country, self.ordinal)
        };
        let (sample_cells, result_cells) = cells.into_iter().partition(|(k, _)| self.is_sample_level(k));
        Ok(SplitRow {
            sample_cells,
            result_cells,
            sample_id,
            result_id,
        })
    }

    fn is_sample_level(&self, key: &str) -> bool {
        self.sample_level.get(key).copied().unwrap_or(false)
    }
}

/// Streams one file into samples and results.
///
/// Sample fields come from the first row bearing a sample id; later rows with
/// different sample-level cells are counted as conflicts. Rows without a
/// product or contaminant id, or with the wrong number of fields, are
/// malformed.
pub fn ingest_file(entry: &FileManifestEntry, mapping: &ColumnMapping, ctx: &IngestContext) -> Result<FileBatch> {
    let mut stream = RowStream::open(entry, mapping)?;
    let mut stats = IngestStats::default();
    let mut diags = DiagnosticSink {
        file: &entry.rel_path,
        items: Vec::new(),
        dropped: 0,
    };
    let mut keyer = RowKeyer::new(mapping, &ctx.schema, &entry.country);

    let mut samples: Vec<Sample> = Vec::new();
    let mut sample_index: HashMap<SampleId, usize> = HashMap::new();
    let mut results = Vec::new();

    for outcome in stream.by_ref() {
        stats.rows_read += 1;
        let HarmonizedRow { row, cells } = match outcome? {
            RowOutcome::Row(r) => r,
            RowOutcome::Malformed { row, reason } => {
                stats.rows_malformed += 1;
                diags.push(row, DiagnosticKind::MalformedRow, reason);
                continue;
            }
        };
        for k in cells.keys() {
            *stats.non_empty_cells.entry(k.clone()).or_insert(0) += 1;
        }
        let SplitRow {
            sample_cells,
            result_cells,
            sample_id,
            result_id,
        } = match keyer.split(cells) {
            Ok(s) => s,
            Err(reason) => {
                stats.rows_malformed += 1;
                diags.push(row, DiagnosticKind::MalformedRow, reason);
                continue;
            }
        };

        match sample_index.get(&sample_id) {
            Some(&i) => {
                if samples[i].cells != sample_cells {
                    stats.sample_conflicts += 1;
                    diags.push(
                        row,
                        DiagnosticKind::SampleConflict,
                        format!("sample {sample_id} differs from its first row"),
                    );
                }
            }
            None => {
                let product_id = &sample_cells[vars::PRODUCT_ID];
                let product_name = match sample_cells.get(vars::PRODUCT_FULL_NAME) {
                    Some(n) => n.clone(),
                    None => match ctx.catalogues.product_name(product_id, entry.era) {
                        Some(n) => n.to_string(),
                        None => {
                            stats.unlinked_products += 1;
                            product_id.clone()
                        }
                    },
                };
                let (sample, d) = Sample::from_cells(
                    sample_id.clone(),
                    sample_cells,
                    &entry.country,
                    product_name,
                    BTreeSet::from([entry.hazard]),
                );
                if d.year_rejected {
                    stats.years_rejected += 1;
                    diags.push(row, DiagnosticKind::YearRejected, "reported year rejected");
                }
                if d.date_unparsable {
                    stats.unparsable_dates += 1;
                    diags.push(row, DiagnosticKind::UnparsableDate, "sampling date not parsable");
                }
                if d.unknown_strategy {
                    stats.unknown_strategies += 1;
                    diags.push(row, DiagnosticKind::UnknownStrategy, "sampling strategy not recognized");
                }
                sample_index.insert(sample_id.clone(), samples.len());
                samples.push(sample);
            }
        }

        let contaminant_id = &result_cells[vars::CONTAMINANT_ID];
        let contaminant_name = match result_cells.get(vars::CONTAMINANT_FULL_NAME) {
            Some(n) => n.clone(),
            None => match ctx.catalogues.contaminant_name(contaminant_id, entry.era) {
                Some(n) => n.to_string(),
                None => {
                    stats.unlinked_contaminants += 1;
                    contaminant_id.clone()
                }
            },
        };
        let (result, d) = AnalyticalResult::from_cells(
            result_id,
            sample_id,
            entry.hazard,
            result_cells,
            contaminant_name,
            Some(SourceRef {
                file: entry.rel_path.clone(),
                row,
            }),
        );
        if d.value_unparsable {
            stats.unparsable_values += 1;
            diags.push(row, DiagnosticKind::UnparsableValue, "result value kept as text");
        }
        if d.unknown_eval_code {
            stats.unknown_eval_codes += 1;
            diags.push(
                row,
                DiagnosticKind::UnknownEvalCode,
                format!("evaluation code {:?}", result.eval_code.raw()),
            );
        }
        results.push(result);
    }
    let source_sha256 = stream.finish()?;
    stats.finalize_rates(ctx.schema.names().chain(mapping.unmapped_sources.iter().map(|(n, _)| n.as_str())));

    Ok(FileBatch {
        entry: entry.clone(),
        mapping: mapping.clone(),
        samples,
        results,
        stats,
        diagnostics: diags.items,
        diagnostics_dropped: diags.dropped,
        source_sha256,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Era;
    use crate::model::HazardCategory;
    use std::path::Path;

    fn entry(dir: &Path, name: &str, body: &str) -> FileManifestEntry {
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        FileManifestEntry {
            path,
            rel_path: name.to_string(),
            hazard: HazardCategory::PesticideResidues,
            country: "DE".into(),
            year: 2017,
            era: Era::Ssd2,
            size_bytes: body.len() as u64,
        }
    }

    fn run(body: &str) -> FileBatch {
        let dir = tempfile::tempdir().unwrap();
        let e = entry(dir.path(), "PEST_DE_2017.csv", body);
        let ctx = IngestContext::default();
        let mapping = ctx.mapping_for(&e).unwrap();
        ingest_file(&e, &mapping, &ctx).unwrap()
    }

    #[test]
    fn one_sample_three_results() {
        let b = run("sampCode,sampMatCode,paramCode,resVal,evalCode\n\
                     S1,P1,C1,0.1,compliant\n\
                     S1,P1,C2,0.2,compliant\n\
                     S1,P1,C3,NA,detected\n");
        assert_eq!(b.samples.len(), 1);
        assert_eq!(b.results.len(), 3);
        assert!(b.results.iter().all(|r| r.sample_id == b.samples[0].sample_id));
        assert_eq!(b.stats.rows_read, 3);
        assert_eq!(b.stats.missing_rate_per_variable["result_value"], 1.0 - 2.0 / 3.0);
        assert_eq!(b.stats.missing_rate_per_variable["analysis_date"], 1.0);
    }

    #[test]
    fn ten_distinct_samples() {
        let mut body = String::from("sampMatCode,paramCode,sampY\n");
        for i in 0..10 {
            body.push_str(&format!("P{i},C1,2017\n"));
        }
        let b = run(&body);
        assert_eq!((b.samples.len(), b.results.len()), (10, 10));
    }

    #[test]
    fn adjacency_ordinal_separates_identical_blocks() {
        let b = run("product_id,contaminant_id,sampling_date\n\
                     P1,C1,2017-01-01\n\
                     P1,C2,2017-01-01\n\
                     P2,C1,2017-01-01\n\
                     P1,C1,2017-01-01\n");
        assert_eq!(b.samples.len(), 3);
        assert_eq!(b.results[0].sample_id, b.results[1].sample_id);
        assert_ne!(b.results[0].sample_id, b.results[3].sample_id);
    }

    #[test]
    fn malformed_rows_counted() {
        let b = run("sampCode,product_id,contaminant_id,resVal\n\
                     S1,P1,C1,0.5\n\
                     S1,P1,,0.5\n\
                     S1,P1,C2\n\
                     S1,P1,C3,abc\n");
        assert_eq!(b.stats.rows_read, 4);
        assert_eq!(b.stats.rows_malformed, 2);
        assert_eq!(b.results.len(), 2);
        assert_eq!(b.stats.unparsable_values, 1);
        assert_eq!(b.results[1].result_value.as_ref().unwrap().text, "abc");
    }

    #[test]
    fn sample_conflicts_flagged_first_row_wins() {
        let b = run("sampCode,product_id,origin_country,contaminant_id\n\
                     S1,P1,FR,C1\n\
                     S1,P1,ES,C2\n");
        assert_eq!(b.samples.len(), 1);
        assert_eq!(b.samples[0].origin_country, "FR");
        assert_eq!(b.stats.sample_conflicts, 1);
    }

    #[test]
    fn gzip_and_bom_and_hash() {
        use flate2::write::GzEncoder;
        use sha2::{Digest, Sha256};
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all("\u{feff}product_id,contaminant_id\nP1,C1\n".as_bytes()).unwrap();
        let bytes = enc.finish().unwrap();
        let path = dir.path().join("CC_FR_2012.csv.gz");
        std::fs::write(&path, &bytes).unwrap();
        let e = FileManifestEntry {
            path,
            rel_path: "CC_FR_2012.csv.gz".into(),
            hazard: HazardCategory::ChemicalContaminants,
            country: "FR".into(),
            year: 2012,
            era: Era::Ssd1,
            size_bytes: bytes.len() as u64,
        };
        let ctx = IngestContext::default();
        let b = ingest_file(&e, &ctx.mapping_for(&e).unwrap(), &ctx).unwrap();
        assert_eq!(b.results.len(), 1);
        assert_eq!(b.source_sha256, hex::encode(Sha256::digest(&bytes)));
    }
}
