//! Partitioned on-disk store.
//!
//! ```text
//! <root>/store.json
//! <root>/schema.json
//! <root>/ingest_stats.json
//! <root>/<HAZARD>/<COUNTRY>/<YEAR>/{core_samples,rest_samples,core_results,rest_results}.csv
//! <root>/<HAZARD>/<COUNTRY>/<YEAR>/manifest.json
//! ```
//!
//! Tables are canonical CSV (LF, minimal quoting, rows sorted by id). Core
//! tables hold the fixed essential columns; rest tables hold every other
//! reported variable plus `@`-prefixed derived columns, with the same ids in
//! the same order. A partition directory without a manifest is ignored.

pub mod selection;
pub mod validate;
pub mod writer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{vars, AnalyticalResult, HazardCategory, ResultId, Sample, SampleId, SourceRef};

pub use selection::{read_selection, SelectionFilter, SelectionRows, SELECTIONS};
pub use validate::{round_trip_validate, CellMismatch, ValidationReport};
pub use writer::{stage_partition, write_partition, write_store_index, PartitionWriter, StagedPartition, StoreIndex};

pub const SCHEMA_VERSION: &str = "1";
pub const CHECKSUM_ALGORITHM: &str = "sha256";

pub const CORE_SAMPLES: &str = "core_samples.csv";
pub const REST_SAMPLES: &str = "rest_samples.csv";
pub const CORE_RESULTS: &str = "core_results.csv";
pub const REST_RESULTS: &str = "rest_results.csv";
pub const MANIFEST: &str = "manifest.json";
pub const STORE_INDEX: &str = "store.json";
pub const SCHEMA_FILE: &str = "schema.json";
pub const INGEST_STATS: &str = "ingest_stats.json";
pub const TABLES: [&str; 4] = [CORE_SAMPLES, REST_SAMPLES, CORE_RESULTS, REST_RESULTS];

pub const SAMPLE_ID: &str = "sample_id";
pub const RESULT_ID: &str = "result_id";
pub const HAZARD: &str = "hazard";

/// Sample core columns after `sample_id`.
pub const CORE_SAMPLE_VARS: [&str; 6] = [
    vars::PRODUCT_ID,
    vars::ORIGIN_COUNTRY,
    vars::SAMPLING_COUNTRY,
    vars::SAMPLING_YEAR,
    vars::SAMPLING_DATE,
    vars::SAMPLING_STRATEGY,
];

/// Result core columns after `result_id, sample_id, hazard`.
pub const CORE_RESULT_VARS: [&str; 5] = [
    vars::CONTAMINANT_ID,
    vars::RESULT_VALUE,
    vars::LOQ,
    vars::EVAL_CODE,
    vars::ANALYSIS_DATE,
];

pub const REST_PRODUCT_NAME: &str = "@product_full_name";
pub const REST_HAZARDS: &str = "@hazards";
pub const REST_CONTAMINANT_NAME: &str = "@contaminant_full_name";
pub const REST_SOURCE_FILE: &str = "@source_file";
pub const REST_SOURCE_ROW: &str = "@source_row";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartitionKey {
    pub hazard: HazardCategory,
    pub country: String,
    pub year: i32,
}

impl PartitionKey {
    /// Directory of the partition relative to the store root.
    pub fn rel_dir(&self) -> PathBuf {
        PathBuf::from(self.hazard.code()).join(&self.country).join(self.year.to_string())
    }
}

impl fmt::Display for PartitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.hazard.code(), self.country, self.year)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub core_samples: u64,
    pub rest_samples: u64,
    pub core_results: u64,
    pub rest_results: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFileRecord {
    pub rel_path: String,
    pub sha256: String,
    pub size_bytes: u64,
    pub era: crate::catalog::Era,
    pub rows_read: u64,
    pub rows_malformed: u64,
    pub duplicates_removed: u64,
    pub results_emitted: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub schema_version: String,
    pub checksum_algorithm: String,
    pub key: PartitionKey,
    pub row_counts: RowCounts,
    /// Table file name to hex digest.
    pub checksums: BTreeMap<String, String>,
    pub source_files: Vec<SourceFileRecord>,
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub key: PartitionKey,
    pub dir: PathBuf,
    pub manifest: PartitionManifest,
}

impl Partition {
    pub fn table_path(&self, table: &str) -> PathBuf {
        self.dir.join(table)
    }

    fn read_table(&self, table: &str) -> Result<Vec<u8>> {
        let p = self.table_path(table);
        std::fs::read(&p).map_err(|e| Error::io(&p, e))
    }

    /// Tables whose bytes no longer match the manifest.
    pub fn verify_checksums(&self) -> Result<Vec<String>> {
        let mut failed = Vec::new();
        for table in TABLES {
            let p = self.table_path(table);
            let actual = match std::fs::read(&p) {
                Ok(bytes) => sha256_hex(&bytes),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::from("missing"),
                Err(e) => return Err(Error::io(&p, e)),
            };
            if self.manifest.checksums.get(table) != Some(&actual) {
                failed.push(table.to_string());
            }
        }
        Ok(failed)
    }

    pub fn read_samples(&self) -> Result<Vec<Sample>> {
        decode_samples(
            &self.read_table(CORE_SAMPLES)?,
            &self.read_table(REST_SAMPLES)?,
            &self.key.country,
            &self.dir,
        )
    }

    pub fn read_results(&self) -> Result<Vec<AnalyticalResult>> {
        decode_results(&self.read_table(CORE_RESULTS)?, &self.read_table(REST_RESULTS)?, &self.dir)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvalidPartition {
    pub dir: String,
    pub reason: String,
}

/// A read-only view of a store root.
#[derive(Debug, Clone)]
pub struct Store {
    pub root: PathBuf,
    pub partitions: Vec<Partition>,
    /// Partition directories without a readable manifest; ignored by readers.
    pub invalid: Vec<InvalidPartition>,
}

impl Store {
    /// Opens a store. A missing root is an I/O error; an empty root is an
    /// empty store.
    pub fn open(root: &Path) -> Result<Store> {
        let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
        if !meta.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
            ));
        }
        let mut partitions = Vec::new();
        let mut invalid = Vec::new();
        for hazard in HazardCategory::ALL {
            let hdir = root.join(hazard.code());
            for cdir in sorted_subdirs(&hdir)? {
                for ydir in sorted_subdirs(&cdir)? {
                    let rel = ydir.strip_prefix(root).unwrap_or(&ydir).to_string_lossy().replace('\\', "/");
                    let mpath = ydir.join(MANIFEST);
                    let text = match std::fs::read_to_string(&mpath) {
                        Ok(t) => t,
                        Err(_) => {
                            invalid.push(InvalidPartition {
                                dir: rel,
                                reason: "no manifest".into(),
                            });
                            continue;
                        }
                    };
                    match serde_json::from_str::<PartitionManifest>(&text) {
                        Ok(manifest) if manifest.key.rel_dir() == ydir.strip_prefix(root).unwrap_or(&ydir) => {
                            partitions.push(Partition {
                                key: manifest.key.clone(),
                                dir: ydir.clone(),
                                manifest,
                            });
                        }
                        Ok(_) => invalid.push(InvalidPartition {
                            dir: rel,
                            reason: "manifest key does not match directory".into(),
                        }),
                        Err(e) => invalid.push(InvalidPartition {
                            dir: rel,
                            reason: format!("unreadable manifest: {e}"),
                        }),
                    }
                }
            }
        }
        partitions.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(Store {
            root: root.to_path_buf(),
            partitions,
            invalid,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    /// Digest over every partition's table checksums, in key order.
    pub fn checksum(&self) -> String {
        store_digest(self.partitions.iter().map(|p| (&p.key, &p.manifest)))
    }

    pub fn total_results(&self) -> u64 {
        self.partitions.iter().map(|p| p.manifest.row_counts.core_results).sum()
    }

    pub fn total_samples(&self) -> u64 {
        self.partitions.iter().map(|p| p.manifest.row_counts.core_samples).sum()
    }

    pub fn partition(&self, key: &PartitionKey) -> Option<&Partition> {
        self.partitions.iter().find(|p| &p.key == key)
    }

    /// Every sample in the store keyed by id.
    pub fn sample_index(&self) -> Result<BTreeMap<SampleId, Sample>> {
        let mut out = BTreeMap::new();
        for p in &self.partitions {
            for s in p.read_samples()? {
                out.insert(s.sample_id.clone(), s);
            }
        }
        Ok(out)
    }
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = match std::fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().to_string();
        if !name.starts_with('.') && entry.file_type().map(|t| t.is_dir()).unwrap_or(false) {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn store_digest<'a>(parts: impl Iterator<Item = (&'a PartitionKey, &'a PartitionManifest)>) -> String {
    let mut h = Sha256::new();
    for (key, manifest) in parts {
        h.update(key.to_string().as_bytes());
        h.update(b"\n");
        for (table, sum) in &manifest.checksums {
            h.update(table.as_bytes());
            h.update(b"=");
            h.update(sum.as_bytes());
            h.update(b"\n");
        }
    }
    hex::encode(h.finalize())
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory csv writer")
}

fn cell<'a>(cells: &'a BTreeMap<String, String>, key: &str) -> &'a str {
    cells.get(key).map(String::as_str).unwrap_or("")
}

/// Encodes samples (already sorted by id) into (core, rest) CSV bytes.
pub fn encode_samples(samples: &[Sample]) -> (Vec<u8>, Vec<u8>) {
    let extras: BTreeSet<&str> = samples
        .iter()
        .flat_map(|s| s.cells.keys())
        .map(String::as_str)
        .filter(|k| !CORE_SAMPLE_VARS.contains(k))
        .collect();

    let mut core = csv_writer();
    let mut rest = csv_writer();
    let mut header = vec![SAMPLE_ID];
    header.extend(CORE_SAMPLE_VARS);
    core.write_record(&header).expect("write");
    let mut header = vec![SAMPLE_ID, REST_PRODUCT_NAME, REST_HAZARDS];
    header.extend(extras.iter().copied());
    rest.write_record(&header).expect("write");

    for s in samples {
        let mut row = vec![s.sample_id.0.as_str()];
        row.extend(CORE_SAMPLE_VARS.iter().map(|k| cell(&s.cells, k)));
        core.write_record(&row).expect("write");

        let hazards = s.hazard_categories.iter().map(|h| h.code()).collect::<Vec<_>>().join(";");
        let mut row = vec![s.sample_id.0.as_str(), s.product_full_name.as_str(), hazards.as_str()];
        row.extend(extras.iter().map(|k| cell(&s.cells, k)));
        rest.write_record(&row).expect("write");
    }
    (finish(core), finish(rest))
}

/// Encodes results (already sorted by id) into (core, rest) CSV bytes.
pub fn encode_results(results: &[AnalyticalResult]) -> (Vec<u8>, Vec<u8>) {
    let extras: BTreeSet<&str> = results
        .iter()
        .flat_map(|r| r.cells.keys())
        .map(String::as_str)
        .filter(|k| !CORE_RESULT_VARS.contains(k))
        .collect();

    let mut core = csv_writer();
    let mut rest = csv_writer();
    let mut header = vec![RESULT_ID, SAMPLE_ID, HAZARD];
    header.extend(CORE_RESULT_VARS);
    core.write_record(&header).expect("write");
    let mut header = vec![RESULT_ID, REST_CONTAMINANT_NAME, REST_SOURCE_FILE, REST_SOURCE_ROW];
    header.extend(extras.iter().copied());
    rest.write_record(&header).expect("write");

    for r in results {
        let mut row = vec![r.result_id.0.as_str(), r.sample_id.0.as_str(), r.hazard_category.code()];
        row.extend(CORE_RESULT_VARS.iter().map(|k| cell(&r.cells, k)));
        core.write_record(&row).expect("write");

        let (file, line) = match &r.source {
            Some(s) => (s.file.as_str(), s.row.to_string()),
            None => ("", String::new()),
        };
        let mut row = vec![r.result_id.0.as_str(), r.contaminant_full_name.as_str(), file, line.as_str()];
        row.extend(extras.iter().map(|k| cell(&r.cells, k)));
        rest.write_record(&row).expect("write");
    }
    (finish(core), finish(rest))
}

fn corrupt(dir: &Path, table: &str, reason: impl Into<String>) -> Error {
    Error::Corrupt {
        path: dir.join(table),
        reason: reason.into(),
    }
}

fn read_records(bytes: &[u8], dir: &Path, table: &str) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(bytes);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::csv(dir.join(table), e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec.map_err(|e| Error::csv(dir.join(table), e))?);
    }
    Ok((header, rows))
}

fn expect_header(found: &[String], expected: &[&str], dir: &Path, table: &str) -> Result<()> {
    if found.len() < expected.len() || found.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(corrupt(dir, table, format!("unexpected header {found:?}")));
    }
    Ok(())
}

fn put(cells: &mut BTreeMap<String, String>, key: &str, value: &str) {
    if !value.is_empty() {
        cells.insert(key.to_string(), value.to_string());
    }
}

pub fn decode_samples(core: &[u8], rest: &[u8], fallback_country: &str, dir: &Path) -> Result<Vec<Sample>> {
    let (ch, crows) = read_records(core, dir, CORE_SAMPLES)?;
    let mut expected = vec![SAMPLE_ID];
    expected.extend(CORE_SAMPLE_VARS);
    expected.truncate(7);
    if ch != expected {
        return Err(corrupt(dir, CORE_SAMPLES, format!("unexpected header {ch:?}")));
    }
    let (rh, rrows) = read_records(rest, dir, REST_SAMPLES)?;
    expect_header(&rh, &[SAMPLE_ID, REST_PRODUCT_NAME, REST_HAZARDS], dir, REST_SAMPLES)?;
    if crows.len() != rrows.len() {
        return Err(corrupt(dir, REST_SAMPLES, "row count differs from core table"));
    }
    let mut out = Vec::with_capacity(crows.len());
    for (i, (c, r)) in crows.iter().zip(&rrows).enumerate() {
        if c.get(0) != r.get(0) {
            return Err(corrupt(dir, REST_SAMPLES, format!("id mismatch at row {}", i + 1)));
        }
        let mut cells = BTreeMap::new();
        for (j, k) in CORE_SAMPLE_VARS.iter().enumerate() {
            put(&mut cells, k, &c[j + 1]);
        }
        for (j, k) in rh.iter().enumerate().skip(3) {
            put(&mut cells, k, &r[j]);
        }
        let mut hazards = BTreeSet::new();
        for code in r[2].split(';').filter(|s| !s.is_empty()) {
            hazards.insert(
                HazardCategory::from_code(code)
                    .ok_or_else(|| corrupt(dir, REST_SAMPLES, format!("bad hazard {code:?}")))?,
            );
        }
        let (sample, _) =
            Sample::from_cells(SampleId(c[0].to_string()), cells, fallback_country, r[1].to_string(), hazards);
        out.push(sample);
    }
    Ok(out)
}

pub fn decode_results(core: &[u8], rest: &[u8], dir: &Path) -> Result<Vec<AnalyticalResult>> {
    let (ch, crows) = read_records(core, dir, CORE_RESULTS)?;
    let mut expected = vec![RESULT_ID, SAMPLE_ID, HAZARD];
    expected.extend(CORE_RESULT_VARS);
    if ch != expected {
        return Err(corrupt(dir, CORE_RESULTS, format!("unexpected header {ch:?}")));
    }
    let (rh, rrows) = read_records(rest, dir, REST_RESULTS)?;
    expect_header(
        &rh,
        &[RESULT_ID, REST_CONTAMINANT_NAME, REST_SOURCE_FILE, REST_SOURCE_ROW],
        dir,
        REST_RESULTS,
    )?;
    if crows.len() != rrows.len() {
        return Err(corrupt(dir, REST_RESULTS, "row count differs from core table"));
    }
    let mut out = Vec::with_capacity(crows.len());
    for (i, (c, r)) in crows.iter().zip(&rrows).enumerate() {
        if c.get(0) != r.get(0) {
            return Err(corrupt(dir, REST_RESULTS, format!("id mismatch at row {}", i + 1)));
        }
        let hazard = HazardCategory::from_code(&c[2])
            .ok_or_else(|| corrupt(dir, CORE_RESULTS, format!("bad hazard {:?}", &c[2])))?;
        let mut cells = BTreeMap::new();
        for (j, k) in CORE_RESULT_VARS.iter().enumerate() {
            put(&mut cells, k, &c[j + 3]);
        }
        for (j, k) in rh.iter().enumerate().skip(4) {
            put(&mut cells, k, &r[j]);
        }
        let source = if r[2].is_empty() {
            None
        } else {
            Some(SourceRef {
                file: r[2].to_string(),
                row: r[3]
                    .parse()
                    .map_err(|_| corrupt(dir, REST_RESULTS, format!("bad source row {:?}", &r[3])))?,
            })
        };
        let (result, _) = AnalyticalResult::from_cells(
            ResultId(c[0].to_string()),
            SampleId(c[1].to_string()),
            hazard,
            cells,
            r[1].to_string(),
            source,
        );
        out.push(result);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SamplingStrategy;

    fn sample(id: &str, cells: &[(&str, &str)]) -> Sample {
        let cells = cells.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Sample::from_cells(
            SampleId(id.into()),
            cells,
            "DE",
            "mtx::x".into(),
            BTreeSet::from([HazardCategory::PesticideResidues]),
        )
        .0
    }

    #[test]
    fn sample_round_trip_is_lossless() {
        let mut cells: Vec<(String, String)> = (0..70).map(|i| (format!("var_{i:02}"), format!("v,{i}"))).collect();
        cells.push(("product_id".into(), "P1".into()));
        cells.push(("sampling_strategy".into(), "objective sampling".into()));
        cells.push(("sampling_year".into(), "2017".into()));
        let refs: Vec<(&str, &str)> = cells.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let samples = vec![sample("a", &refs), sample("b", &[("product_id", "P2")])];
        let (core, rest) = encode_samples(&samples);
        let core_text = String::from_utf8(core.clone()).unwrap();
        assert_eq!(
            core_text.lines().next().unwrap(),
            "sample_id,product_id,origin_country,sampling_country,sampling_year,sampling_date,sampling_strategy"
        );
        let back = decode_samples(&core, &rest, "DE", Path::new("x")).unwrap();
        assert_eq!(back, samples);
        assert_eq!(back[0].strategy, SamplingStrategy::Objective);
        assert_eq!(back[1].origin_country, "UNKNOWN");
        assert_eq!(encode_samples(&back), (core, rest));
    }

    #[test]
    fn result_tables_share_ids() {
        let mk = |id: &str, value: &str| {
            let cells = [("contaminant_id", "C1"), ("result_value", value), ("sampSize", "3")]
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect();
            AnalyticalResult::from_cells(
                ResultId(id.into()),
                SampleId("s".into()),
                HazardCategory::VMPR,
                cells,
                "a::b".into(),
                Some(SourceRef {
                    file: "f.csv".into(),
                    row: 3,
                }),
            )
            .0
        };
        let results = vec![mk("r1", "0.5"), mk("r2", "\"quoted\"")];
        let (core, rest) = encode_results(&results);
        assert_eq!(String::from_utf8(core.clone()).unwrap().lines().count(), 3);
        assert!(String::from_utf8(rest.clone()).unwrap().starts_with(
            "result_id,@contaminant_full_name,@source_file,@source_row,sampSize\n"
        ));
        let back = decode_results(&core, &rest, Path::new("x")).unwrap();
        assert_eq!(back, results);
    }

    #[test]
    fn open_ignores_partitions_without_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("CC/DE/2017")).unwrap();
        let s = Store::open(dir.path()).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.invalid.len(), 1);
        assert!(matches!(Store::open(&dir.path().join("nope")), Err(Error::Io { .. })));
    }
}
