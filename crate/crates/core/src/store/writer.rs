use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::*;

const STAGING: &str = ".staging";

/// Writes one partition into a staging directory; nothing is visible to
/// readers until [`PartitionWriter::commit`] renames it into place.
#[derive(Debug)]
pub struct PartitionWriter {
    root: PathBuf,
    key: PartitionKey,
    staging: PathBuf,
    counts: RowCounts,
    checksums: BTreeMap<String, String>,
}

/// Handle on a partition whose tables are staged but not yet committed.
pub type StagedPartition = PartitionWriter;

fn write_file(path: &Path, bytes: &[u8]) -> Result<String> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(bytes))
}

fn data_rows(bytes: &[u8]) -> u64 {
    // canonical tables are LF-terminated with one header line; embedded
    // newlines only occur inside quoted fields, so count records properly
    let mut rdr = csv::ReaderBuilder::new().from_reader(bytes);
    rdr.records().count() as u64
}

impl PartitionWriter {
    pub fn new(root: &Path, key: PartitionKey) -> Result<Self> {
        let staging = root
            .join(STAGING)
            .join(format!("{}_{}_{}", key.hazard.code(), key.country, key.year));
        if staging.exists() {
            std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        std::fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        Ok(PartitionWriter {
            root: root.to_path_buf(),
            key,
            staging,
            counts: RowCounts::default(),
            checksums: BTreeMap::new(),
        })
    }

    pub fn key(&self) -> &PartitionKey {
        &self.key
    }

    /// Writes the result tables; `results` must be sorted by id.
    pub fn write_results(&mut self, results: &[AnalyticalResult]) -> Result<()> {
        debug_assert!(results.windows(2).all(|w| w[0].result_id < w[1].result_id));
        let (core, rest) = encode_results(results);
        self.checksums
            .insert(CORE_RESULTS.into(), write_file(&self.staging.join(CORE_RESULTS), &core)?);
        self.checksums
            .insert(REST_RESULTS.into(), write_file(&self.staging.join(REST_RESULTS), &rest)?);
        self.counts.core_results = results.len() as u64;
        self.counts.rest_results = data_rows(&rest);
        Ok(())
    }

    /// Writes the sample tables; `samples` must be sorted by id.
    pub fn write_samples(&mut self, samples: &[Sample]) -> Result<()> {
        debug_assert!(samples.windows(2).all(|w| w[0].sample_id < w[1].sample_id));
        let (core, rest) = encode_samples(samples);
        self.checksums
            .insert(CORE_SAMPLES.into(), write_file(&self.staging.join(CORE_SAMPLES), &core)?);
        self.checksums
            .insert(REST_SAMPLES.into(), write_file(&self.staging.join(REST_SAMPLES), &rest)?);
        self.counts.core_samples = samples.len() as u64;
        self.counts.rest_samples = data_rows(&rest);
        Ok(())
    }

    /// Writes the manifest last and renames the staged directory into place,
    /// replacing any previous partition with the same key.
    pub fn commit(self, source_files: Vec<SourceFileRecord>) -> Result<Partition> {
        for table in TABLES {
            if !self.checksums.contains_key(table) {
                return Err(Error::Corrupt {
                    path: self.staging.join(table),
                    reason: "table was never written".into(),
                });
            }
        }
        let manifest = PartitionManifest {
            schema_version: SCHEMA_VERSION.into(),
            checksum_algorithm: CHECKSUM_ALGORITHM.into(),
            key: self.key.clone(),
            row_counts: self.counts,
            checksums: self.checksums,
            source_files,
        };
        let mpath = self.staging.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&mpath, e))?;
        write_file(&mpath, format!("{text}\n").as_bytes())?;

        let dest = self.root.join(self.key.rel_dir());
        if dest.exists() {
            std::fs::remove_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
        }
        let parent = dest.parent().expect("partition dir has a parent");
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        std::fs::rename(&self.staging, &dest).map_err(|e| Error::io(&dest, e))?;
        Ok(Partition {
            key: self.key,
            dir: dest,
            manifest,
        })
    }
}

/// Writes a complete partition in one call.
pub fn stage_partition(
    root: &Path,
    key: PartitionKey,
    samples: &[Sample],
    results: &[AnalyticalResult],
    source_files: Vec<SourceFileRecord>,
) -> Result<Partition> {
    let mut w = PartitionWriter::new(root, key)?;
    w.write_results(results)?;
    w.write_samples(samples)?;
    w.commit(source_files)
}

/// Sorts by id and writes a partition; the main entry point.
pub fn write_partition(
    root: &Path,
    key: PartitionKey,
    mut samples: Vec<Sample>,
    mut results: Vec<AnalyticalResult>,
) -> Result<Partition> {
    samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    results.sort_by(|a, b| a.result_id.cmp(&b.result_id));
    stage_partition(root, key, &samples, &results, Vec::new())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreIndexEntry {
    pub key: PartitionKey,
    pub dir: String,
    pub core_samples: u64,
    pub core_results: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub schema_version: String,
    pub checksum_algorithm: String,
    pub checksum: String,
    pub total_samples: u64,
    pub total_results: u64,
    pub partitions: Vec<StoreIndexEntry>,
}

/// Writes `store.json` and `schema.json` at the store root and removes the
/// staging area.
pub fn write_store_index(root: &Path, partitions: &[Partition], schema_json: &str) -> Result<StoreIndex> {
    let mut parts: Vec<&Partition> = partitions.iter().collect();
    parts.sort_by(|a, b| a.key.cmp(&b.key));
    let index = StoreIndex {
        schema_version: SCHEMA_VERSION.into(),
        checksum_algorithm: CHECKSUM_ALGORITHM.into(),
        checksum: store_digest(parts.iter().map(|p| (&p.key, &p.manifest))),
        total_samples: parts.iter().map(|p| p.manifest.row_counts.core_samples).sum(),
        total_results: parts.iter().map(|p| p.manifest.row_counts.core_results).sum(),
        partitions: parts
            .iter()
            .map(|p| StoreIndexEntry {
                key: p.key.clone(),
                dir: p.key.to_string(),
                core_samples: p.manifest.row_counts.core_samples,
                core_results: p.manifest.row_counts.core_results,
            })
            .collect(),
    };
    let path = root.join(STORE_INDEX);
    let text = serde_json::to_string_pretty(&index).map_err(|e| Error::json(&path, e))?;
    write_file(&path, format!("{text}\n").as_bytes())?;
    write_file(&root.join(SCHEMA_FILE), schema_json.as_bytes())?;
    let staging = root.join(STAGING);
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HazardCategory, ResultId, SampleId};
    use std::collections::BTreeSet;

    #[test]
    fn one_sample_three_results() {
        let dir = tempfile::tempdir().unwrap();
        let key = PartitionKey {
            hazard: HazardCategory::ChemicalContaminants,
            country: "DE".into(),
            year: 2017,
        };
        let s = Sample::from_cells(
            SampleId("s1".into()),
            BTreeMap::from([("product_id".to_string(), "P".to_string())]),
            "DE",
            "P".into(),
            BTreeSet::from([HazardCategory::ChemicalContaminants]),
        )
        .0;
        let results = (0..3)
            .map(|i| {
                AnalyticalResult::from_cells(
                    ResultId(format!("r{i}")),
                    SampleId("s1".into()),
                    HazardCategory::ChemicalContaminants,
                    BTreeMap::from([("contaminant_id".to_string(), format!("C{i}"))]),
                    format!("C{i}"),
                    None,
                )
                .0
            })
            .collect();
        let p = write_partition(dir.path(), key.clone(), vec![s], results).unwrap();
        assert_eq!(p.manifest.row_counts.core_results, 3);
        assert_eq!(p.manifest.row_counts.core_samples, 1);
        write_store_index(dir.path(), &[p], "{}").unwrap();

        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.partitions.len(), 1);
        assert!(store.partitions[0].verify_checksums().unwrap().is_empty());
        assert_eq!(store.partitions[0].read_results().unwrap().len(), 3);
        assert!(!dir.path().join(".staging").exists());

        std::fs::write(store.partitions[0].table_path(CORE_RESULTS), "tampered").unwrap();
        assert_eq!(store.partitions[0].verify_checksums().unwrap(), [CORE_RESULTS]);
    }

    #[test]
    fn uncommitted_partition_is_invisible() {
        let dir = tempfile::tempdir().unwrap();
        let key = PartitionKey {
            hazard: HazardCategory::VMPR,
            country: "NL".into(),
            year: 2020,
        };
        let mut w = PartitionWriter::new(dir.path(), key).unwrap();
        w.write_results(&[]).unwrap();
        assert!(Store::open(dir.path()).unwrap().is_empty());
        assert!(w.commit(Vec::new()).is_err());
    }
}
