use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::catalog::GroupingDictionary;
use crate::error::{Error, Result};
use crate::model::{canonicalize_code, classify_canonical, ComplianceClass, HazardCategory, SamplingStrategy, UNKNOWN_COUNTRY};
use crate::store::{Partition, Store, CORE_RESULTS, INGEST_STATS, REST_RESULTS};

/// String interner; ids are dense indices into `names`.
#[derive(Debug, Clone, Default)]
pub struct Interner {
    map: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.map.get(s) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(s.to_string());
        self.map.insert(s.to_string(), id);
        id
    }

    pub fn get(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn lookup(&self, s: &str) -> Option<u32> {
        self.map.get(s).copied()
    }
}

/// One sample as analytics needs it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub product_id: String,
    pub product_name: String,
    pub origin_country: String,
    pub sampling_country: String,
    pub sampling_year: Option<i32>,
    pub strategy: SamplingStrategy,
}

/// One analytical result as analytics needs it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultRecord {
    pub sample_id: String,
    pub hazard: HazardCategory,
    pub contaminant_id: String,
    pub contaminant_name: String,
    /// Reported evaluation code; canonicalized on load.
    pub eval_code: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleFact {
    pub product: u32,
    pub product_name: u32,
    pub origin: u32,
    pub country: u32,
    pub year: Option<i32>,
    pub strategy: SamplingStrategy,
    pub origin_unknown: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResultFact {
    pub sample: u32,
    pub hazard: HazardCategory,
    pub contaminant: u32,
    pub contaminant_name: u32,
    pub eval: u32,
    pub class: ComplianceClass,
}

impl ResultFact {
    pub fn noncompliant(&self) -> bool {
        self.class == ComplianceClass::NonCompliant
    }
}

/// Per-sample result tallies by hazard index.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleTally {
    pub results: [u32; 3],
    pub noncompliant: [u32; 3],
}

impl SampleTally {
    pub fn total(&self) -> u64 {
        self.results.iter().map(|&r| u64::from(r)).sum()
    }

    pub fn any_noncompliant(&self) -> bool {
        self.noncompliant.iter().any(|&n| n > 0)
    }

    pub fn total_noncompliant(&self) -> u64 {
        self.noncompliant.iter().map(|&r| u64::from(r)).sum()
    }
}

/// Interned, read-only facts for analytics.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub strings: Interner,
    pub samples: Vec<SampleFact>,
    pub results: Vec<ResultFact>,
    pub tallies: Vec<SampleTally>,
    /// Display name per contaminant id: the smallest full name seen.
    pub contaminant_display: HashMap<u32, u32>,
    /// Display name per product id: the smallest full name seen.
    pub product_display: HashMap<u32, u32>,
    pub dictionary: GroupingDictionary,
    /// Per-file missing rates, when ingest statistics are available.
    pub sparsity: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Dataset {
    pub fn from_records(
        samples: Vec<SampleRecord>,
        results: Vec<ResultRecord>,
        dictionary: GroupingDictionary,
    ) -> Result<Dataset> {
        let mut strings = Interner::default();
        let mut index: HashMap<String, u32> = HashMap::with_capacity(samples.len());
        let mut facts = Vec::with_capacity(samples.len());
        for s in samples {
            if index.contains_key(&s.sample_id) {
                return Err(Error::Corrupt {
                    path: "<dataset>".into(),
                    reason: format!("sample {} appears twice", s.sample_id),
                });
            }
            index.insert(s.sample_id, facts.len() as u32);
            let origin_unknown = s.origin_country == UNKNOWN_COUNTRY;
            facts.push(SampleFact {
                product: strings.intern(&s.product_id),
                product_name: strings.intern(&s.product_name),
                origin: strings.intern(&s.origin_country),
                country: strings.intern(&s.sampling_country),
                year: s.sampling_year,
                strategy: s.strategy,
                origin_unknown,
            });
        }
        let mut rfacts = Vec::with_capacity(results.len());
        let mut canon_cache: HashMap<String, (u32, ComplianceClass)> = HashMap::new();
        for r in results {
            let sample = *index.get(&r.sample_id).ok_or_else(|| Error::Corrupt {
                path: "<dataset>".into(),
                reason: format!("result references missing sample {}", r.sample_id),
            })?;
            let (eval, class) = match canon_cache.get(&r.eval_code) {
                Some(&v) => v,
                None => {
                    let canonical = canonicalize_code(&r.eval_code);
                    let v = (strings.intern(&canonical), classify_canonical(&canonical));
                    canon_cache.insert(r.eval_code.clone(), v);
                    v
                }
            };
            rfacts.push(ResultFact {
                sample,
                hazard: r.hazard,
                contaminant: strings.intern(&r.contaminant_id),
                contaminant_name: strings.intern(&r.contaminant_name),
                eval,
                class,
            });
        }
        Ok(Self::assemble(strings, facts, rfacts, dictionary))
    }

    fn assemble(
        strings: Interner,
        samples: Vec<SampleFact>,
        results: Vec<ResultFact>,
        dictionary: GroupingDictionary,
    ) -> Dataset {
        let mut tallies = vec![SampleTally::default(); samples.len()];
        let mut contaminant_display: HashMap<u32, u32> = HashMap::new();
        for r in &results {
            let t = &mut tallies[r.sample as usize];
            t.results[r.hazard.index()] += 1;
            if r.noncompliant() {
                t.noncompliant[r.hazard.index()] += 1;
            }
            contaminant_display
                .entry(r.contaminant)
                .and_modify(|n| {
                    if strings.get(r.contaminant_name) < strings.get(*n) {
                        *n = r.contaminant_name;
                    }
                })
                .or_insert(r.contaminant_name);
        }
        let mut product_display: HashMap<u32, u32> = HashMap::new();
        for s in &samples {
            product_display
                .entry(s.product)
                .and_modify(|n| {
                    if strings.get(s.product_name) < strings.get(*n) {
                        *n = s.product_name;
                    }
                })
                .or_insert(s.product_name);
        }
        Dataset {
            strings,
            samples,
            results,
            tallies,
            contaminant_display,
            product_display,
            dictionary,
            sparsity: BTreeMap::new(),
        }
    }

    /// Loads every committed partition of a store. Partitions are read in
    /// parallel and interned in key order.
    pub fn load(store: &Store, dictionary: GroupingDictionary) -> Result<Dataset> {
        let parts: Vec<Result<(Vec<SampleRecord>, Vec<ResultRecord>)>> =
            store.partitions.par_iter().map(read_partition_records).collect();
        let mut samples = Vec::new();
        let mut results = Vec::new();
        for p in parts {
            let (s, r) = p?;
            samples.extend(s);
            results.extend(r);
        }
        let mut ds = Self::from_records(samples, results, dictionary)?;
        ds.sparsity = load_sparsity(&store.root)?;
        Ok(ds)
    }

    pub fn str(&self, id: u32) -> &str {
        self.strings.get(id)
    }

    pub fn sample(&self, r: &ResultFact) -> &SampleFact {
        &self.samples[r.sample as usize]
    }

    pub fn contaminant_name(&self, contaminant: u32) -> &str {
        self.str(self.contaminant_display[&contaminant])
    }

    pub fn product_name(&self, product: u32) -> &str {
        self.str(self.product_display[&product])
    }
}

fn read_partition_records(p: &Partition) -> Result<(Vec<SampleRecord>, Vec<ResultRecord>)> {
    let samples = p
        .read_samples()?
        .into_iter()
        .map(|s| SampleRecord {
            sample_id: s.sample_id.0,
            product_id: s.product_id,
            product_name: s.product_full_name,
            origin_country: s.origin_country,
            sampling_country: s.sampling_country,
            sampling_year: s.sampling_year,
            strategy: s.strategy,
        })
        .collect();

    // results are the bulk of the data; read just the needed columns
    let core_path = p.table_path(CORE_RESULTS);
    let rest_path = p.table_path(REST_RESULTS);
    let mut core = csv::Reader::from_path(&core_path).map_err(|e| Error::csv(&core_path, e))?;
    let mut rest = csv::Reader::from_path(&rest_path).map_err(|e| Error::csv(&rest_path, e))?;
    let mut results = Vec::with_capacity(p.manifest.row_counts.core_results as usize);
    let mut c = csv::StringRecord::new();
    let mut r = csv::StringRecord::new();
    loop {
        let more_core = core.read_record(&mut c).map_err(|e| Error::csv(&core_path, e))?;
        let more_rest = rest.read_record(&mut r).map_err(|e| Error::csv(&rest_path, e))?;
        if more_core != more_rest {
            return Err(Error::Corrupt {
                path: rest_path.clone(),
                reason: "row count differs from core table".into(),
            });
        }
        if !more_core {
            break;
        }
        if c.get(0) != r.get(0) || c.len() < 8 || r.len() < 2 {
            return Err(Error::Corrupt {
                path: rest_path.clone(),
                reason: format!("misaligned row for result {:?}", c.get(0)),
            });
        }
        results.push(ResultRecord {
            sample_id: c[1].to_string(),
            hazard: HazardCategory::from_code(&c[2]).ok_or_else(|| Error::Corrupt {
                path: core_path.clone(),
                reason: format!("bad hazard {:?}", &c[2]),
            })?,
            contaminant_id: c[3].to_string(),
            contaminant_name: r[1].to_string(),
            eval_code: c[6].to_string(),
        });
    }
    Ok((samples, results))
}

fn load_sparsity(root: &Path) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let path = root.join(INGEST_STATS);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => return Err(Error::io(&path, e)),
    };
    let report: crate::pipeline::IngestReport = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    Ok(report
        .files
        .into_iter()
        .map(|f| (f.rel_path, f.stats.missing_rate_per_variable))
        .collect())
}
