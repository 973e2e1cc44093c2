//! Predefined read-only selections over the core tables.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Partition, Store};
use crate::error::{Error, Result};
use crate::model::{ComplianceClass, HazardCategory, Sample, SampleId};

pub const SELECTIONS: [&str; 3] = ["results_with_sample_context", "noncompliant_results", "per_year_hazard_counts"];

pub const JOINED_COLUMNS: [&str; 18] = [
    "partition",
    "result_id",
    "sample_id",
    "hazard",
    "contaminant_id",
    "contaminant_full_name",
    "result_value",
    "loq",
    "eval_code",
    "eval_class",
    "analysis_date",
    "product_id",
    "product_full_name",
    "origin_country",
    "sampling_country",
    "sampling_year",
    "sampling_date",
    "sampling_strategy",
];

pub const COUNT_COLUMNS: [&str; 4] = ["year", "hazard", "total_results", "noncompliant_results"];

/// Row predicates; `None` admits everything. `year` applies to the sample's
/// derived sampling year, `country` to its sampling country.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionFilter {
    pub year: Option<i32>,
    pub hazard: Option<HazardCategory>,
    pub country: Option<String>,
    pub eval_class: Option<ComplianceClass>,
}

impl SelectionFilter {
    fn admits(&self, sample: &Sample, hazard: HazardCategory, class: ComplianceClass) -> bool {
        self.year.is_none_or(|y| sample.sampling_year == Some(y))
            && self.hazard.is_none_or(|h| h == hazard)
            && self
                .country
                .as_ref()
                .is_none_or(|c| sample.sampling_country.eq_ignore_ascii_case(c))
            && self.eval_class.is_none_or(|e| e == class)
    }
}

/// Streaming iterator over selection rows, in (partition key, result id)
/// order. Results are read one partition at a time.
pub struct SelectionRows {
    columns: Vec<String>,
    samples: Arc<HashMap<SampleId, Sample>>,
    partitions: VecDeque<Partition>,
    filter: SelectionFilter,
    buffer: VecDeque<Vec<String>>,
    streaming: bool,
}

impl SelectionRows {
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    fn fill(&mut self) -> Result<bool> {
        while self.buffer.is_empty() {
            let Some(p) = self.partitions.pop_front() else {
                return Ok(false);
            };
            let partition = p.key.to_string();
            for r in p.read_results()? {
                let sample = self.samples.get(&r.sample_id).ok_or_else(|| Error::Corrupt {
                    path: p.dir.clone(),
                    reason: format!("result {} references missing sample {}", r.result_id, r.sample_id),
                })?;
                let class = r.compliance();
                if !self.filter.admits(sample, r.hazard_category, class) {
                    continue;
                }
                let get = |k: &str| r.cells.get(k).cloned().unwrap_or_default();
                let sget = |k: &str| sample.cells.get(k).cloned().unwrap_or_default();
                self.buffer.push_back(vec![
                    partition.clone(),
                    r.result_id.0.clone(),
                    r.sample_id.0.clone(),
                    r.hazard_category.code().to_string(),
                    r.contaminant_id.clone(),
                    r.contaminant_full_name.clone(),
                    get("result_value"),
                    get("loq"),
                    r.eval_code.raw().to_string(),
                    class.as_str().to_string(),
                    get("analysis_date"),
                    sample.product_id.clone(),
                    sample.product_full_name.clone(),
                    sample.origin_country.clone(),
                    sample.sampling_country.clone(),
                    sample.sampling_year.map(|y| y.to_string()).unwrap_or_default(),
                    sget("sampling_date"),
                    sample.strategy.label().to_string(),
                ]);
            }
        }
        Ok(true)
    }
}

impl Iterator for SelectionRows {
    type Item = Result<Vec<String>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.streaming {
            match self.fill() {
                Ok(true) => {}
                Ok(false) => return None,
                Err(e) => {
                    self.partitions.clear();
                    return Some(Err(e));
                }
            }
        }
        self.buffer.pop_front().map(Ok)
    }
}

/// Opens a predefined selection. Unknown names list the available ones.
pub fn read_selection(store: &Store, name: &str, filter: &SelectionFilter) -> Result<SelectionRows> {
    if !SELECTIONS.contains(&name) {
        return Err(Error::UnknownSelection {
            name: name.to_string(),
            available: SELECTIONS.iter().map(|s| s.to_string()).collect(),
        });
    }
    let samples: HashMap<SampleId, Sample> = store.sample_index()?.into_iter().collect();
    let mut filter = filter.clone();
    if name == "noncompliant_results" {
        filter.eval_class = Some(ComplianceClass::NonCompliant);
    }
    let mut rows = SelectionRows {
        columns: JOINED_COLUMNS.iter().map(|s| s.to_string()).collect(),
        samples: Arc::new(samples),
        partitions: store.partitions.iter().cloned().collect(),
        filter,
        buffer: VecDeque::new(),
        streaming: true,
    };
    if name == "per_year_hazard_counts" {
        let mut counts: BTreeMap<(i32, HazardCategory), (u64, u64)> = BTreeMap::new();
        for row in rows.by_ref() {
            let row = row?;
            let Ok(year) = row[15].parse::<i32>() else { continue };
            let hazard = HazardCategory::from_code(&row[3]).expect("hazard written by selection");
            let c = counts.entry((year, hazard)).or_default();
            c.0 += 1;
            if row[9] == ComplianceClass::NonCompliant.as_str() {
                c.1 += 1;
            }
        }
        return Ok(SelectionRows {
            columns: COUNT_COLUMNS.iter().map(|s| s.to_string()).collect(),
            samples: Arc::new(HashMap::new()),
            partitions: VecDeque::new(),
            filter: SelectionFilter::default(),
            buffer: counts
                .into_iter()
                .map(|((y, h), (t, n))| vec![y.to_string(), h.code().to_string(), t.to_string(), n.to_string()])
                .collect(),
            streaming: false,
        });
    }
    Ok(rows)
}
