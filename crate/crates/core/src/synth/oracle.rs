//! Brute-force recomputation straight from input files.
//!
//! Reuses discovery, the row reader and header harmonization, then keys,
//! deduplicates and joins rows with plain tuples and ordered maps on one
//! thread. It never touches ids, the store or the analytics engine.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use super::ledger::{naive_reports, FileTruth, Sparsity, Truth, TruthResult, TruthSample};
use crate::analytics::ReportRequest;
use crate::catalog::GroupingDictionary;
use crate::error::Result;
use crate::ingest::{discover_files, EraRule, IngestContext, RowOutcome, RowStream};
use crate::model::{canonicalize_code, derive_sampling_year, normalize_origin, vars, Derivation, SamplingStrategy};
use crate::report::AggregateReport;
use crate::schema::Level;

/// What the oracle derives from a corpus.
#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub truth: Truth,
    pub files: Vec<FileTruth>,
    pub sparsity: Sparsity,
    pub reports: Vec<AggregateReport>,
}

type Key = Vec<Option<String>>;

/// Recomputes `requests` for the corpus under `root`.
pub fn oracle_aggregate(
    root: &Path,
    ctx: &IngestContext,
    dict: &GroupingDictionary,
    requests: &[ReportRequest],
) -> Result<OracleOutput> {
    let manifest = discover_files(root, EraRule::default())?;
    let mut entries = manifest.entries.clone();
    entries.sort_by(|a, b| (a.key(), &a.rel_path).cmp(&(b.key(), &b.rel_path)));
    // every header first, so conflicts fail before any row is read
    let mut mappings = Vec::new();
    for e in &entries {
        mappings.push(ctx.mapping_for(e)?);
    }

    let mut truth = Truth::default();
    let mut sample_index: BTreeMap<Key, usize> = BTreeMap::new();
    let mut seen_in_partition: BTreeMap<String, BTreeSet<Key>> = BTreeMap::new();
    let mut files = Vec::new();
    let mut sparsity = Sparsity::new();
    let mut strings: HashMap<String, Arc<str>> = HashMap::new();
    let mut intern = |s: &str| -> Arc<str> { strings.entry(s.to_string()).or_insert_with(|| Arc::from(s)).clone() };

    for (entry, mapping) in entries.iter().zip(&mappings) {
        let partition = entry.key().to_string();
        let seen = seen_in_partition.entry(partition.clone()).or_default();
        let mut ft = FileTruth {
            rel_path: entry.rel_path.clone(),
            partition,
            rows_read: 0,
            rows_malformed: 0,
            duplicates_removed: 0,
            results_emitted: 0,
        };
        let mut filled: BTreeMap<String, u64> = BTreeMap::new();
        let mut previous_sample_cells: Option<Vec<(String, String)>> = None;
        let mut ordinal = 0u64;

        let mut stream = RowStream::open(entry, mapping)?;
        for outcome in stream.by_ref() {
            ft.rows_read += 1;
            let cells = match outcome? {
                RowOutcome::Malformed { .. } => {
                    ft.rows_malformed += 1;
                    continue;
                }
                RowOutcome::Row(r) => r.cells,
            };
            for k in cells.keys() {
                *filled.entry(k.clone()).or_default() += 1;
            }
            if !cells.contains_key(vars::PRODUCT_ID) || !cells.contains_key(vars::CONTAMINANT_ID) {
                ft.rows_malformed += 1;
                continue;
            }
            let get = |k: &str| cells.get(k).cloned();
            let sample_cells: Vec<(String, String)> = cells
                .iter()
                .filter(|(k, _)| mapping.resolved.contains_key(*k) && ctx.schema.level_of(k) == Level::Sample)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            if previous_sample_cells.as_ref() != Some(&sample_cells) {
                ordinal += 1;
                previous_sample_cells = Some(sample_cells);
            }

            let (year, _) = derive_sampling_year(
                cells.get(vars::SAMPLING_DATE).map(String::as_str),
                cells.get(vars::SAMPLING_YEAR).map(String::as_str),
                &mut Derivation::default(),
            );
            let sampling_country = get(vars::SAMPLING_COUNTRY)
                .map(|c| c.to_ascii_uppercase())
                .unwrap_or_else(|| entry.country.clone());
            let sample_key: Key = match get(vars::SAMPLE_CODE) {
                Some(code) => vec![Some("code".into()), Some(code)],
                None => vec![
                    Some("tuple".into()),
                    Some(sampling_country.clone()),
                    year.map(|y| y.to_string()),
                    get(vars::PRODUCT_ID),
                    get(vars::SAMPLING_DATE),
                    get(vars::SAMPLING_STRATEGY),
                    Some(ordinal.to_string()),
                ],
            };
            let mut result_key = sample_key.clone();
            for k in [vars::CONTAMINANT_ID, vars::ANALYSIS_DATE, vars::RESULT_VALUE, vars::LOQ, vars::EVAL_CODE] {
                result_key.push(get(k));
            }

            let sample = match sample_index.get(&sample_key) {
                Some(&i) => i,
                None => {
                    let product_id = cells[vars::PRODUCT_ID].clone();
                    let product_name = get(vars::PRODUCT_FULL_NAME)
                        .or_else(|| ctx.catalogues.product_name(&product_id, entry.era).map(str::to_string))
                        .unwrap_or_else(|| product_id.clone());
                    truth.samples.push(TruthSample {
                        key: format!("{sample_key:?}"),
                        product_id,
                        product_name,
                        origin: normalize_origin(cells.get(vars::ORIGIN_COUNTRY).map(String::as_str)),
                        sampling_country,
                        year,
                        strategy: SamplingStrategy::parse(cells.get(vars::SAMPLING_STRATEGY).map(String::as_str)).0,
                    });
                    sample_index.insert(sample_key, truth.samples.len() - 1);
                    truth.samples.len() - 1
                }
            };

            if !seen.insert(result_key) {
                ft.duplicates_removed += 1;
                continue;
            }
            ft.results_emitted += 1;
            let contaminant_id = cells[vars::CONTAMINANT_ID].clone();
            let contaminant_name = get(vars::CONTAMINANT_FULL_NAME)
                .or_else(|| ctx.catalogues.contaminant_name(&contaminant_id, entry.era).map(str::to_string))
                .unwrap_or_else(|| contaminant_id.clone());
            truth.results.push(TruthResult {
                sample,
                hazard: entry.hazard,
                contaminant_id: intern(&contaminant_id),
                contaminant_name: intern(&contaminant_name),
                eval: intern(&canonicalize_code(cells.get(vars::EVAL_CODE).map(String::as_str).unwrap_or(""))),
            });
        }
        stream.finish()?;

        let mut names: BTreeSet<String> = ctx.schema.names().map(str::to_string).collect();
        names.extend(mapping.unmapped_sources.iter().map(|(n, _)| n.clone()));
        names.extend(filled.keys().cloned());
        let rates = names
            .into_iter()
            .map(|n| {
                let rate = if ft.rows_read == 0 {
                    1.0
                } else {
                    1.0 - filled.get(&n).copied().unwrap_or(0) as f64 / ft.rows_read as f64
                };
                (n, rate.clamp(0.0, 1.0))
            })
            .collect();
        sparsity.insert(ft.rel_path.clone(), rates);
        files.push(ft);
    }

    let reports = naive_reports(&truth, dict, Some(&sparsity), requests);
    Ok(OracleOutput {
        truth,
        files,
        sparsity,
        reports,
    })
}
