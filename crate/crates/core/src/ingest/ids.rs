//! Content-derived identifiers. Sample and result ids are SHA-256 digests of
//! a fixed field tuple, so re-ingesting the same data yields the same ids
//! regardless of file order or worker count.

use std::collections::{BTreeMap, HashSet};

use sha2::{Digest, Sha256};

use crate::model::{derive_sampling_year, vars, AnalyticalResult, Derivation, ResultId, SampleId};

const ID_BYTES: usize = 16;

struct KeyHasher(Sha256);

impl KeyHasher {
    fn new(domain: &str) -> Self {
        let mut h = Sha256::new();
        h.update(domain.as_bytes());
        h.update([0u8]);
        KeyHasher(h)
    }

    fn field(&mut self, value: Option<&str>) -> &mut Self {
        match value {
            // absent marker; a present field always carries a length prefix
            None => self.0.update([0xffu8]),
            Some(v) => {
                self.0.update([0x01u8]);
                self.0.update((v.len() as u64).to_le_bytes());
                self.0.update(v.as_bytes());
            }
        }
        self
    }

    fn finish(self) -> String {
        hex::encode(&self.0.finalize()[..ID_BYTES])
    }
}

/// Computes (sample_id, result_id) for one harmonized row. Without a reported
/// sample code the sample key is (sampling country, year, product, sampling
/// date, strategy, file-local ordinal).
pub fn make_ids(cells: &BTreeMap<String, String>, fallback_country: &str, ordinal: u64) -> (SampleId, ResultId) {
    make_ids_with(|k| cells.get(k).map(String::as_str), fallback_country, ordinal)
}

/// [`make_ids`] over an arbitrary cell lookup.
pub fn make_ids_with<'a>(
    get: impl Fn(&str) -> Option<&'a str>,
    fallback_country: &str,
    ordinal: u64,
) -> (SampleId, ResultId) {
    let sample_id = match get(vars::SAMPLE_CODE) {
        Some(code) => {
            let mut h = KeyHasher::new("sample-code");
            h.field(Some(code));
            h.finish()
        }
        None => {
            let country = get(vars::SAMPLING_COUNTRY)
                .map(str::to_ascii_uppercase)
                .unwrap_or_else(|| fallback_country.to_string());
            let (year, _) = derive_sampling_year(
                get(vars::SAMPLING_DATE),
                get(vars::SAMPLING_YEAR),
                &mut Derivation::default(),
            );
            let year = year.map(|y| y.to_string());
            let ordinal = ordinal.to_string();
            let mut h = KeyHasher::new("sample-tuple");
            h.field(Some(&country))
                .field(year.as_deref())
                .field(get(vars::PRODUCT_ID))
                .field(get(vars::SAMPLING_DATE))
                .field(get(vars::SAMPLING_STRATEGY))
                .field(Some(&ordinal));
            h.finish()
        }
    };
    let mut h = KeyHasher::new("result");
    h.field(Some(&sample_id))
        .field(get(vars::CONTAMINANT_ID))
        .field(get(vars::ANALYSIS_DATE))
        .field(get(vars::RESULT_VALUE))
        .field(get(vars::LOQ))
        .field(get(vars::EVAL_CODE));
    (SampleId(sample_id), ResultId(h.finish()))
}

/// First-occurrence-wins filter over result ids.
#[derive(Debug, Default)]
pub struct Deduplicator {
    seen: HashSet<ResultId>,
    removed: u64,
}

impl Deduplicator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true the first time an id is offered.
    pub fn admit(&mut self, id: &ResultId) -> bool {
        if self.seen.contains(id) {
            self.removed += 1;
            false
        } else {
            self.seen.insert(id.clone());
            true
        }
    }

    pub fn removed(&self) -> u64 {
        self.removed
    }
}

/// Drops repeated result ids, keeping the first occurrence.
pub fn dedup<I>(results: I) -> (Vec<AnalyticalResult>, u64)
where
    I: IntoIterator<Item = AnalyticalResult>,
{
    let mut filter = Deduplicator::new();
    let kept = results.into_iter().filter(|r| filter.admit(&r.result_id)).collect();
    (kept, filter.removed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HazardCategory;

    fn row(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn result(id: &str) -> AnalyticalResult {
        AnalyticalResult::from_cells(
            ResultId(id.into()),
            SampleId("s".into()),
            HazardCategory::ChemicalContaminants,
            BTreeMap::new(),
            String::new(),
            None,
        )
        .0
    }

    #[test]
    fn identical_rows_identical_ids() {
        let r = row(&[("product_id", "P1"), ("contaminant_id", "C1"), ("result_value", "0.1")]);
        assert_eq!(make_ids(&r, "DE", 1), make_ids(&r.clone(), "DE", 1));
    }

    #[test]
    fn value_change_keeps_sample_id() {
        let a = row(&[("sample_code", "S1"), ("contaminant_id", "C1"), ("result_value", "0.1")]);
        let b = row(&[("sample_code", "S1"), ("contaminant_id", "C1"), ("result_value", "0.2")]);
        let (sa, ra) = make_ids(&a, "DE", 1);
        let (sb, rb) = make_ids(&b, "DE", 1);
        assert_eq!(sa, sb);
        assert_ne!(ra, rb);
    }

    #[test]
    fn ordinal_separates_samples_without_code() {
        let r = row(&[("product_id", "P1"), ("contaminant_id", "C1")]);
        assert_ne!(make_ids(&r, "DE", 1).0, make_ids(&r, "DE", 2).0);
        assert_ne!(make_ids(&r, "DE", 1).0, make_ids(&r, "FR", 1).0);
    }

    #[test]
    fn absent_differs_from_empty_string() {
        let a = row(&[("sample_code", "S1"), ("contaminant_id", "C1")]);
        let b = row(&[("sample_code", "S1"), ("contaminant_id", "C1"), ("loq", "")]);
        assert_ne!(make_ids(&a, "DE", 1).1, make_ids(&b, "DE", 1).1);
    }

    #[test]
    fn dedup_keeps_first() {
        let (kept, removed) = dedup(vec![result("r1"), result("r1"), result("r2")]);
        let ids: Vec<_> = kept.iter().map(|r| r.result_id.0.as_str()).collect();
        assert_eq!(ids, ["r1", "r2"]);
        assert_eq!(removed, 1);

        let (kept, removed) = dedup(vec![result("a"), result("b")]);
        assert_eq!((kept.len(), removed), (2, 0));
    }
}
