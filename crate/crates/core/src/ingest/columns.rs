use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::catalog::Era;
use crate::error::{Error, Result};
use crate::schema::{Schema, SynonymTable};

/// How the columns of one file map onto canonical variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    /// Canonical variable name to source column index.
    pub resolved: BTreeMap<String, usize>,
    /// Source columns with no canonical meaning; kept under their own name.
    pub unmapped_sources: Vec<(String, usize)>,
    /// Canonical variables this file does not carry.
    pub missing_canonicals: Vec<String>,
    /// Number of columns in the header.
    pub width: usize,
}

impl ColumnMapping {
    /// Every stored column as (name, source index), in source order.
    pub fn columns(&self) -> Vec<(String, usize)> {
        let mut cols: Vec<(String, usize)> = self
            .resolved
            .iter()
            .map(|(k, &v)| (k.clone(), v))
            .chain(self.unmapped_sources.iter().cloned())
            .collect();
        cols.sort_by_key(|(_, i)| *i);
        cols
    }
}

fn clean_header(raw: &str, index: usize) -> String {
    let h = raw.trim_start_matches('\u{feff}').trim();
    if h.is_empty() {
        format!("column_{}", index + 1)
    } else {
        h.to_string()
    }
}

/// Resolves a header against the schema (exact canonical name, compared
/// case-insensitively) and then the synonym table for `era`. Two columns
/// landing on the same variable is a schema conflict.
pub fn resolve_columns(
    header: &[String],
    synonyms: &SynonymTable,
    era: Era,
    schema: &Schema,
    file: &str,
) -> Result<ColumnMapping> {
    if header.is_empty() || header.iter().all(|h| h.trim_start_matches('\u{feff}').trim().is_empty()) {
        return Err(Error::MalformedFile {
            path: file.into(),
            reason: "empty header".into(),
        });
    }
    let canonical_lower: HashMap<String, &str> =
        schema.names().map(|n| (n.to_ascii_lowercase(), n)).collect();

    let mut mapping = ColumnMapping {
        width: header.len(),
        ..Default::default()
    };
    let mut claimed: HashMap<String, String> = HashMap::new();
    for (i, raw) in header.iter().enumerate() {
        let name = clean_header(raw, i);
        let target = canonical_lower
            .get(&name.to_ascii_lowercase())
            .map(|s| s.to_string())
            .or_else(|| synonyms.lookup(&name, era).map(str::to_string));
        match target {
            Some(canonical) => {
                if let Some(first) = claimed.get(&canonical) {
                    return Err(Error::SchemaConflict {
                        file: file.to_string(),
                        canonical,
                        first: first.clone(),
                        second: name,
                    });
                }
                claimed.insert(canonical.clone(), name);
                mapping.resolved.insert(canonical, i);
            }
            None => {
                let key = name.to_ascii_lowercase();
                if let Some(first) = claimed.get(&key) {
                    return Err(Error::SchemaConflict {
                        file: file.to_string(),
                        canonical: name.clone(),
                        first: first.clone(),
                        second: name,
                    });
                }
                claimed.insert(key, name.clone());
                mapping.unmapped_sources.push((name, i));
            }
        }
    }
    mapping.missing_canonicals = schema
        .names()
        .filter(|n| !mapping.resolved.contains_key(*n))
        .map(str::to_string)
        .collect();
    Ok(mapping)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Synonym;

    fn table(pairs: &[(&str, &str)]) -> SynonymTable {
        SynonymTable::new(
            pairs
                .iter()
                .map(|(s, c)| Synonym {
                    source_name: s.to_string(),
                    canonical_name: c.to_string(),
                    era: None,
                })
                .collect(),
        )
    }

    fn header(cols: &[&str]) -> Vec<String> {
        cols.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn resolves_synonyms() {
        let syn = table(&[
            ("sampCountry", "sampling_country"),
            ("paramCode", "contaminant_id"),
            ("resVal", "result_value"),
        ]);
        let m = resolve_columns(
            &header(&["sampCountry", "paramCode", "resVal"]),
            &syn,
            Era::Ssd2,
            &Schema::builtin(),
            "f.csv",
        )
        .unwrap();
        assert_eq!(m.resolved["sampling_country"], 0);
        assert_eq!(m.resolved["contaminant_id"], 1);
        assert_eq!(m.resolved["result_value"], 2);
        assert!(m.unmapped_sources.is_empty());
        assert!(m.missing_canonicals.contains(&"eval_code".to_string()));
    }

    #[test]
    fn collision_is_schema_conflict() {
        let syn = table(&[("evalCode", "eval_code"), ("evalcode_id", "eval_code")]);
        match resolve_columns(&header(&["evalCode", "evalcode_id"]), &syn, Era::Ssd1, &Schema::builtin(), "f.csv") {
            Err(Error::SchemaConflict { canonical, first, second, .. }) => {
                assert_eq!(canonical, "eval_code");
                assert_eq!((first.as_str(), second.as_str()), ("evalCode", "evalcode_id"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_columns_route_to_extra() {
        let m = resolve_columns(
            &header(&["\u{feff}product_id", "sampSize"]),
            &SynonymTable::default(),
            Era::Ssd1,
            &Schema::builtin(),
            "f.csv",
        )
        .unwrap();
        assert_eq!(m.resolved["product_id"], 0);
        assert_eq!(m.unmapped_sources, vec![("sampSize".to_string(), 1)]);
    }

    #[test]
    fn empty_header_is_malformed() {
        assert!(matches!(
            resolve_columns(&[], &SynonymTable::default(), Era::Ssd1, &Schema::builtin(), "f.csv"),
            Err(Error::MalformedFile { .. })
        ));
    }
}
