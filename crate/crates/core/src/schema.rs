//! Canonical variable schema (core/rest split, sample/result level) and the
//! column synonym table used to harmonize divergent file headers.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::Era;
use crate::error::{Error, Result};

const DEFAULT_SCHEMA: &str = include_str!("../data/schema.json");
const DEFAULT_SYNONYMS: &str = include_str!("../data/synonyms.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Sample,
    Result,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableDef {
    pub name: String,
    pub level: Level,
    pub core: bool,
    pub era: Option<Era>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub version: String,
    pub checksum_algorithm: String,
    pub variables: Vec<VariableDef>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Schema {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let mut schema: Schema = serde_json::from_str(text).map_err(|e| Error::json(origin, e))?;
        schema.reindex(origin)?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_SCHEMA, Path::new("<builtin>")).expect("builtin schema is valid")
    }

    pub fn builtin_json() -> &'static str {
        DEFAULT_SCHEMA
    }

    fn reindex(&mut self, origin: &Path) -> Result<()> {
        self.index.clear();
        for (i, v) in self.variables.iter().enumerate() {
            if v.name.contains('@') || v.name.trim().is_empty() {
                return Err(Error::MalformedFile {
                    path: origin.to_path_buf(),
                    reason: format!("invalid variable name {:?}", v.name),
                });
            }
            if self.index.insert(v.name.clone(), i).is_some() {
                return Err(Error::MalformedFile {
                    path: origin.to_path_buf(),
                    reason: format!("variable {:?} declared twice", v.name),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&VariableDef> {
        self.index.get(name).map(|&i| &self.variables[i])
    }

    pub fn is_canonical(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Level of a column; unknown (unmapped) columns are result-level so that
    /// per-row values are never collapsed.
    pub fn level_of(&self, name: &str) -> Level {
        self.get(name).map_or(Level::Result, |v| v.level)
    }

    pub fn is_core(&self, name: &str) -> bool {
        self.get(name).is_some_and(|v| v.core)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.name.as_str())
    }

    pub fn core_names(&self, level: Level) -> Vec<&str> {
        self.variables
            .iter()
            .filter(|v| v.core && v.level == level)
            .map(|v| v.name.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synonym {
    pub source_name: String,
    pub canonical_name: String,
    /// `None` applies to every era.
    pub era: Option<Era>,
}

#[derive(Debug, Clone, Default)]
pub struct SynonymTable {
    entries: Vec<Synonym>,
}

impl SynonymTable {
    pub fn new(entries: Vec<Synonym>) -> Self {
        SynonymTable { entries }
    }

    pub fn from_reader<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::csv(origin, e))?.clone();
        let got: Vec<String> = headers
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').trim().to_ascii_lowercase())
            .collect();
        if got != ["source_name", "canonical_name", "era"] {
            return Err(Error::MalformedFile {
                path: origin.to_path_buf(),
                reason: "synonym table header must be source_name,canonical_name,era".into(),
            });
        }
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i as u64 + 1;
            let bad = |reason: String| Error::BadRow {
                path: origin.to_path_buf(),
                row,
                reason,
            };
            let record = record.map_err(|e| bad(e.to_string()))?;
            let source_name = record[0].trim().to_string();
            let canonical_name = record[1].trim().to_string();
            if source_name.is_empty() || canonical_name.is_empty() {
                return Err(bad("empty synonym field".into()));
            }
            let era_text = record[2].trim();
            let era = if era_text.is_empty() || era_text.eq_ignore_ascii_case("ALL") {
                None
            } else {
                Some(Era::parse(era_text).ok_or_else(|| bad(format!("unknown era {era_text:?}")))?)
            };
            if !seen.insert((source_name.to_lowercase(), era)) {
                return Err(bad(format!("synonym {source_name:?} declared twice for the same era")));
            }
            entries.push(Synonym {
                source_name,
                canonical_name,
                era,
            });
        }
        Ok(SynonymTable { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file), path)
    }

    pub fn builtin() -> Self {
        Self::from_reader(DEFAULT_SYNONYMS.as_bytes(), Path::new("<builtin>"))
            .expect("builtin synonym table is valid")
    }

    pub fn entries(&self) -> &[Synonym] {
        &self.entries
    }

    /// Canonical name for a source column in the given era; era-specific
    /// entries win over era-less ones. Case-insensitive.
    pub fn lookup(&self, source: &str, era: Era) -> Option<&str> {
        let source = source.trim();
        let matches = |s: &&Synonym| s.source_name.eq_ignore_ascii_case(source);
        self.entries
            .iter()
            .filter(matches)
            .find(|s| s.era == Some(era))
            .or_else(|| self.entries.iter().filter(matches).find(|s| s.era.is_none()))
            .map(|s| s.canonical_name.as_str())
    }

    /// Source names that map to `canonical` in `era`.
    pub fn sources_for(&self, canonical: &str, era: Era) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|s| s.canonical_name == canonical && s.era.is_none_or(|e| e == era))
            .map(|s| s.source_name.as_str())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_schema_core_split() {
        let schema = Schema::builtin();
        // plus the derived sample_id this gives the seven sample core columns
        assert_eq!(schema.core_names(Level::Sample).len(), 6);
        assert_eq!(schema.core_names(Level::Result).len(), 5);
        assert_eq!(schema.level_of("sampSize"), Level::Result);
        assert_eq!(schema.level_of("origin_country"), Level::Sample);
    }

    #[test]
    fn synonym_lookup_respects_era() {
        let table = SynonymTable::builtin();
        assert_eq!(table.lookup("prodCode", Era::Ssd1), Some("product_id"));
        assert_eq!(table.lookup("prodcode", Era::Ssd2), None);
        assert_eq!(table.lookup("SAMPCOUNTRY", Era::Ssd2), Some("sampling_country"));
        assert!(table.sources_for("eval_code", Era::Ssd1).contains(&"evalcode_id"));
    }

    #[test]
    fn rejects_bad_synonym_rows() {
        let text = "source_name,canonical_name,era\na,b,SSD3\n";
        assert!(matches!(
            SynonymTable::from_reader(text.as_bytes(), Path::new("s")),
            Err(Error::BadRow { row: 1, .. })
        ));
    }
}
