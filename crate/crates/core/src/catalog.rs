//! Controlled terminologies: catalogue loading, `::` ontology paths and the
//! keyword dictionary that folds product names into broad categories.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HazardCategory;

pub const PATH_SEPARATOR: &str = "::";

const DEFAULT_DICTIONARY: &str = include_str!("../data/grouping_dictionary.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CatalogueKind {
    #[serde(rename = "PARAM")]
    Param,
    #[serde(rename = "MATRIX_FOODEX")]
    MatrixFoodex,
    #[serde(rename = "MATRIX_FOODEX2")]
    MatrixFoodex2,
    #[serde(rename = "COUNTRY")]
    Country,
}

impl CatalogueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CatalogueKind::Param => "PARAM",
            CatalogueKind::MatrixFoodex => "MATRIX_FOODEX",
            CatalogueKind::MatrixFoodex2 => "MATRIX_FOODEX2",
            CatalogueKind::Country => "COUNTRY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PARAM" => Some(CatalogueKind::Param),
            "MATRIX_FOODEX" => Some(CatalogueKind::MatrixFoodex),
            "MATRIX_FOODEX2" => Some(CatalogueKind::MatrixFoodex2),
            "COUNTRY" => Some(CatalogueKind::Country),
            _ => None,
        }
    }
}

/// Reporting format generation a file (and its catalogue terms) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Era {
    #[serde(rename = "SSD1")]
    Ssd1,
    #[serde(rename = "SSD2")]
    Ssd2,
}

impl Era {
    pub fn as_str(self) -> &'static str {
        match self {
            Era::Ssd1 => "SSD1",
            Era::Ssd2 => "SSD2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SSD1" => Some(Era::Ssd1),
            "SSD2" => Some(Era::Ssd2),
            _ => None,
        }
    }

    /// Product catalogue used by files of this era.
    pub fn matrix_catalogue(self) -> CatalogueKind {
        match self {
            Era::Ssd1 => CatalogueKind::MatrixFoodex,
            Era::Ssd2 => CatalogueKind::MatrixFoodex2,
        }
    }
}

impl fmt::Display for Era {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogueTerm {
    pub term_id: String,
    pub full_name: String,
    pub catalogue: CatalogueKind,
    pub era: Option<Era>,
}

#[derive(Debug, Clone)]
pub struct Catalogue {
    kind: CatalogueKind,
    terms: Vec<CatalogueTerm>,
    index: HashMap<(Option<Era>, String), usize>,
}

impl Catalogue {
    pub fn new(kind: CatalogueKind) -> Self {
        Catalogue {
            kind,
            terms: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn kind(&self) -> CatalogueKind {
        self.kind
    }

    pub fn terms(&self) -> &[CatalogueTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds a term; `row` is only used for the error message.
    pub fn insert(&mut self, term: CatalogueTerm, row: u64) -> Result<()> {
        let key = (term.era, term.term_id.clone());
        if self.index.contains_key(&key) {
            return Err(Error::DuplicateTerm {
                catalogue: self.kind.as_str().to_string(),
                era: term.era.map_or("-", Era::as_str).to_string(),
                term_id: term.term_id,
                row,
            });
        }
        self.index.insert(key, self.terms.len());
        self.terms.push(term);
        Ok(())
    }

    /// Looks up a term for an era, falling back to era-less terms.
    pub fn lookup(&self, term_id: &str, era: Option<Era>) -> Option<&CatalogueTerm> {
        let exact = era.and_then(|e| self.index.get(&(Some(e), term_id.to_string())));
        exact
            .or_else(|| self.index.get(&(None, term_id.to_string())))
            .map(|&i| &self.terms[i])
    }

    pub fn from_reader<R: Read>(reader: R, kind: CatalogueKind, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::csv(origin, e))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}').trim().eq_ignore_ascii_case(name))
        };
        let (Some(id_col), Some(name_col)) = (col("term_id"), col("full_name")) else {
            return Err(Error::MalformedFile {
                path: origin.to_path_buf(),
                reason: "catalogue header must contain term_id,full_name,era".into(),
            });
        };
        let era_col = col("era");

        let mut catalogue = Catalogue::new(kind);
        for (i, record) in rdr.records().enumerate() {
            let row = i as u64 + 1;
            let record = record.map_err(|e| Error::BadRow {
                path: origin.to_path_buf(),
                row,
                reason: e.to_string(),
            })?;
            let bad = |reason: String| Error::BadRow {
                path: origin.to_path_buf(),
                row,
                reason,
            };
            let term_id = record.get(id_col).unwrap_or_default().trim().to_string();
            let full_name = record.get(name_col).unwrap_or_default().trim().to_string();
            if term_id.is_empty() {
                return Err(bad("empty term_id".into()));
            }
            if !full_name.split(PATH_SEPARATOR).any(|s| !s.trim().is_empty()) {
                return Err(bad(format!("full name {full_name:?} has no segments")));
            }
            let era_text = era_col.and_then(|c| record.get(c)).unwrap_or_default().trim();
            let era = if era_text.is_empty() {
                None
            } else {
                Some(Era::parse(era_text).ok_or_else(|| bad(format!("unknown era {era_text:?}")))?)
            };
            catalogue.insert(
                CatalogueTerm {
                    term_id,
                    full_name,
                    catalogue: kind,
                    era,
                },
                row,
            )?;
        }
        Ok(catalogue)
    }
}

/// Reads a catalogue CSV (`term_id,full_name,era`).
pub fn load_catalogue(path: &Path, kind: CatalogueKind) -> Result<Catalogue> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Catalogue::from_reader(std::io::BufReader::new(file), kind, path)
}

/// The set of catalogues used for linking codes to full names.
#[derive(Debug, Clone, Default)]
pub struct Catalogues {
    by_kind: HashMap<CatalogueKind, Catalogue>,
}

impl Catalogues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a catalogue, merging with an already-loaded one of the same kind.
    pub fn add(&mut self, catalogue: Catalogue) -> Result<()> {
        match self.by_kind.get_mut(&catalogue.kind) {
            None => {
                self.by_kind.insert(catalogue.kind, catalogue);
            }
            Some(existing) => {
                for (i, term) in catalogue.terms.into_iter().enumerate() {
                    existing.insert(term, i as u64 + 1)?;
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, kind: CatalogueKind) -> Option<&Catalogue> {
        self.by_kind.get(&kind)
    }

    pub fn lookup(&self, kind: CatalogueKind, term_id: &str, era: Option<Era>) -> Option<&CatalogueTerm> {
        self.by_kind.get(&kind)?.lookup(term_id, era)
    }

    pub fn contaminant_name(&self, term_id: &str, era: Era) -> Option<&str> {
        self.lookup(CatalogueKind::Param, term_id, Some(era))
            .map(|t| t.full_name.as_str())
    }

    pub fn product_name(&self, term_id: &str, era: Era) -> Option<&str> {
        self.lookup(era.matrix_catalogue(), term_id, Some(era))
            .map(|t| t.full_name.as_str())
    }
}

/// A parsed `::` full name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OntologyPath {
    segments: Vec<String>,
}

impl OntologyPath {
    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn depth(&self) -> usize {
        self.segments.len()
    }
}

impl fmt::Display for OntologyPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join(PATH_SEPARATOR))
    }
}

/// Splits a full name on `::`, trimming each segment. Empty input or any
/// empty segment is rejected.
pub fn parse_param_path(full_name: &str) -> Result<OntologyPath> {
    if full_name.trim().is_empty() {
        return Err(Error::MalformedPath {
            term: full_name.to_string(),
        });
    }
    let segments: Vec<String> = full_name
        .split(PATH_SEPARATOR)
        .map(|s| s.trim().to_string())
        .collect();
    if segments.iter().any(String::is_empty) {
        return Err(Error::MalformedPath {
            term: full_name.to_string(),
        });
    }
    Ok(OntologyPath { segments })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OntologyGroup {
    pub name: String,
    /// The path was shorter than the requested level; `name` is its deepest
    /// segment.
    pub truncated: bool,
}

/// Segment at 1-based `level`, or the deepest segment flagged as truncated.
/// Levels below 1 are treated as 1.
pub fn ontology_group(path: &OntologyPath, level: usize) -> OntologyGroup {
    let level = level.max(1);
    match path.segments.get(level - 1) {
        Some(s) => OntologyGroup {
            name: s.clone(),
            truncated: false,
        },
        None => OntologyGroup {
            name: path.segments.last().cloned().unwrap_or_default(),
            truncated: true,
        },
    }
}

/// A product category label. Compared case-insensitively, displayed verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductCategory(String);

impl ProductCategory {
    pub const OTHERS: &'static str = "Others";

    pub fn new(name: impl Into<String>) -> Self {
        ProductCategory(name.into())
    }

    pub fn others() -> Self {
        ProductCategory(Self::OTHERS.to_string())
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    fn key(&self) -> String {
        self.0.to_lowercase()
    }
}

impl PartialEq for ProductCategory {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for ProductCategory {}

impl Hash for ProductCategory {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl PartialOrd for ProductCategory {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ProductCategory {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for ProductCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HazardScope {
    All,
    Only(HazardCategory),
}

impl HazardScope {
    pub fn parse(s: &str) -> Option<Self> {
        if s.trim().eq_ignore_ascii_case("ALL") {
            Some(HazardScope::All)
        } else {
            HazardCategory::from_code(s).map(HazardScope::Only)
        }
    }

    pub fn admits(self, hazard: HazardCategory) -> bool {
        match self {
            HazardScope::All => true,
            HazardScope::Only(h) => h == hazard,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HazardScope::All => "ALL",
            HazardScope::Only(h) => h.code(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroupingRule {
    pub order: i64,
    pub pattern: String,
    pub scope: HazardScope,
    pub category: ProductCategory,
    needle: String,
}

/// Ordered keyword rules; first match wins, unmatched names go to "Others".
#[derive(Debug, Clone)]
pub struct GroupingDictionary {
    rules: Vec<GroupingRule>,
    categories: Vec<ProductCategory>,
}

impl GroupingDictionary {
    pub fn from_reader<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::csv(origin, e))?.clone();
        let expected = ["order", "pattern", "scope", "category"];
        let got: Vec<String> = headers
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').trim().to_ascii_lowercase())
            .collect();
        if got != expected {
            return Err(Error::MalformedFile {
                path: origin.to_path_buf(),
                reason: format!("dictionary header must be {}", expected.join(",")),
            });
        }
        let mut rules = Vec::new();
        let mut seen_orders = HashMap::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i as u64 + 1;
            let bad = |reason: String| Error::BadRow {
                path: origin.to_path_buf(),
                row,
                reason,
            };
            let record = record.map_err(|e| bad(e.to_string()))?;
            let order: i64 = record[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("order {:?} is not an integer", &record[0])))?;
            if let Some(prev) = seen_orders.insert(order, row) {
                return Err(bad(format!("order {order} already used at row {prev}")));
            }
            let pattern = record[1].trim().to_string();
            if pattern.is_empty() {
                return Err(bad("empty pattern".into()));
            }
            let scope = HazardScope::parse(&record[2])
                .ok_or_else(|| bad(format!("scope {:?} not in ALL, CC, PEST, VMPR", &record[2])))?;
            let category = record[3].trim();
            if category.is_empty() {
                return Err(bad("empty category".into()));
            }
            rules.push(GroupingRule {
                order,
                needle: pattern.to_lowercase(),
                pattern,
                scope,
                category: ProductCategory::new(category),
            });
        }
        rules.sort_by_key(|r| r.order);

        let mut categories: Vec<ProductCategory> = Vec::new();
        for rule in &rules {
            if !categories.contains(&rule.category) {
                categories.push(rule.category.clone());
            }
        }
        if !categories.contains(&ProductCategory::others()) {
            categories.push(ProductCategory::others());
        }
        Ok(GroupingDictionary { rules, categories })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file), path)
    }

    /// The dictionary shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_reader(DEFAULT_DICTIONARY.as_bytes(), Path::new("<builtin>"))
            .expect("builtin grouping dictionary is valid")
    }

    pub fn rules(&self) -> &[GroupingRule] {
        &self.rules
    }

    /// Every category an assignment can produce, in first-rule order; always
    /// contains "Others".
    pub fn categories(&self) -> &[ProductCategory] {
        &self.categories
    }

    pub fn assign(&self, full_name: &str, hazard: HazardCategory) -> ProductCategory {
        let segments: Vec<String> = full_name
            .split(PATH_SEPARATOR)
            .map(|s| s.trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        let applicable = || self.rules.iter().filter(|r| r.scope.admits(hazard));

        // whole segments first, then substring within a segment
        applicable()
            .find(|r| segments.iter().any(|s| *s == r.needle))
            .or_else(|| applicable().find(|r| segments.iter().any(|s| s.contains(&r.needle))))
            .map(|r| r.category.clone())
            .unwrap_or_else(ProductCategory::others)
    }
}

pub fn assign_product_category(
    full_name: &str,
    hazard: HazardCategory,
    dict: &GroupingDictionary,
) -> ProductCategory {
    dict.assign(full_name, hazard)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_paths() {
        let p = parse_param_path("toxins::biogenic amines::cadaverine").unwrap();
        assert_eq!(p.segments(), ["toxins", "biogenic amines", "cadaverine"]);
        assert_eq!(parse_param_path("lead (pb)").unwrap().segments(), ["lead (pb)"]);
        match parse_param_path("a::::b") {
            Err(Error::MalformedPath { term }) => assert_eq!(term, "a::::b"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_param_path("").is_err());
        assert!(parse_param_path("a::").is_err());
    }

    #[test]
    fn groups_by_level() {
        let p = parse_param_path("toxins::biogenic amines::cadaverine").unwrap();
        assert_eq!(ontology_group(&p, 1).name, "toxins");
        assert_eq!(ontology_group(&p, 2).name, "biogenic amines");
        let lead = parse_param_path("lead (pb)").unwrap();
        let g = ontology_group(&lead, 2);
        assert_eq!(g.name, "lead (pb)");
        assert!(g.truncated);
        assert!(!ontology_group(&lead, 1).truncated);
    }

    #[test]
    fn assigns_categories() {
        let dict = GroupingDictionary::builtin();
        let cc = HazardCategory::ChemicalContaminants;
        assert_eq!(
            dict.assign("mtx::all lists::food::eggs and egg products::whole eggs", HazardCategory::PesticideResidues)
                .name(),
            "Eggs and Egg products"
        );
        assert_eq!(dict.assign("matrix::feed", cc).name(), "Feed");
        assert_eq!(dict.assign("mtx::completely novel unclassifiable item", cc).name(), "Others");
        assert_eq!(dict.categories().len(), 23);
    }

    #[test]
    fn whole_segment_beats_earlier_substring_rule() {
        let csv = "order,pattern,scope,category\n1,milk,ALL,Dairy\n2,milk chocolate,ALL,Sweets\n";
        let dict = GroupingDictionary::from_reader(csv.as_bytes(), Path::new("t")).unwrap();
        let hz = HazardCategory::PesticideResidues;
        assert_eq!(dict.assign("x::milk chocolate", hz).name(), "Sweets");
        assert_eq!(dict.assign("x::semi-skimmed milk", hz).name(), "Dairy");
    }

    #[test]
    fn scope_restricts_rules() {
        let csv = "order,pattern,scope,category\n1,kidney,VMPR,Offal\n";
        let dict = GroupingDictionary::from_reader(csv.as_bytes(), Path::new("t")).unwrap();
        assert_eq!(dict.assign("pig kidney", HazardCategory::VMPR).name(), "Offal");
        assert_eq!(dict.assign("pig kidney", HazardCategory::ChemicalContaminants).name(), "Others");
    }

    #[test]
    fn dictionary_validation() {
        let bad_scope = "order,pattern,scope,category\n1,milk,DAIRY,Dairy\n";
        assert!(matches!(
            GroupingDictionary::from_reader(bad_scope.as_bytes(), Path::new("t")),
            Err(Error::BadRow { row: 1, .. })
        ));
        let dup = "order,pattern,scope,category\n1,milk,ALL,Dairy\n1,egg,ALL,Eggs\n";
        assert!(matches!(
            GroupingDictionary::from_reader(dup.as_bytes(), Path::new("t")),
            Err(Error::BadRow { row: 2, .. })
        ));
    }

    #[test]
    fn catalogue_loading() {
        let ok = "term_id,full_name,era\nRF-1,toxins::biogenic amines::cadaverine,\nRF-2,lead (pb),SSD1\nRF-2,\"lead (pb)\",SSD2\n";
        let cat = Catalogue::from_reader(ok.as_bytes(), CatalogueKind::Param, Path::new("p")).unwrap();
        assert_eq!(cat.len(), 3);
        let cad = cat.lookup("RF-1", Some(Era::Ssd2)).unwrap();
        let path = parse_param_path(&cad.full_name).unwrap();
        assert_eq!(ontology_group(&path, 1).name, "toxins");
        assert_eq!(cat.lookup("RF-2", Some(Era::Ssd1)).unwrap().era, Some(Era::Ssd1));
        assert!(cat.lookup("RF-2", None).is_none());

        let dup = "term_id,full_name,era\nA,x,\nB,y,\nA,z,\n";
        match Catalogue::from_reader(dup.as_bytes(), CatalogueKind::Param, Path::new("p")) {
            Err(Error::DuplicateTerm { term_id, row, .. }) => {
                assert_eq!(term_id, "A");
                assert_eq!(row, 3);
            }
            other => panic!("unexpected {other:?}"),
        }

        let empty_name = "term_id,full_name,era\nA,::,\n";
        assert!(matches!(
            Catalogue::from_reader(empty_name.as_bytes(), CatalogueKind::Param, Path::new("p")),
            Err(Error::BadRow { row: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn parse_then_join_is_identity(segs in proptest::collection::vec("[a-z][a-z ()]{0,8}[a-z)]", 1..5)) {
            let full = segs.join("::");
            let path = parse_param_path(&full).unwrap();
            prop_assert_eq!(path.to_string(), full);
        }

        #[test]
        fn assignment_is_total_and_closed(name in "[a-z :]{0,40}") {
            let dict = GroupingDictionary::builtin();
            for hz in HazardCategory::ALL {
                let c = dict.assign(&name, hz);
                prop_assert!(dict.categories().contains(&c));
                prop_assert_eq!(c.clone(), dict.assign(&name, hz));
            }
        }
    }
}
