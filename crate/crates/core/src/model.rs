//! Domain types shared by every stage of the pipeline.
//!
//! Samples and analytical results keep the harmonized source cells they were
//! built from (`cells`); the typed fields are derived from those cells. The
//! store persists cells verbatim so a stored record can always be turned back
//! into the long-format row it came from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical variable names used throughout ingest, store and analytics.
pub mod vars {
    pub const SAMPLE_CODE: &str = "sample_code";
    pub const PRODUCT_ID: &str = "product_id";
    pub const PRODUCT_FULL_NAME: &str = "product_full_name";
    pub const ORIGIN_COUNTRY: &str = "origin_country";
    pub const SAMPLING_COUNTRY: &str = "sampling_country";
    pub const SAMPLING_YEAR: &str = "sampling_year";
    pub const SAMPLING_DATE: &str = "sampling_date";
    pub const SAMPLING_STRATEGY: &str = "sampling_strategy";
    pub const CONTAMINANT_ID: &str = "contaminant_id";
    pub const CONTAMINANT_FULL_NAME: &str = "contaminant_full_name";
    pub const RESULT_VALUE: &str = "result_value";
    pub const LOQ: &str = "loq";
    pub const EVAL_CODE: &str = "eval_code";
    pub const ANALYSIS_DATE: &str = "analysis_date";
}

pub const UNKNOWN_COUNTRY: &str = "UNKNOWN";
pub const MIN_YEAR: i64 = 1900;
pub const MAX_YEAR: i64 = 2100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HazardCategory {
    #[serde(rename = "CC")]
    ChemicalContaminants,
    #[serde(rename = "PEST")]
    PesticideResidues,
    #[serde(rename = "VMPR")]
    VMPR,
}

impl HazardCategory {
    pub const ALL: [HazardCategory; 3] = [
        HazardCategory::ChemicalContaminants,
        HazardCategory::PesticideResidues,
        HazardCategory::VMPR,
    ];

    /// Short code used in filenames, store paths and reports.
    pub fn code(self) -> &'static str {
        match self {
            HazardCategory::ChemicalContaminants => "CC",
            HazardCategory::PesticideResidues => "PEST",
            HazardCategory::VMPR => "VMPR",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HazardCategory::ChemicalContaminants => "chemical contaminants",
            HazardCategory::PesticideResidues => "pesticide residues",
            HazardCategory::VMPR => "veterinary medicinal product residues",
        }
    }

    pub fn index(self) -> usize {
        match self {
            HazardCategory::ChemicalContaminants => 0,
            HazardCategory::PesticideResidues => 1,
            HazardCategory::VMPR => 2,
        }
    }

    /// Parses a hazard code (`CC`, `PEST`, `VMPR`), case-insensitively.
    pub fn from_code(code: &str) -> Option<Self> {
        match code.trim().to_ascii_uppercase().as_str() {
            "CC" => Some(HazardCategory::ChemicalContaminants),
            "PEST" => Some(HazardCategory::PesticideResidues),
            "VMPR" => Some(HazardCategory::VMPR),
            _ => None,
        }
    }
}

impl fmt::Display for HazardCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Evaluation code of an analytical result. Keeps the reported text and its
/// canonical form (lowercase, trimmed, internal whitespace collapsed).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EvaluationCode {
    raw: String,
    canonical: String,
}

impl EvaluationCode {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let canonical = canonicalize_code(&raw);
        EvaluationCode { raw, canonical }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }
}

pub fn canonicalize_code(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComplianceClass {
    NonCompliant,
    Compliant,
    NotEvaluated,
    NotDetected,
    OtherKnown,
    Unknown,
}

impl ComplianceClass {
    pub const ALL: [ComplianceClass; 6] = [
        ComplianceClass::NonCompliant,
        ComplianceClass::Compliant,
        ComplianceClass::NotEvaluated,
        ComplianceClass::NotDetected,
        ComplianceClass::OtherKnown,
        ComplianceClass::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComplianceClass::NonCompliant => "NonCompliant",
            ComplianceClass::Compliant => "Compliant",
            ComplianceClass::NotEvaluated => "NotEvaluated",
            ComplianceClass::NotDetected => "NotDetected",
            ComplianceClass::OtherKnown => "OtherKnown",
            ComplianceClass::Unknown => "Unknown",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(text.trim()))
    }

    pub fn is_noncompliant(self) -> bool {
        self == ComplianceClass::NonCompliant
    }
}

impl fmt::Display for ComplianceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The eleven evaluation codes reported in the monitoring data, as printed.
pub const KNOWN_EVALUATION_CODES: [&str; 11] = [
    "Less than or equal to max permissible quantities",
    "Result not evaluated",
    "Not detected",
    "Compliant",
    "Compliant due to measurement uncertainty",
    "Greater than max permissible quantities",
    "Detected",
    "Acceptable",
    "Satisfactory",
    "Non-compliant",
    "Unsatisfactory",
];

/// Maps a canonical evaluation code to its compliance class. Matching is on
/// the whole canonical string; "detected" counts as non-compliant.
pub fn classify_evaluation(code: &EvaluationCode) -> ComplianceClass {
    classify_canonical(code.canonical())
}

pub fn classify_canonical(canonical: &str) -> ComplianceClass {
    match canonical {
        "greater than max permissible quantities"
        | "greater than maximum permissible quantities"
        | "non-compliant"
        | "detected"
        | "unsatisfactory" => ComplianceClass::NonCompliant,
        "less than or equal to max permissible quantities"
        | "less than or equal to maximum permissible quantities"
        | "compliant"
        | "compliant due to measurement uncertainty" => ComplianceClass::Compliant,
        "result not evaluated" => ComplianceClass::NotEvaluated,
        "not detected" => ComplianceClass::NotDetected,
        "acceptable" | "satisfactory" => ComplianceClass::OtherKnown,
        _ => ComplianceClass::Unknown,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SamplingStrategy {
    Objective,
    Selective,
    Suspect,
    Convenient,
    Other,
    NotSpecified,
}

impl SamplingStrategy {
    pub const ALL: [SamplingStrategy; 6] = [
        SamplingStrategy::Objective,
        SamplingStrategy::Selective,
        SamplingStrategy::Suspect,
        SamplingStrategy::Convenient,
        SamplingStrategy::Other,
        SamplingStrategy::NotSpecified,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SamplingStrategy::Objective => "objective sampling",
            SamplingStrategy::Selective => "selective sampling",
            SamplingStrategy::Suspect => "suspect sampling",
            SamplingStrategy::Convenient => "convenient sampling",
            SamplingStrategy::Other => "other",
            SamplingStrategy::NotSpecified => "not specified",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Parses a reported strategy. Returns the strategy and whether the text
    /// was recognized; absent text is a recognized `NotSpecified`,
    /// unrecognized text maps to `NotSpecified` with `false`.
    pub fn parse(text: Option<&str>) -> (SamplingStrategy, bool) {
        let Some(text) = text else {
            return (SamplingStrategy::NotSpecified, true);
        };
        let canonical = canonicalize_code(text);
        let strategy = match canonical.as_str() {
            "objective sampling" | "objective" | "random sampling" | "random" => {
                SamplingStrategy::Objective
            }
            "selective sampling" | "selective" | "risk-based sampling" => {
                SamplingStrategy::Selective
            }
            "suspect sampling" | "suspect" => SamplingStrategy::Suspect,
            "convenient sampling" | "convenient" => SamplingStrategy::Convenient,
            "other" | "other sampling" => SamplingStrategy::Other,
            "not specified" | "" => SamplingStrategy::NotSpecified,
            _ => return (SamplingStrategy::NotSpecified, false),
        };
        (strategy, true)
    }
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Tokens that normalize to an absent value, compared case-insensitively
/// after trimming.
pub const MISSING_TOKENS: [&str; 4] = ["", "na", "n/a", "null"];

pub fn is_missing_token(cell: &str) -> bool {
    let t = cell.trim();
    MISSING_TOKENS.iter().any(|m| t.eq_ignore_ascii_case(m))
}

/// Trims a raw cell and maps missing-value tokens to `None`.
pub fn normalize_cell(cell: &str) -> Option<&str> {
    if is_missing_token(cell) {
        None
    } else {
        Some(cell.trim())
    }
}

/// Resolves the sampling year: a reported year wins, otherwise the year of
/// the sampling date. `Ok(None)` means the sample is undated.
pub fn extract_year(sample_date: Option<NaiveDate>, reported_year: Option<i64>) -> Result<Option<i32>> {
    let year = match (reported_year, sample_date) {
        (Some(y), _) => y,
        (None, Some(d)) => i64::from(d.year()),
        (None, None) => return Ok(None),
    };
    if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
        return Err(Error::YearOutOfRange(year));
    }
    Ok(Some(year as i32))
}

/// Parses `YYYY-MM-DD`, tolerating a trailing time component.
pub fn parse_date(text: &str) -> Option<NaiveDate> {
    let t = text.trim();
    let head = match t.as_bytes().get(10) {
        Some(b'T') | Some(b' ') => &t[..10],
        _ => t,
    };
    NaiveDate::parse_from_str(head, "%Y-%m-%d").ok()
}

/// Derives the sampling year and date from the reported cells. A reported
/// year that is unparsable or out of range is rejected and the date's year is
/// used instead.
pub fn derive_sampling_year(
    date_text: Option<&str>,
    year_text: Option<&str>,
    derivation: &mut Derivation,
) -> (Option<i32>, Option<NaiveDate>) {
    let date = date_text.and_then(|d| {
        let parsed = parse_date(d);
        derivation.date_unparsable = parsed.is_none();
        parsed
    });
    let reported = year_text.and_then(|t| {
        let parsed = parse_year(t);
        derivation.year_rejected = parsed.is_none();
        parsed
    });
    let year = match extract_year(date, reported) {
        Ok(y) => y,
        Err(_) => {
            derivation.year_rejected = true;
            extract_year(date, None).unwrap_or(None)
        }
    };
    (year, date)
}

pub fn parse_year(text: &str) -> Option<i64> {
    text.trim().parse::<i64>().ok()
}

/// Maps an origin cell to a country code, absent and `UNKNOWN` both becoming
/// [`UNKNOWN_COUNTRY`].
pub fn normalize_origin(origin: Option<&str>) -> String {
    match origin.map(str::trim) {
        None | Some("") => UNKNOWN_COUNTRY.to_string(),
        Some(o) if o.eq_ignore_ascii_case(UNKNOWN_COUNTRY) => UNKNOWN_COUNTRY.to_string(),
        Some(o) => o.to_ascii_uppercase(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResultId(pub String);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for ResultId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A reported numeric quantity: the exact text plus its parsed value.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub text: String,
    pub value: Option<f64>,
}

impl Measure {
    pub fn parse(text: &str) -> Self {
        let value = text.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        Measure {
            text: text.to_string(),
            value,
        }
    }
}

/// Where a result row came from: input-root-relative path and 1-based data
/// record number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    pub file: String,
    pub row: u64,
}

/// Anomalies found while deriving typed fields from cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Derivation {
    pub unknown_strategy: bool,
    pub year_rejected: bool,
    pub date_unparsable: bool,
    pub value_unparsable: bool,
    pub unknown_eval_code: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: SampleId,
    pub product_id: String,
    /// Linked `::` full name (reported, catalogue, or the id itself).
    pub product_full_name: String,
    /// Normalized origin; [`UNKNOWN_COUNTRY`] when absent.
    pub origin_country: String,
    pub sampling_country: String,
    pub sampling_year: Option<i32>,
    pub sampling_date: Option<NaiveDate>,
    pub strategy: SamplingStrategy,
    pub hazard_categories: BTreeSet<HazardCategory>,
    /// Sample-level harmonized cells as reported; absent cells are omitted.
    pub cells: BTreeMap<String, String>,
}

impl Sample {
    /// Builds a sample from its sample-level cells. `fallback_country` is used
    /// when no sampling country was reported.
    pub fn from_cells(
        sample_id: SampleId,
        cells: BTreeMap<String, String>,
        fallback_country: &str,
        product_full_name: String,
        hazard_categories: BTreeSet<HazardCategory>,
    ) -> (Sample, Derivation) {
        let mut derivation = Derivation::default();
        let get = |k: &str| cells.get(k).map(String::as_str);

        let (sampling_year, sampling_date) = derive_sampling_year(
            get(vars::SAMPLING_DATE),
            get(vars::SAMPLING_YEAR),
            &mut derivation,
        );
        let (strategy, recognized) = SamplingStrategy::parse(get(vars::SAMPLING_STRATEGY));
        derivation.unknown_strategy = !recognized;

        let sample = Sample {
            sample_id,
            product_id: get(vars::PRODUCT_ID).unwrap_or_default().to_string(),
            product_full_name,
            origin_country: normalize_origin(get(vars::ORIGIN_COUNTRY)),
            sampling_country: get(vars::SAMPLING_COUNTRY)
                .map(|c| c.to_ascii_uppercase())
                .unwrap_or_else(|| fallback_country.to_string()),
            sampling_year,
            sampling_date,
            strategy,
            hazard_categories,
            cells,
        };
        (sample, derivation)
    }

    pub fn origin_is_unknown(&self) -> bool {
        self.origin_country == UNKNOWN_COUNTRY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticalResult {
    pub result_id: ResultId,
    pub sample_id: SampleId,
    pub contaminant_id: String,
    /// Linked `::` full name (reported, catalogue, or the id itself).
    pub contaminant_full_name: String,
    pub hazard_category: HazardCategory,
    pub result_value: Option<Measure>,
    pub loq: Option<Measure>,
    pub eval_code: EvaluationCode,
    pub analysis_date: Option<NaiveDate>,
    pub source: Option<SourceRef>,
    /// Result-level harmonized cells as reported; absent cells are omitted.
    pub cells: BTreeMap<String, String>,
}

impl AnalyticalResult {
    pub fn from_cells(
        result_id: ResultId,
        sample_id: SampleId,
        hazard_category: HazardCategory,
        cells: BTreeMap<String, String>,
        contaminant_full_name: String,
        source: Option<SourceRef>,
    ) -> (AnalyticalResult, Derivation) {
        let mut derivation = Derivation::default();
        let get = |k: &str| cells.get(k).map(String::as_str);
        let result_value = get(vars::RESULT_VALUE).map(Measure::parse);
        derivation.value_unparsable = result_value.as_ref().is_some_and(|m| m.value.is_none());
        let loq = get(vars::LOQ).map(Measure::parse);
        let eval_code = EvaluationCode::new(get(vars::EVAL_CODE).unwrap_or_default());
        derivation.unknown_eval_code = classify_evaluation(&eval_code) == ComplianceClass::Unknown;
        let analysis_date = get(vars::ANALYSIS_DATE).and_then(parse_date);

        let result = AnalyticalResult {
            result_id,
            sample_id,
            contaminant_id: get(vars::CONTAMINANT_ID).unwrap_or_default().to_string(),
            contaminant_full_name,
            hazard_category,
            result_value,
            loq,
            eval_code,
            analysis_date,
            source,
            cells,
        };
        (result, derivation)
    }

    pub fn compliance(&self) -> ComplianceClass {
        classify_evaluation(&self.eval_code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn classifies_paper_codes() {
        let c = |s: &str| classify_evaluation(&EvaluationCode::new(s));
        assert_eq!(c("greater than max permissible quantities"), ComplianceClass::NonCompliant);
        assert_eq!(c("detected"), ComplianceClass::NonCompliant);
        assert_eq!(c("less than or equal to max permissible quantities"), ComplianceClass::Compliant);
        assert_eq!(c(""), ComplianceClass::Unknown);
        assert_eq!(c("Compliant due to measurement uncertainty"), ComplianceClass::Compliant);
        assert_eq!(c("not detected"), ComplianceClass::NotDetected);
    }

    #[test]
    fn known_codes_partition() {
        let mut counts = BTreeMap::new();
        for code in KNOWN_EVALUATION_CODES {
            *counts.entry(classify_evaluation(&EvaluationCode::new(code))).or_insert(0) += 1;
        }
        assert_eq!(counts[&ComplianceClass::NonCompliant], 4);
        assert_eq!(counts[&ComplianceClass::Compliant], 3);
        assert_eq!(counts[&ComplianceClass::NotEvaluated], 1);
        assert_eq!(counts[&ComplianceClass::NotDetected], 1);
        assert_eq!(counts[&ComplianceClass::OtherKnown], 2);
        assert!(!counts.contains_key(&ComplianceClass::Unknown));

        let canon: BTreeSet<_> = KNOWN_EVALUATION_CODES.iter().map(|c| canonicalize_code(c)).collect();
        assert_eq!(canon.len(), 11);
    }

    #[test]
    fn whole_string_match_only() {
        let c = |s: &str| classify_evaluation(&EvaluationCode::new(s));
        assert_eq!(c("not non-compliant"), ComplianceClass::Unknown);
        assert_eq!(c("undetected"), ComplianceClass::Unknown);
    }

    #[test]
    fn year_extraction() {
        let d = NaiveDate::from_ymd_opt(2017, 3, 4);
        assert_eq!(extract_year(d, None).unwrap(), Some(2017));
        assert_eq!(extract_year(None, Some(2011)).unwrap(), Some(2011));
        assert_eq!(extract_year(None, None).unwrap(), None);
        assert_eq!(extract_year(d, Some(2016)).unwrap(), Some(2016));
        assert!(matches!(extract_year(None, Some(1850)), Err(Error::YearOutOfRange(1850))));
        assert!(extract_year(None, Some(2101)).is_err());
    }

    #[test]
    fn missing_tokens() {
        for t in ["", "  ", "NA", "n/a", "NULL", " null "] {
            assert_eq!(normalize_cell(t), None, "{t:?}");
        }
        assert_eq!(normalize_cell(" 0.5 "), Some("0.5"));
        assert_eq!(normalize_cell("NaN"), Some("NaN"));
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!(SamplingStrategy::parse(Some("Objective  sampling")), (SamplingStrategy::Objective, true));
        assert_eq!(SamplingStrategy::parse(None), (SamplingStrategy::NotSpecified, true));
        assert_eq!(SamplingStrategy::parse(Some("ST99Z")), (SamplingStrategy::NotSpecified, false));
    }

    #[test]
    fn sample_derivation_falls_back_on_rejected_year() {
        let mut cells = BTreeMap::new();
        cells.insert(vars::SAMPLING_YEAR.to_string(), "1850".to_string());
        cells.insert(vars::SAMPLING_DATE.to_string(), "2014-06-01".to_string());
        cells.insert(vars::PRODUCT_ID.to_string(), "P1".to_string());
        let (s, d) = Sample::from_cells(SampleId("s".into()), cells, "DE", "P1".into(), BTreeSet::new());
        assert!(d.year_rejected);
        assert_eq!(s.sampling_year, Some(2014));
        assert_eq!(s.sampling_country, "DE");
        assert_eq!(s.origin_country, UNKNOWN_COUNTRY);
    }

    #[test]
    fn unparsable_value_kept_as_text() {
        let mut cells = BTreeMap::new();
        cells.insert(vars::RESULT_VALUE.to_string(), "<0.01".to_string());
        let (r, d) = AnalyticalResult::from_cells(
            ResultId("r".into()),
            SampleId("s".into()),
            HazardCategory::VMPR,
            cells,
            "x".into(),
            None,
        );
        assert!(d.value_unparsable);
        assert_eq!(r.result_value.as_ref().unwrap().text, "<0.01");
        assert_eq!(r.result_value.unwrap().value, None);
    }

    fn scramble(code: &str, mask: &[bool], pad: (usize, usize)) -> String {
        let mut s = " ".repeat(pad.0);
        for (i, ch) in code.chars().enumerate() {
            let upper = mask.get(i % mask.len().max(1)).copied().unwrap_or(false);
            if ch == ' ' {
                s.push_str(if upper { "  " } else { "\t " });
            } else if upper {
                s.extend(ch.to_uppercase());
            } else {
                s.push(ch);
            }
        }
        s.push_str(&" ".repeat(pad.1));
        s
    }

    proptest! {
        #[test]
        fn canonicalization_is_idempotent(s in ".{0,40}") {
            let once = canonicalize_code(&s);
            prop_assert_eq!(canonicalize_code(&once), once);
        }

        #[test]
        fn classification_ignores_case_and_spacing(
            idx in 0usize..11,
            mask in proptest::collection::vec(any::<bool>(), 1..16),
            pad in (0usize..4, 0usize..4),
        ) {
            let code = KNOWN_EVALUATION_CODES[idx];
            let noisy = scramble(code, &mask, pad);
            let expected = classify_evaluation(&EvaluationCode::new(code));
            prop_assert_eq!(classify_evaluation(&EvaluationCode::new(noisy.clone())), expected);
            let recanon = EvaluationCode::new(EvaluationCode::new(noisy).canonical().to_string());
            prop_assert_eq!(classify_evaluation(&recanon), expected);
        }
    }
}
