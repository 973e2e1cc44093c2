use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::HazardCategory;
use crate::report::AggregateReport;

pub const DEFAULT_YEAR_MIN: i32 = 2000;
pub const DEFAULT_YEAR_MAX: i32 = 2024;

/// Every report name the engine knows, in suite order.
pub const REPORT_NAMES: [&str; 14] = [
    "yearly_trend",
    "top_contaminants",
    "hazard_product_table",
    "product_hazard_table",
    "ontology_group_stats",
    "product_category_stats",
    "country_stats",
    "sampling_strategy_breakdown",
    "trade_links",
    "unknown_origin_trend",
    "results_per_sample_distribution",
    "contaminant_overlap",
    "evaluation_summary",
    "sparsity_matrix",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyGrouping {
    Overall,
    PerYear,
    PerCountryHazard,
}

impl StrategyGrouping {
    pub const ALL: [StrategyGrouping; 3] =
        [StrategyGrouping::Overall, StrategyGrouping::PerYear, StrategyGrouping::PerCountryHazard];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyGrouping::Overall => "overall",
            StrategyGrouping::PerYear => "per_year",
            StrategyGrouping::PerCountryHazard => "per_country_hazard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.as_str() == s.trim().replace('-', "_"))
    }
}

/// A fully parameterized analytics operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReportRequest {
    YearlyTrend { hazard: Option<HazardCategory>, year_min: i32, year_max: i32 },
    TopContaminants { hazard: Option<HazardCategory>, n: usize },
    HazardProductTable { hazard: HazardCategory, top_hazards: usize, top_products: usize },
    ProductHazardTable { hazard: HazardCategory, top_products: usize, top_hazards: usize },
    OntologyGroupStats { hazard: Option<HazardCategory>, level: usize, within: Option<String> },
    ProductCategoryStats { hazard: Option<HazardCategory> },
    CountryStats { top_n: usize },
    SamplingStrategyBreakdown { group_by: StrategyGrouping },
    TradeLinks { min_samples: u64, top_n: usize, year_min: Option<i32>, year_max: Option<i32> },
    UnknownOriginTrend,
    ResultsPerSampleDistribution,
    ContaminantOverlap,
    EvaluationSummary,
    SparsityMatrix,
}

/// Loose parameters as they arrive from a command line or config file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportParams {
    pub hazard: Option<String>,
    pub n: Option<usize>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub level: Option<usize>,
    pub within: Option<String>,
    pub min_samples: Option<u64>,
    pub top: Option<usize>,
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
    pub group_by: Option<String>,
}

fn hazard_text(h: Option<HazardCategory>) -> String {
    h.map_or("ALL", |h| h.code()).to_string()
}

fn parse_hazard(s: Option<&str>) -> Result<Option<HazardCategory>> {
    match s {
        None => Ok(None),
        Some(t) if t.trim().eq_ignore_ascii_case("all") => Ok(None),
        Some(t) => HazardCategory::from_code(t)
            .map(Some)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown hazard {t:?}; expected CC, PEST, VMPR or ALL"))),
    }
}

fn at_least_one(what: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::InvalidParameter(format!("{what} must be at least 1")));
    }
    Ok(v)
}

impl ReportRequest {
    pub fn name(&self) -> &'static str {
        match self {
            ReportRequest::YearlyTrend { .. } => "yearly_trend",
            ReportRequest::TopContaminants { .. } => "top_contaminants",
            ReportRequest::HazardProductTable { .. } => "hazard_product_table",
            ReportRequest::ProductHazardTable { .. } => "product_hazard_table",
            ReportRequest::OntologyGroupStats { .. } => "ontology_group_stats",
            ReportRequest::ProductCategoryStats { .. } => "product_category_stats",
            ReportRequest::CountryStats { .. } => "country_stats",
            ReportRequest::SamplingStrategyBreakdown { .. } => "sampling_strategy_breakdown",
            ReportRequest::TradeLinks { .. } => "trade_links",
            ReportRequest::UnknownOriginTrend => "unknown_origin_trend",
            ReportRequest::ResultsPerSampleDistribution => "results_per_sample_distribution",
            ReportRequest::ContaminantOverlap => "contaminant_overlap",
            ReportRequest::EvaluationSummary => "evaluation_summary",
            ReportRequest::SparsityMatrix => "sparsity_matrix",
        }
    }

    pub fn params(&self) -> BTreeMap<String, String> {
        let mut p = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            p.insert(k.to_string(), v);
        };
        match self {
            ReportRequest::YearlyTrend { hazard, year_min, year_max } => {
                put("hazard", hazard_text(*hazard));
                put("year_min", year_min.to_string());
                put("year_max", year_max.to_string());
            }
            ReportRequest::TopContaminants { hazard, n } => {
                put("hazard", hazard_text(*hazard));
                put("n", n.to_string());
            }
            ReportRequest::HazardProductTable { hazard, top_hazards, top_products } => {
                put("hazard", hazard.code().to_string());
                put("n1", top_hazards.to_string());
                put("n2", top_products.to_string());
            }
            ReportRequest::ProductHazardTable { hazard, top_products, top_hazards } => {
                put("hazard", hazard.code().to_string());
                put("n1", top_products.to_string());
                put("n2", top_hazards.to_string());
            }
            ReportRequest::OntologyGroupStats { hazard, level, within } => {
                put("hazard", hazard_text(*hazard));
                put("level", level.to_string());
                if let Some(w) = within {
                    put("within", w.clone());
                }
            }
            ReportRequest::ProductCategoryStats { hazard } => put("hazard", hazard_text(*hazard)),
            ReportRequest::CountryStats { top_n } => put("top", top_n.to_string()),
            ReportRequest::SamplingStrategyBreakdown { group_by } => put("group_by", group_by.as_str().to_string()),
            ReportRequest::TradeLinks { min_samples, top_n, year_min, year_max } => {
                put("min_samples", min_samples.to_string());
                put("top", top_n.to_string());
                if let Some(y) = year_min {
                    put("year_min", y.to_string());
                }
                if let Some(y) = year_max {
                    put("year_max", y.to_string());
                }
            }
            _ => {}
        }
        p
    }

    pub fn columns(&self) -> &'static [&'static str] {
        const SHARE: [&str; 7] = [
            "rank",
            "contaminant_id",
            "contaminant_name",
            "total_results",
            "share",
            "noncompliant_results",
            "noncompliance_ratio",
        ];
        match self {
            ReportRequest::YearlyTrend { .. } => &["year", "hazard", "total_results", "noncompliant_results", "noncompliance_ratio"],
            ReportRequest::TopContaminants { .. } => &SHARE,
            ReportRequest::HazardProductTable { .. } => &[
                "contaminant_rank",
                "contaminant_id",
                "contaminant_name",
                "contaminant_total",
                "product_rank",
                "product_id",
                "product_name",
                "total_results",
                "noncompliant_results",
                "noncompliance_ratio",
            ],
            ReportRequest::ProductHazardTable { .. } => &[
                "product_rank",
                "product_id",
                "product_name",
                "product_total",
                "contaminant_rank",
                "contaminant_id",
                "contaminant_name",
                "total_results",
                "noncompliant_results",
                "noncompliance_ratio",
            ],
            ReportRequest::OntologyGroupStats { .. } => {
                &["group", "truncated", "total_results", "noncompliant_results", "noncompliance_ratio", "contaminant_ids"]
            }
            ReportRequest::ProductCategoryStats { .. } => {
                &["rank", "category", "total_results", "share", "noncompliant_results", "noncompliance_ratio"]
            }
            ReportRequest::CountryStats { .. } => &[
                "rank",
                "sampling_country",
                "total_results",
                "share",
                "noncompliant_results",
                "noncompliance_ratio",
                "cc_results",
                "cc_noncompliant",
                "pest_results",
                "pest_noncompliant",
                "vmpr_results",
                "vmpr_noncompliant",
            ],
            ReportRequest::SamplingStrategyBreakdown { .. } => &[
                "group_by",
                "hazard",
                "year",
                "sampling_country",
                "strategy",
                "samples",
                "sample_share",
                "results",
                "noncompliant_results",
                "noncompliance_ratio",
            ],
            ReportRequest::TradeLinks { .. } => {
                &["rank", "origin", "destination", "samples", "noncompliant_samples", "noncompliance_ratio"]
            }
            ReportRequest::UnknownOriginTrend => &["year", "total_samples", "unknown_origin_samples", "unknown_share"],
            ReportRequest::ResultsPerSampleDistribution => &["section", "key", "samples", "results", "mean"],
            ReportRequest::ContaminantOverlap => &["section", "categories", "contaminant_ids", "share"],
            ReportRequest::EvaluationSummary => &["eval_code", "compliance_class", "results", "share"],
            ReportRequest::SparsityMatrix => &["file", "variable", "missing_rate"],
        }
    }

    pub fn empty_report(&self) -> AggregateReport {
        AggregateReport::new(self.name(), self.params(), self.columns())
    }

    /// Builds a request from a report name and loose parameters, applying
    /// defaults for anything unset.
    pub fn parse(name: &str, p: &ReportParams) -> Result<ReportRequest> {
        let hazard = parse_hazard(p.hazard.as_deref())?;
        let need_hazard = || {
            hazard.ok_or_else(|| Error::InvalidParameter(format!("{name} needs --hazard CC|PEST|VMPR")))
        };
        let req = match name {
            "yearly_trend" => ReportRequest::YearlyTrend {
                hazard,
                year_min: p.year_min.unwrap_or(DEFAULT_YEAR_MIN),
                year_max: p.year_max.unwrap_or(DEFAULT_YEAR_MAX),
            },
            "top_contaminants" => ReportRequest::TopContaminants {
                hazard,
                n: at_least_one("n", p.n.unwrap_or(10))?,
            },
            "hazard_product_table" => ReportRequest::HazardProductTable {
                hazard: need_hazard()?,
                top_hazards: at_least_one("n1", p.n1.unwrap_or(3))?,
                top_products: at_least_one("n2", p.n2.unwrap_or(3))?,
            },
            "product_hazard_table" => ReportRequest::ProductHazardTable {
                hazard: need_hazard()?,
                top_products: at_least_one("n1", p.n1.unwrap_or(3))?,
                top_hazards: at_least_one("n2", p.n2.unwrap_or(3))?,
            },
            "ontology_group_stats" => {
                let level = p.level.unwrap_or(1);
                if !(1..=2).contains(&level) {
                    return Err(Error::InvalidParameter(format!("level must be 1 or 2, got {level}")));
                }
                ReportRequest::OntologyGroupStats {
                    hazard,
                    level,
                    within: p.within.clone(),
                }
            }
            "product_category_stats" => ReportRequest::ProductCategoryStats { hazard },
            "country_stats" => ReportRequest::CountryStats {
                top_n: at_least_one("top", p.top.or(p.n).unwrap_or(15))?,
            },
            "sampling_strategy_breakdown" => {
                let g = p.group_by.as_deref().unwrap_or("overall");
                ReportRequest::SamplingStrategyBreakdown {
                    group_by: StrategyGrouping::parse(g).ok_or_else(|| {
                        Error::InvalidParameter(format!("group-by must be overall, per_year or per_country_hazard, got {g:?}"))
                    })?,
                }
            }
            "trade_links" => {
                let min_samples = p.min_samples.unwrap_or(100);
                if min_samples == 0 {
                    return Err(Error::InvalidParameter("min-samples must be positive".into()));
                }
                ReportRequest::TradeLinks {
                    min_samples,
                    top_n: at_least_one("top", p.top.or(p.n).unwrap_or(20))?,
                    year_min: Some(p.year_min.unwrap_or(DEFAULT_YEAR_MIN)),
                    year_max: Some(p.year_max.unwrap_or(DEFAULT_YEAR_MAX)),
                }
            }
            "unknown_origin_trend" => ReportRequest::UnknownOriginTrend,
            "results_per_sample_distribution" => ReportRequest::ResultsPerSampleDistribution,
            "contaminant_overlap" => ReportRequest::ContaminantOverlap,
            "evaluation_summary" => ReportRequest::EvaluationSummary,
            "sparsity_matrix" => ReportRequest::SparsityMatrix,
            other => {
                return Err(Error::UnknownReport {
                    name: other.to_string(),
                    available: REPORT_NAMES.iter().map(|s| s.to_string()).collect(),
                })
            }
        };
        Ok(req)
    }
}

/// The full set of reports regenerated for every corpus.
pub fn standard_suite() -> Vec<ReportRequest> {
    let mut v = vec![ReportRequest::YearlyTrend {
        hazard: None,
        year_min: DEFAULT_YEAR_MIN,
        year_max: DEFAULT_YEAR_MAX,
    }];
    v.push(ReportRequest::TopContaminants { hazard: None, n: 10 });
    for h in HazardCategory::ALL {
        v.push(ReportRequest::TopContaminants { hazard: Some(h), n: 10 });
    }
    for h in HazardCategory::ALL {
        v.push(ReportRequest::HazardProductTable {
            hazard: h,
            top_hazards: 3,
            top_products: 3,
        });
        v.push(ReportRequest::ProductHazardTable {
            hazard: h,
            top_products: 3,
            top_hazards: 3,
        });
    }
    for level in [1, 2] {
        v.push(ReportRequest::OntologyGroupStats {
            hazard: None,
            level,
            within: None,
        });
    }
    v.push(ReportRequest::ProductCategoryStats { hazard: None });
    for h in HazardCategory::ALL {
        v.push(ReportRequest::ProductCategoryStats { hazard: Some(h) });
    }
    v.push(ReportRequest::CountryStats { top_n: 15 });
    for g in StrategyGrouping::ALL {
        v.push(ReportRequest::SamplingStrategyBreakdown { group_by: g });
    }
    for min_samples in [100, 5000] {
        v.push(ReportRequest::TradeLinks {
            min_samples,
            top_n: 20,
            year_min: Some(DEFAULT_YEAR_MIN),
            year_max: Some(DEFAULT_YEAR_MAX),
        });
    }
    v.extend([
        ReportRequest::UnknownOriginTrend,
        ReportRequest::ResultsPerSampleDistribution,
        ReportRequest::ContaminantOverlap,
        ReportRequest::EvaluationSummary,
        ReportRequest::SparsityMatrix,
    ]);
    v
}
