//! Ground truth and a deliberately naive recomputation of every report.
//!
//! Nothing here touches the store, the ingest pipeline or the analytics
//! engine: samples and results are plain records, and each report is a
//! sequential `BTreeMap` group-by written out longhand.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analytics::{ReportRequest, StrategyGrouping, ALL, UNPARSED};
use crate::catalog::{ontology_group, parse_param_path, GroupingDictionary, ProductCategory};
use crate::model::{classify_canonical, ComplianceClass, HazardCategory, SamplingStrategy, UNKNOWN_COUNTRY};
use crate::report::{ratio, AggregateReport, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthSample {
    pub key: String,
    pub product_id: String,
    pub product_name: String,
    pub origin: String,
    pub sampling_country: String,
    pub year: Option<i32>,
    pub strategy: SamplingStrategy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthResult {
    /// Index into [`Truth::samples`].
    pub sample: usize,
    pub hazard: HazardCategory,
    pub contaminant_id: Arc<str>,
    pub contaminant_name: Arc<str>,
    /// Canonical evaluation code.
    pub eval: Arc<str>,
}

impl TruthResult {
    fn noncompliant(&self) -> bool {
        classify_canonical(&self.eval) == ComplianceClass::NonCompliant
    }
}

/// Every sample and every kept result of a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Truth {
    pub samples: Vec<TruthSample>,
    pub results: Vec<TruthResult>,
}

/// Expected ingest bookkeeping for one file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileTruth {
    pub rel_path: String,
    pub partition: String,
    pub rows_read: u64,
    pub rows_malformed: u64,
    pub duplicates_removed: u64,
    pub results_emitted: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub rows_read: u64,
    pub rows_malformed: u64,
    pub duplicates_removed: u64,
    pub results: u64,
    pub samples: u64,
    pub noncompliant_results: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub seed: u64,
    pub totals: LedgerTotals,
    pub files: Vec<FileTruth>,
    pub reports: Vec<AggregateReport>,
}

impl Ledger {
    pub fn build(seed: u64, files: Vec<FileTruth>, truth: &Truth, dict: &GroupingDictionary) -> Ledger {
        let totals = LedgerTotals {
            rows_read: files.iter().map(|f| f.rows_read).sum(),
            rows_malformed: files.iter().map(|f| f.rows_malformed).sum(),
            duplicates_removed: files.iter().map(|f| f.duplicates_removed).sum(),
            results: truth.results.len() as u64,
            samples: truth.samples.len() as u64,
            noncompliant_results: truth.results.iter().filter(|r| r.noncompliant()).count() as u64,
        };
        Ledger {
            seed,
            totals,
            files,
            reports: naive_reports(truth, dict, None, &ledger_requests()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }

    pub fn from_json(text: &str) -> crate::Result<Ledger> {
        serde_json::from_str(text).map_err(|e| crate::Error::json("<ledger>", e))
    }

    pub fn report(&self, name: &str, params: &BTreeMap<String, String>) -> Option<&AggregateReport> {
        self.reports.iter().find(|r| r.name == name && &r.params == params)
    }
}

/// The standard suite minus the sparsity matrix, which describes files
/// rather than facts and is checked by the oracle instead.
pub fn ledger_requests() -> Vec<ReportRequest> {
    crate::analytics::standard_suite()
        .into_iter()
        .filter(|r| *r != ReportRequest::SparsityMatrix)
        .collect()
}

/// Per-file missing rates, keyed by file then variable.
pub type Sparsity = BTreeMap<String, BTreeMap<String, f64>>;

pub fn naive_reports(
    truth: &Truth,
    dict: &GroupingDictionary,
    sparsity: Option<&Sparsity>,
    requests: &[ReportRequest],
) -> Vec<AggregateReport> {
    let n = Naive::new(truth, dict);
    requests.iter().map(|r| n.run(r, sparsity)).collect()
}

struct Naive<'a> {
    t: &'a Truth,
    dict: &'a GroupingDictionary,
    contaminant_display: BTreeMap<&'a str, &'a str>,
    product_display: BTreeMap<&'a str, &'a str>,
    /// Results of each sample.
    by_sample: Vec<Vec<&'a TruthResult>>,
}

fn keep_min<'a>(m: &mut BTreeMap<&'a str, &'a str>, k: &'a str, v: &'a str) {
    let e = m.entry(k).or_insert(v);
    if v < *e {
        *e = v;
    }
}

fn nc_count<'b>(rs: impl Iterator<Item = &'b &'b TruthResult>) -> (u64, u64) {
    let mut t = 0;
    let mut n = 0;
    for r in rs {
        t += 1;
        if r.noncompliant() {
            n += 1;
        }
    }
    (t, n)
}

impl<'a> Naive<'a> {
    fn new(t: &'a Truth, dict: &'a GroupingDictionary) -> Self {
        let mut contaminant_display = BTreeMap::new();
        for r in &t.results {
            keep_min(&mut contaminant_display, &r.contaminant_id, &r.contaminant_name);
        }
        let mut product_display = BTreeMap::new();
        for s in &t.samples {
            keep_min(&mut product_display, &s.product_id, &s.product_name);
        }
        let mut by_sample = vec![Vec::new(); t.samples.len()];
        for r in &t.results {
            by_sample[r.sample].push(r);
        }
        Naive {
            t,
            dict,
            contaminant_display,
            product_display,
            by_sample,
        }
    }

    fn sample(&self, r: &TruthResult) -> &'a TruthSample {
        &self.t.samples[r.sample]
    }

    fn run(&self, req: &ReportRequest, sparsity: Option<&Sparsity>) -> AggregateReport {
        let mut rep = AggregateReport::new(req.name(), req.params(), req.columns());
        match req {
            ReportRequest::YearlyTrend { hazard, year_min, year_max } => {
                let mut m: BTreeMap<(usize, i32), (u64, u64)> = BTreeMap::new();
                for r in &self.t.results {
                    let Some(y) = self.sample(r).year else { continue };
                    if y < *year_min || y > *year_max || hazard.is_some_and(|h| h != r.hazard) {
                        continue;
                    }
                    let e = m.entry((r.hazard.index(), y)).or_default();
                    e.0 += 1;
                    e.1 += u64::from(r.noncompliant());
                }
                for ((h, y), (t, n)) in m {
                    rep.push(vec![y.into(), HazardCategory::ALL[h].code().into(), t.into(), n.into(), ratio(n, t).into()]);
                }
            }
            ReportRequest::TopContaminants { hazard, n } => {
                let mut m: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
                for r in self.t.results.iter().filter(|r| hazard.is_none_or(|h| h == r.hazard)) {
                    let e = m.entry(&r.contaminant_id).or_default();
                    e.0 += 1;
                    e.1 += u64::from(r.noncompliant());
                }
                let all: u64 = m.values().map(|v| v.0).sum();
                let mut rows: Vec<_> = m.into_iter().collect();
                // BTreeMap order is id ascending; a stable sort keeps it for ties
                rows.sort_by(|a, b| b.1 .0.cmp(&a.1 .0));
                for (i, (id, (t, nc))) in rows.into_iter().take(*n).enumerate() {
                    rep.push(vec![
                        (i + 1).into(),
                        id.into(),
                        self.contaminant_display[id].into(),
                        t.into(),
                        ratio(t, all).into(),
                        nc.into(),
                        ratio(nc, t).into(),
                    ]);
                }
            }
            ReportRequest::HazardProductTable { hazard, top_hazards, top_products } => {
                self.cross(&mut rep, *hazard, *top_hazards, *top_products, true)
            }
            ReportRequest::ProductHazardTable { hazard, top_products, top_hazards } => {
                self.cross(&mut rep, *hazard, *top_products, *top_hazards, false)
            }
            ReportRequest::OntologyGroupStats { hazard, level, within } => {
                let mut m: BTreeMap<(String, bool), (u64, u64, BTreeSet<&str>)> = BTreeMap::new();
                for r in self.t.results.iter().filter(|r| hazard.is_none_or(|h| h == r.hazard)) {
                    let key = match parse_param_path(&r.contaminant_name) {
                        Err(_) => {
                            if within.is_some() {
                                continue;
                            }
                            (UNPARSED.to_string(), false)
                        }
                        Ok(p) => {
                            if let Some(w) = within {
                                if p.segments()[0] != *w {
                                    continue;
                                }
                            }
                            let g = ontology_group(&p, *level);
                            (g.name, g.truncated)
                        }
                    };
                    let e = m.entry(key).or_default();
                    e.0 += 1;
                    e.1 += u64::from(r.noncompliant());
                    e.2.insert(&r.contaminant_id);
                }
                let mut rows: Vec<_> = m.into_iter().collect();
                rows.sort_by(|a, b| b.1 .0.cmp(&a.1 .0));
                for ((g, tr), (t, n, ids)) in rows {
                    rep.push(vec![g.into(), tr.into(), t.into(), n.into(), ratio(n, t).into(), ids.len().into()]);
                }
            }
            ReportRequest::ProductCategoryStats { hazard } => {
                let mut m: BTreeMap<ProductCategory, (u64, u64)> = BTreeMap::new();
                for r in self.t.results.iter().filter(|r| hazard.is_none_or(|h| h == r.hazard)) {
                    let cat = self.dict.assign(&self.sample(r).product_name, r.hazard);
                    let e = m.entry(cat).or_default();
                    e.0 += 1;
                    e.1 += u64::from(r.noncompliant());
                }
                let all: u64 = m.values().map(|v| v.0).sum();
                let mut rows: Vec<_> = m.into_iter().collect();
                rows.sort_by(|a, b| b.1 .0.cmp(&a.1 .0));
                for (i, (c, (t, n))) in rows.into_iter().enumerate() {
                    rep.push(vec![(i + 1).into(), c.name().into(), t.into(), ratio(t, all).into(), n.into(), ratio(n, t).into()]);
                }
            }
            ReportRequest::CountryStats { top_n } => {
                let mut m: BTreeMap<&str, [(u64, u64); 3]> = BTreeMap::new();
                for r in &self.t.results {
                    let e = &mut m.entry(&self.sample(r).sampling_country).or_default()[r.hazard.index()];
                    e.0 += 1;
                    e.1 += u64::from(r.noncompliant());
                }
                let all = self.t.results.len() as u64;
                let mut rows: Vec<_> = m.into_iter().collect();
                let tot = |a: &[(u64, u64); 3]| a.iter().map(|x| x.0).sum::<u64>();
                rows.sort_by(|a, b| tot(&b.1).cmp(&tot(&a.1)));
                for (i, (c, hz)) in rows.into_iter().take(*top_n).enumerate() {
                    let t = tot(&hz);
                    let n: u64 = hz.iter().map(|x| x.1).sum();
                    let mut row: Vec<Value> = vec![(i + 1).into(), c.into(), t.into(), ratio(t, all).into(), n.into(), ratio(n, t).into()];
                    for (ht, hn) in hz {
                        row.push(ht.into());
                        row.push(hn.into());
                    }
                    rep.push(row);
                }
            }
            ReportRequest::SamplingStrategyBreakdown { group_by } => self.strategies(&mut rep, *group_by),
            ReportRequest::TradeLinks { min_samples, top_n, year_min, year_max } => {
                let mut m: BTreeMap<(&str, &str), (u64, u64)> = BTreeMap::new();
                for (i, s) in self.t.samples.iter().enumerate() {
                    if year_min.is_some() || year_max.is_some() {
                        let Some(y) = s.year else { continue };
                        if year_min.is_some_and(|lo| y < lo) || year_max.is_some_and(|hi| y > hi) {
                            continue;
                        }
                    }
                    if s.origin == s.sampling_country {
                        continue;
                    }
                    let e = m.entry((&s.origin, &s.sampling_country)).or_default();
                    e.0 += 1;
                    e.1 += u64::from(self.by_sample[i].iter().any(|r| r.noncompliant()));
                }
                let mut rows: Vec<_> = m.into_iter().filter(|(_, (t, _))| *t > *min_samples).collect();
                // (origin, destination) ascending already; then samples, then ratio
                rows.sort_by(|a, b| b.1 .0.cmp(&a.1 .0));
                rows.sort_by(|a, b| {
                    let l = u128::from(a.1 .1) * u128::from(b.1 .0);
                    let r = u128::from(b.1 .1) * u128::from(a.1 .0);
                    r.cmp(&l)
                });
                for (i, ((o, d), (t, n))) in rows.into_iter().take(*top_n).enumerate() {
                    rep.push(vec![(i + 1).into(), o.into(), d.into(), t.into(), n.into(), ratio(n, t).into()]);
                }
            }
            ReportRequest::UnknownOriginTrend => {
                let mut m: BTreeMap<i32, (u64, u64)> = BTreeMap::new();
                for s in &self.t.samples {
                    if let Some(y) = s.year {
                        let e = m.entry(y).or_default();
                        e.0 += 1;
                        e.1 += u64::from(s.origin == UNKNOWN_COUNTRY);
                    }
                }
                for (y, (t, u)) in m {
                    rep.push(vec![y.into(), t.into(), u.into(), ratio(u, t).into()]);
                }
            }
            ReportRequest::ResultsPerSampleDistribution => {
                let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
                for rs in &self.by_sample {
                    *hist.entry(rs.len() as u64).or_default() += 1;
                }
                for (k, s) in hist {
                    rep.push(vec!["histogram".into(), k.to_string().into(), s.into(), (k * s).into(), (k as f64).into()]);
                }
                for h in HazardCategory::ALL {
                    let mut samples = 0u64;
                    let mut results = 0u64;
                    for rs in &self.by_sample {
                        let k = rs.iter().filter(|r| r.hazard == h).count() as u64;
                        if k > 0 {
                            samples += 1;
                            results += k;
                        }
                    }
                    rep.push(vec!["hazard_mean".into(), h.code().into(), samples.into(), results.into(), ratio(results, samples).into()]);
                }
            }
            ReportRequest::ContaminantOverlap => {
                let mut m: BTreeMap<&str, BTreeSet<HazardCategory>> = BTreeMap::new();
                for r in &self.t.results {
                    m.entry(&r.contaminant_id).or_default().insert(r.hazard);
                }
                let unique = m.len() as u64;
                let count = |f: &dyn Fn(&BTreeSet<HazardCategory>) -> bool| m.values().filter(|s| f(s)).count() as u64;
                rep.push(vec!["total".into(), ALL.into(), unique.into(), ratio(unique, unique).into()]);
                for k in 1..=3usize {
                    let c = count(&|s| s.len() == k);
                    rep.push(vec!["cardinality".into(), k.to_string().into(), c.into(), ratio(c, unique).into()]);
                }
                for h in HazardCategory::ALL {
                    let c = count(&|s| s.contains(&h));
                    rep.push(vec!["membership".into(), h.code().into(), c.into(), ratio(c, unique).into()]);
                }
                let hz = HazardCategory::ALL;
                for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                    let c = count(&|s| s.contains(&hz[a]) && s.contains(&hz[b]));
                    rep.push(vec![
                        "pairwise".into(),
                        format!("{}+{}", hz[a].code(), hz[b].code()).into(),
                        c.into(),
                        ratio(c, unique).into(),
                    ]);
                }
            }
            ReportRequest::EvaluationSummary => {
                let mut m: BTreeMap<&str, u64> = BTreeMap::new();
                for r in &self.t.results {
                    *m.entry(&r.eval).or_default() += 1;
                }
                let all = self.t.results.len() as u64;
                let mut rows: Vec<_> = m.into_iter().collect();
                rows.sort_by(|a, b| b.1.cmp(&a.1));
                for (code, c) in rows {
                    rep.push(vec![code.into(), classify_canonical(code).as_str().into(), c.into(), ratio(c, all).into()]);
                }
            }
            ReportRequest::SparsityMatrix => {
                for (file, vars) in sparsity.into_iter().flatten() {
                    for (v, rate) in vars {
                        rep.push(vec![file.as_str().into(), v.as_str().into(), (*rate).into()]);
                    }
                }
            }
        }
        rep
    }

    fn cross(&self, rep: &mut AggregateReport, hazard: HazardCategory, n_outer: usize, n_inner: usize, contaminant_outer: bool) {
        let mut cells: BTreeMap<&str, BTreeMap<&str, (u64, u64)>> = BTreeMap::new();
        for r in self.t.results.iter().filter(|r| r.hazard == hazard) {
            let p: &str = &self.sample(r).product_id;
            let c: &str = &r.contaminant_id;
            let (o, i) = if contaminant_outer { (c, p) } else { (p, c) };
            let e = cells.entry(o).or_default().entry(i).or_default();
            e.0 += 1;
            e.1 += u64::from(r.noncompliant());
        }
        let name = |id: &str, contaminant: bool| {
            if contaminant {
                self.contaminant_display[id]
            } else {
                self.product_display[id]
            }
        };
        let mut outers: Vec<(&str, u64)> = cells.iter().map(|(o, m)| (*o, m.values().map(|v| v.0).sum())).collect();
        outers.sort_by(|a, b| b.1.cmp(&a.1));
        for (oi, (o, ot)) in outers.into_iter().take(n_outer).enumerate() {
            let mut inner: Vec<(&str, (u64, u64))> = cells[o].iter().map(|(k, v)| (*k, *v)).collect();
            inner.sort_by(|a, b| b.1 .0.cmp(&a.1 .0));
            for (ii, (i, (t, n))) in inner.into_iter().take(n_inner).enumerate() {
                rep.push(vec![
                    (oi + 1).into(),
                    o.into(),
                    name(o, contaminant_outer).into(),
                    ot.into(),
                    (ii + 1).into(),
                    i.into(),
                    name(i, !contaminant_outer).into(),
                    t.into(),
                    n.into(),
                    ratio(n, t).into(),
                ]);
            }
        }
    }

    fn strategies(&self, rep: &mut AggregateReport, group_by: StrategyGrouping) {
        // (hazard slot, year, country, strategy index) -> (samples, results, noncompliant)
        let mut m: BTreeMap<(usize, Option<i32>, String, usize), (u64, u64, u64)> = BTreeMap::new();
        for (i, s) in self.t.samples.iter().enumerate() {
            let rs = &self.by_sample[i];
            let mut add = |k: (usize, Option<i32>, String), picked: Vec<&&TruthResult>| {
                let (t, n) = nc_count(picked.into_iter());
                let e = m.entry((k.0, k.1, k.2, s.strategy.index())).or_default();
                e.0 += 1;
                e.1 += t;
                e.2 += n;
            };
            match group_by {
                StrategyGrouping::Overall => add((3, None, String::new()), rs.iter().collect()),
                StrategyGrouping::PerYear => {
                    let Some(y) = s.year else { continue };
                    for h in HazardCategory::ALL {
                        let picked: Vec<_> = rs.iter().filter(|r| r.hazard == h).collect();
                        if !picked.is_empty() {
                            add((h.index(), Some(y), String::new()), picked);
                        }
                    }
                }
                StrategyGrouping::PerCountryHazard => {
                    for h in HazardCategory::ALL {
                        let picked: Vec<_> = rs.iter().filter(|r| r.hazard == h).collect();
                        if !picked.is_empty() {
                            add((h.index(), None, s.sampling_country.clone()), picked);
                        }
                    }
                }
            }
        }
        let mut group_samples: BTreeMap<(usize, Option<i32>, String), u64> = BTreeMap::new();
        for ((h, y, c, _), v) in &m {
            *group_samples.entry((*h, *y, c.clone())).or_default() += v.0;
        }
        for ((h, y, c, st), (s, t, n)) in m {
            let g = group_samples[&(h, y, c.clone())];
            rep.push(vec![
                group_by.as_str().into(),
                if h == 3 { ALL.into() } else { HazardCategory::ALL[h].code().into() },
                match y {
                    Some(y) => y.into(),
                    None => ALL.into(),
                },
                if group_by == StrategyGrouping::PerCountryHazard { c.into() } else { ALL.into() },
                SamplingStrategy::ALL[st].label().into(),
                s.into(),
                ratio(s, g).into(),
                t.into(),
                n.into(),
                ratio(n, t).into(),
            ]);
        }
    }
}
